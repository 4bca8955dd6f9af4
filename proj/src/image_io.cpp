#include "selfir/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace selfir {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Image load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("failed to decode PNG " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);

  if (w == 0 || h == 0) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("zero-sized PNG " + path);
  }

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);  // libpng reads 16-bit big-endian
  png_read_update_info(png, info);

  bit_depth = png_get_bit_depth(png, info);
  if (bit_depth != 8 && bit_depth != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("unsupported PNG bit depth in " + path);
  }
  int channels = static_cast<int>(png_get_channels(png, info));

  std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buf(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(static_cast<int>(h), static_cast<int>(w), channels);
  img.bit_origin = bit_depth == 8 ? BitOrigin::U8 : BitOrigin::U16;
  const float scale = bit_depth == 8 ? 1.0f / 255.0f : 1.0f / 65535.0f;
  if (bit_depth == 8) {
    for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = buf[i] * scale;
  } else {
    const auto* p16 = reinterpret_cast<const std::uint16_t*>(buf.data());
    for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = p16[i] * scale;
  }
  return img;
}

void save_png(const Image& img, const std::string& path, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16)
    throw std::invalid_argument("save_png: bit depth must be 8 or 16");
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("save_png: 1 or 3 channels required");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed to encode PNG " + path);
  }

  png_init_io(png, fp.get());
  int color_type = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, img.width, img.height, bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (img.colorspace == ColorSpace::SRGB)
    png_set_sRGB(png, info, PNG_sRGB_INTENT_PERCEPTUAL);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);

  const int maxv = bit_depth == 8 ? 255 : 65535;
  if (bit_depth == 8) {
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * img.channels);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < img.channels; ++c) {
          float v = std::fmin(1.f, std::fmax(0.f, img.at(y, x, c)));
          row[static_cast<std::size_t>(x) * img.channels + c] =
              static_cast<unsigned char>(std::lround(v * maxv));
        }
      png_write_row(png, row.data());
    }
  } else {
    std::vector<std::uint16_t> row(static_cast<std::size_t>(img.width) * img.channels);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < img.channels; ++c) {
          float v = std::fmin(1.f, std::fmax(0.f, img.at(y, x, c)));
          row[static_cast<std::size_t>(x) * img.channels + c] =
              static_cast<std::uint16_t>(std::lround(v * maxv));
        }
      png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
    }
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void save_sirt(const float* data, const std::vector<std::uint32_t>& dims,
               const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write " + path);
  const char magic[4] = {'S', 'I', 'R', 'T'};
  std::uint32_t version = 1, dtype = 0, ndim = static_cast<std::uint32_t>(dims.size());
  std::size_t count = 1;
  for (auto d : dims) count *= d;
  if (std::fwrite(magic, 1, 4, fp.get()) != 4 ||
      std::fwrite(&version, 4, 1, fp.get()) != 1 ||
      std::fwrite(&dtype, 4, 1, fp.get()) != 1 ||
      std::fwrite(&ndim, 4, 1, fp.get()) != 1 ||
      std::fwrite(dims.data(), 4, ndim, fp.get()) != ndim ||
      std::fwrite(data, 4, count, fp.get()) != count)
    throw std::runtime_error("short write to " + path);
}

std::vector<float> load_sirt(const std::string& path, std::vector<std::uint32_t>& dims) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open " + path);
  char magic[4];
  std::uint32_t version = 0, dtype = 0, ndim = 0;
  if (std::fread(magic, 1, 4, fp.get()) != 4 || std::memcmp(magic, "SIRT", 4) != 0)
    throw std::runtime_error("not a SIRT file: " + path);
  if (std::fread(&version, 4, 1, fp.get()) != 1 || version != 1)
    throw std::runtime_error("unsupported SIRT version in " + path);
  if (std::fread(&dtype, 4, 1, fp.get()) != 1 || dtype != 0)
    throw std::runtime_error("unsupported SIRT dtype in " + path);
  if (std::fread(&ndim, 4, 1, fp.get()) != 1 || ndim == 0 || ndim > 8)
    throw std::runtime_error("bad SIRT ndim in " + path);
  dims.resize(ndim);
  if (std::fread(dims.data(), 4, ndim, fp.get()) != ndim)
    throw std::runtime_error("truncated SIRT header in " + path);
  std::size_t count = 1;
  for (auto d : dims) count *= d;
  std::vector<float> out(count);
  if (std::fread(out.data(), 4, count, fp.get()) != count)
    throw std::runtime_error("truncated SIRT payload in " + path);
  return out;
}

void save_sirt_image(const Image& img, const std::string& path) {
  save_sirt(img.data.data(),
            {static_cast<std::uint32_t>(img.height), static_cast<std::uint32_t>(img.width),
             static_cast<std::uint32_t>(img.channels)},
            path);
}

Image load_sirt_image(const std::string& path, ColorSpace cs) {
  std::vector<std::uint32_t> dims;
  std::vector<float> data = load_sirt(path, dims);
  if (dims.size() != 3) throw std::runtime_error("SIRT image must be rank 3: " + path);
  Image img(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]), cs);
  img.data = std::move(data);
  return img;
}

Image load_image(const std::string& path, ColorSpace cs, bool clamp) {
  Image img;
  if (has_suffix(path, ".png")) {
    img = load_png(path);
  } else if (has_suffix(path, ".sirt")) {
    img = load_sirt_image(path, cs);
  } else {
    throw std::runtime_error("unsupported image extension: " + path);
  }
  img.colorspace = cs;
  if (img.height == 0 || img.width == 0) throw std::runtime_error("zero-sized image: " + path);
  if (!all_finite(img)) throw std::runtime_error("non-finite values in " + path);
  if (clamp) img = clamp01(std::move(img));
  return center_crop_even(img);
}

void save_image(const Image& img, const std::string& path, int bit_depth) {
  if (has_suffix(path, ".png")) {
    save_png(img, path, bit_depth);
  } else if (has_suffix(path, ".sirt")) {
    save_sirt_image(img, path);
  } else {
    throw std::runtime_error("unsupported image extension: " + path);
  }
}

}  // namespace selfir

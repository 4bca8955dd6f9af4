#include "selfir/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace selfir {

std::string to_string(ColorSpace cs) {
  return cs == ColorSpace::SRGB ? "srgb" : "linear";
}

ColorSpace colorspace_from_string(const std::string& s) {
  if (s == "srgb") return ColorSpace::SRGB;
  if (s == "linear") return ColorSpace::LINEAR;
  throw std::invalid_argument("unknown colorspace: " + s);
}

Image crop(const Image& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > img.height || x0 + w > img.width)
    throw std::invalid_argument("crop window out of bounds");
  Image out(h, w, img.channels, img.colorspace);
  out.bit_origin = img.bit_origin;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return out;
}

Image center_crop(const Image& img, int h, int w) {
  if (h > img.height || w > img.width)
    throw std::invalid_argument("center_crop target larger than image");
  return crop(img, (img.height - h) / 2, (img.width - w) / 2, h, w);
}

Image center_crop_even(const Image& img) {
  int h = img.height - (img.height % 2);
  int w = img.width - (img.width % 2);
  if (h <= 0 || w <= 0) throw std::invalid_argument("image too small to crop to even dims");
  if (h == img.height && w == img.width) return img;
  return center_crop(img, h, w);
}

Image center_crop_multiple(const Image& img, int m) {
  int h = (img.height / m) * m;
  int w = (img.width / m) * m;
  if (h <= 0 || w <= 0)
    throw std::invalid_argument("image smaller than crop multiple");
  if (h == img.height && w == img.width) return img;
  return center_crop(img, h, w);
}

PatchGrid make_patch_grid(int h, int w, int patch_size) {
  if (patch_size < 4) throw std::invalid_argument("patch_size must be >= 4");
  if (patch_size > h || patch_size > w)
    throw std::invalid_argument("patch_size larger than image");
  return PatchGrid{patch_size, h / patch_size, w / patch_size};
}

std::vector<Image> split_patches(const Image& img, int patch_size, PatchGrid* grid_out) {
  PatchGrid grid = make_patch_grid(img.height, img.width, patch_size);
  Image cropped = center_crop_multiple(img, patch_size);
  // Recompute on the cropped size; identical by construction.
  grid = make_patch_grid(cropped.height, cropped.width, patch_size);
  std::vector<Image> patches;
  patches.reserve(static_cast<std::size_t>(grid.count()));
  for (int r = 0; r < grid.n_rows; ++r)
    for (int c = 0; c < grid.n_cols; ++c)
      patches.push_back(crop(cropped, r * patch_size, c * patch_size, patch_size, patch_size));
  if (grid_out) *grid_out = grid;
  return patches;
}

Image assemble_patches(const std::vector<Image>& patches, const PatchGrid& grid, int channels) {
  if (static_cast<int>(patches.size()) != grid.count())
    throw std::invalid_argument("patch count does not match grid");
  Image out(grid.n_rows * grid.patch_size, grid.n_cols * grid.patch_size, channels,
            patches.empty() ? ColorSpace::SRGB : patches[0].colorspace);
  for (int r = 0; r < grid.n_rows; ++r)
    for (int c = 0; c < grid.n_cols; ++c) {
      const Image& p = patches[static_cast<std::size_t>(r) * grid.n_cols + c];
      for (int y = 0; y < grid.patch_size; ++y)
        for (int x = 0; x < grid.patch_size; ++x)
          for (int ch = 0; ch < channels; ++ch)
            out.at(r * grid.patch_size + y, c * grid.patch_size + x, ch) = p.at(y, x, ch);
    }
  return out;
}

Image extract_patch(const Image& img, const PatchGrid& grid, int row, int col) {
  return crop(img, row * grid.patch_size, col * grid.patch_size,
              grid.patch_size, grid.patch_size);
}

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mse: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double psnr(const Image& a, const Image& b, double peak) {
  double m = mse(a, b);
  if (m <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(peak * peak / m));
}

namespace {

struct Moments {
  double mean_a, mean_b, var_a, var_b, cov;
};

Moments channel_moments(const Image& a, const Image& b, int ch) {
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  const std::size_t n = static_cast<std::size_t>(a.height) * a.width;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      double va = a.at(y, x, ch), vb = b.at(y, x, ch);
      sa += va;
      sb += vb;
      saa += va * va;
      sbb += vb * vb;
      sab += va * vb;
    }
  double ma = sa / n, mb = sb / n;
  return {ma, mb, saa / n - ma * ma, sbb / n - mb * mb, sab / n - ma * mb};
}

}  // namespace

double ssim_global(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim_global: shape mismatch");
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  double acc = 0.0;
  for (int ch = 0; ch < a.channels; ++ch) {
    Moments m = channel_moments(a, b, ch);
    double var_a = std::max(0.0, m.var_a);
    double var_b = std::max(0.0, m.var_b);
    double num = (2 * m.mean_a * m.mean_b + c1) * (2 * m.cov + c2);
    double den = (m.mean_a * m.mean_a + m.mean_b * m.mean_b + c1) * (var_a + var_b + c2);
    acc += num / den;
  }
  return acc / a.channels;
}

double patch_variance(const Image& img) {
  double acc = 0.0;
  const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
  for (int ch = 0; ch < img.channels; ++ch) {
    double s = 0, ss = 0;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        double v = img.at(y, x, ch);
        s += v;
        ss += v * v;
      }
    double m = s / n;
    acc += std::max(0.0, ss / n - m * m);
  }
  return acc / img.channels;
}

double ssim_tiled(const Image& a, const Image& b, int tile) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim_tiled: shape mismatch");
  if (a.height < tile || a.width < tile) return ssim_global(a, b);
  PatchGrid grid = make_patch_grid(a.height, a.width, tile);
  Image ca = center_crop_multiple(a, tile);
  Image cb = center_crop_multiple(b, tile);
  grid = make_patch_grid(ca.height, ca.width, tile);
  double acc = 0.0;
  for (int r = 0; r < grid.n_rows; ++r)
    for (int c = 0; c < grid.n_cols; ++c)
      acc += ssim_global(extract_patch(ca, grid, r, c), extract_patch(cb, grid, r, c));
  return acc / grid.count();
}

Image clamp01(Image img) {
  for (float& v : img.data) v = std::clamp(v, 0.f, 1.f);
  return img;
}

Image flip_horizontal(const Image& img) {
  Image out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

Image flip_vertical(const Image& img) {
  Image out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
  return out;
}

Image pad_replicate(const Image& img, int pad_bottom, int pad_right) {
  if (pad_bottom == 0 && pad_right == 0) return img;
  Image out(img.height + pad_bottom, img.width + pad_right, img.channels, img.colorspace);
  for (int y = 0; y < out.height; ++y) {
    int sy = std::min(y, img.height - 1);
    for (int x = 0; x < out.width; ++x) {
      int sx = std::min(x, img.width - 1);
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

bool all_finite(const Image& img) {
  for (float v : img.data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace selfir

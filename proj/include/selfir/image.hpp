#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace selfir {

enum class ColorSpace { SRGB, LINEAR };
enum class BitOrigin { F32, U8, U16 };

std::string to_string(ColorSpace cs);
ColorSpace colorspace_from_string(const std::string& s);

// Row-major H x W x C float image. Values are in [0,1] after load or
// synthesis; noise targets kept for loss computation may exceed that range
// (they are stored unclamped on purpose).
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  ColorSpace colorspace = ColorSpace::SRGB;
  BitOrigin bit_origin = BitOrigin::F32;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c, ColorSpace cs = ColorSpace::SRGB, float fill = 0.f)
      : height(h), width(w), channels(c), colorspace(cs),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  float& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// Non-overlapping square tiling; images are cropped to a multiple of
// patch_size before splitting.
struct PatchGrid {
  int patch_size = 0;
  int n_rows = 0;
  int n_cols = 0;
  int count() const { return n_rows * n_cols; }
};

// Center crop to the given size.
Image center_crop(const Image& img, int h, int w);
// Center crop so both dimensions become even (sub-sampler precondition).
Image center_crop_even(const Image& img);
// Center crop so both dimensions become multiples of m.
Image center_crop_multiple(const Image& img, int m);

PatchGrid make_patch_grid(int h, int w, int patch_size);
std::vector<Image> split_patches(const Image& img, int patch_size, PatchGrid* grid = nullptr);
Image assemble_patches(const std::vector<Image>& patches, const PatchGrid& grid, int channels);
// View of one grid patch without splitting the whole image.
Image extract_patch(const Image& img, const PatchGrid& grid, int row, int col);

double mse(const Image& a, const Image& b);
// 10*log10(peak^2 / MSE), capped at 99 dB for identical inputs.
double psnr(const Image& a, const Image& b, double peak = 1.0);

// Single-window SSIM over the whole patch: plain means/variances/covariance,
// stabilizers C1=(0.01)^2, C2=(0.03)^2 for L=1, channels averaged.
double ssim_global(const Image& a, const Image& b);

// Per-channel population variance averaged over channels.
double patch_variance(const Image& img);

// Mean SSIM of ssim_global applied over non-overlapping tiles; the
// reporting metric used in eval summaries.
double ssim_tiled(const Image& a, const Image& b, int tile = 16);

// Elementwise helpers used across the pipeline.
Image clamp01(Image img);
Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);
Image crop(const Image& img, int y0, int x0, int h, int w);
// Replicate-pad on the bottom/right edges.
Image pad_replicate(const Image& img, int pad_bottom, int pad_right);
bool all_finite(const Image& img);

}  // namespace selfir

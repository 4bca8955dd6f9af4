#include "selfir/sharp_mask.hpp"

#include <algorithm>
#include <stdexcept>

namespace selfir {

double SharpMask::fill_ratio() const {
  if (values.empty()) return 0.0;
  double s = 0;
  for (auto v : values) s += v;
  return s / values.size();
}

namespace {
void check_pair(const Image& blurry, const Image& reference) {
  if (!blurry.same_shape(reference))
    throw std::invalid_argument("sharp mask: blurry/reference shape mismatch");
}
}  // namespace

std::vector<std::uint8_t> similarity_mask(const Image& blurry, const Image& reference,
                                          const PatchGrid& grid, double eps_s) {
  check_pair(blurry, reference);
  Image b = center_crop_multiple(blurry, grid.patch_size);
  Image r = center_crop_multiple(reference, grid.patch_size);
  std::vector<std::uint8_t> out(grid.count());
  for (int i = 0; i < grid.n_rows; ++i)
    for (int j = 0; j < grid.n_cols; ++j) {
      double s = ssim_global(extract_patch(b, grid, i, j), extract_patch(r, grid, i, j));
      out[static_cast<std::size_t>(i) * grid.n_cols + j] = s > eps_s ? 1 : 0;
    }
  return out;
}

std::vector<std::uint8_t> variance_mask(const Image& blurry, const Image& reference,
                                        const PatchGrid& grid, double eps_v) {
  check_pair(blurry, reference);
  Image b = center_crop_multiple(blurry, grid.patch_size);
  Image r = center_crop_multiple(reference, grid.patch_size);
  std::vector<std::uint8_t> out(grid.count());
  for (int i = 0; i < grid.n_rows; ++i)
    for (int j = 0; j < grid.n_cols; ++j) {
      double vb = patch_variance(extract_patch(b, grid, i, j));
      double vr = patch_variance(extract_patch(r, grid, i, j));
      out[static_cast<std::size_t>(i) * grid.n_cols + j] = (vb - vr) > eps_v ? 1 : 0;
    }
  return out;
}

SharpMask sharp_mask(const Image& blurry, const Image& reference, int patch_size,
                     double eps_s, double eps_v) {
  check_pair(blurry, reference);
  if (patch_size < 2) throw std::invalid_argument("sharp_mask: patch_size must be >= 2");
  if (blurry.height < patch_size || blurry.width < patch_size)
    throw std::invalid_argument("sharp_mask: image smaller than one patch");
  SharpMask m;
  m.patch_size = patch_size;
  m.eps_s = eps_s;
  m.eps_v = eps_v;
  m.grid = make_patch_grid(blurry.height, blurry.width, patch_size);
  std::vector<std::uint8_t> sim = similarity_mask(blurry, reference, m.grid, eps_s);
  std::vector<std::uint8_t> var = variance_mask(blurry, reference, m.grid, eps_v);
  m.values.resize(m.grid.count());
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = sim[i] & var[i];
  return m;
}

SharpMask training_mask(const Image& g1_blur, const Image& restored_nograd, int patch_size,
                        double eps_s, double eps_v) {
  return sharp_mask(g1_blur, restored_nograd, patch_size, eps_s, eps_v);
}

Image box_smooth3(const Image& img) {
  Image out(img.height, img.width, img.channels, img.colorspace);
  auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double s = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            s += img.at(clampi(y + dy, 0, img.height - 1), clampi(x + dx, 0, img.width - 1), c);
        out.at(y, x, c) = static_cast<float>(s / 9.0);
      }
  return out;
}

Image mask_overlay(const Image& base, const SharpMask& mask) {
  Image rgb(base.height, base.width, 3, base.colorspace);
  for (int y = 0; y < base.height; ++y)
    for (int x = 0; x < base.width; ++x)
      for (int c = 0; c < 3; ++c)
        rgb.at(y, x, c) = base.channels == 1 ? base.at(y, x, 0) : base.at(y, x, c);
  const int ps = mask.grid.patch_size;
  const int oy = (base.height - mask.grid.n_rows * ps) / 2;
  const int ox = (base.width - mask.grid.n_cols * ps) / 2;
  for (int i = 0; i < mask.grid.n_rows; ++i)
    for (int j = 0; j < mask.grid.n_cols; ++j) {
      bool sharp = mask.values[static_cast<std::size_t>(i) * mask.grid.n_cols + j] != 0;
      for (int t = 0; t < ps; ++t) {
        int ys[2] = {oy + i * ps, oy + (i + 1) * ps - 1};
        int xs[2] = {ox + j * ps, ox + (j + 1) * ps - 1};
        for (int e = 0; e < 2; ++e) {
          rgb.at(ys[e], ox + j * ps + t, 0) = sharp ? 0.f : 1.f;
          rgb.at(ys[e], ox + j * ps + t, 1) = sharp ? 1.f : 0.f;
          rgb.at(ys[e], ox + j * ps + t, 2) = 0.f;
          rgb.at(oy + i * ps + t, xs[e], 0) = sharp ? 0.f : 1.f;
          rgb.at(oy + i * ps + t, xs[e], 1) = sharp ? 1.f : 0.f;
          rgb.at(oy + i * ps + t, xs[e], 2) = 0.f;
        }
      }
    }
  return rgb;
}

}  // namespace selfir

#pragma once

#include <cstdint>
#include <vector>

#include "selfir/image.hpp"

namespace selfir {

// Binary per-patch decision: 1 marks a patch of the blurry image deemed
// approximately sharp (trustworthy as a direct supervision target), 0
// everything else. Deliberately conservative: both gates must agree, and
// boundary values classify as not-sharp.
struct SharpMask {
  PatchGrid grid;
  int patch_size = 16;
  double eps_s = 0.99;
  double eps_v = 1e-5;
  std::vector<std::uint8_t> values;  // row-major over grid, each 0 or 1

  double fill_ratio() const;
};

// Per-patch structural-similarity gate: 1 iff SSIM(blurry^n, ref^n) > eps_s.
std::vector<std::uint8_t> similarity_mask(const Image& blurry, const Image& reference,
                                          const PatchGrid& grid, double eps_s);

// Per-patch variance gate: 1 iff var(blurry^n) - var(ref^n) > eps_v.
// Screens out over-smooth references that would pass the SSIM gate on
// flat content.
std::vector<std::uint8_t> variance_mask(const Image& blurry, const Image& reference,
                                        const PatchGrid& grid, double eps_v);

// AND of the two gates over a patch_size grid (images center-cropped to a
// multiple of patch_size first).
SharpMask sharp_mask(const Image& blurry, const Image& reference, int patch_size = 16,
                     double eps_s = 0.99, double eps_v = 1e-5);

// Mask used inside training: same computation, applied at sub-sampled
// resolution to g1(blurry) and the frozen restorer output. The caller
// guarantees restored_nograd came from a no-gradient forward pass; the
// mask itself is a constant w.r.t. parameters.
SharpMask training_mask(const Image& g1_blur, const Image& restored_nograd,
                        int patch_size = 16, double eps_s = 0.99, double eps_v = 1e-5);

// 3x3 box smoother with replicate padding; the non-learned stand-in for a
// denoised reference when the mask is evaluated outside training.
Image box_smooth3(const Image& img);

// Visualization for the mask-debug CLI: green borders on sharp patches,
// red on the rest, over the (RGB-expanded) base image.
Image mask_overlay(const Image& base, const SharpMask& mask);

}  // namespace selfir

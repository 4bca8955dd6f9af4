#pragma once

#include <cstdint>
#include <vector>

#include "selfir/image.hpp"

namespace selfir {

// Per-cell choice of two distinct pixels for the neighbor sub-sampler.
// Indices are raster order within the 2x2 cell: 0=TL, 1=TR, 2=BL, 3=BR.
// slot 1 reads `first`, slot 2 reads `second`; both sub-images of one
// plan therefore never share a source pixel.
struct SubsamplePlan {
  int cell_rows = 0;
  int cell_cols = 0;
  std::uint64_t seed = 0;
  bool neighbor_only = false;
  std::vector<std::uint8_t> first;
  std::vector<std::uint8_t> second;

  std::size_t cells() const {
    return static_cast<std::size_t>(cell_rows) * cell_cols;
  }
};

// Draws one plan for an h x w image (both even). Each cell picks an
// unordered pair uniformly from the 6 distinct pairs (4 side-adjacent
// pairs when neighbor_only), then orders it randomly, independently per
// cell. Fully determined by the seed.
SubsamplePlan draw_plan(int h, int w, std::uint64_t seed, bool neighbor_only = false);

// Flat source index (y*w + x) read by `slot` at cell (ci, cj).
inline std::size_t plan_source_index(const SubsamplePlan& plan, int ci, int cj, int slot,
                                     int w) {
  std::uint8_t idx = (slot == 1 ? plan.first : plan.second)[static_cast<std::size_t>(ci) *
                                                                plan.cell_cols +
                                                            cj];
  int y = 2 * ci + (idx >> 1);
  int x = 2 * cj + (idx & 1);
  return static_cast<std::size_t>(y) * w + x;
}

// Half-resolution image whose pixel (i,j) copies the slot's source pixel
// of cell (i,j). Reusing one plan across I_B and I_N keeps the
// sub-images pixel-aligned.
Image apply_plan(const Image& img, const SubsamplePlan& plan, int slot);

// Same gather on a packed channel-major (CHW) float buffer; used on
// network tensors during training.
void apply_plan_chw(const float* src, int channels, int h, int w, const SubsamplePlan& plan,
                    int slot, float* dst);

}  // namespace selfir

#include "selfir/subsample.hpp"

#include <random>
#include <stdexcept>

namespace selfir {

namespace {
// Unordered pairs of distinct cell indices; the first four are the
// side-adjacent ones used when neighbor_only is set.
constexpr std::uint8_t kPairs[6][2] = {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {0, 3}, {1, 2}};
}  // namespace

SubsamplePlan draw_plan(int h, int w, std::uint64_t seed, bool neighbor_only) {
  if (h <= 0 || w <= 0 || h % 2 != 0 || w % 2 != 0)
    throw std::invalid_argument("draw_plan: dimensions must be positive and even");
  SubsamplePlan plan;
  plan.cell_rows = h / 2;
  plan.cell_cols = w / 2;
  plan.seed = seed;
  plan.neighbor_only = neighbor_only;
  plan.first.resize(plan.cells());
  plan.second.resize(plan.cells());

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_pair(0, neighbor_only ? 3 : 5);
  std::uniform_int_distribution<int> pick_order(0, 1);
  for (std::size_t i = 0; i < plan.cells(); ++i) {
    const std::uint8_t* pair = kPairs[pick_pair(rng)];
    int flip = pick_order(rng);
    plan.first[i] = pair[flip];
    plan.second[i] = pair[1 - flip];
  }
  return plan;
}

Image apply_plan(const Image& img, const SubsamplePlan& plan, int slot) {
  if (slot != 1 && slot != 2) throw std::invalid_argument("apply_plan: slot must be 1 or 2");
  if (img.height != 2 * plan.cell_rows || img.width != 2 * plan.cell_cols)
    throw std::invalid_argument("apply_plan: image dims must be twice the plan dims");
  Image out(plan.cell_rows, plan.cell_cols, img.channels, img.colorspace);
  out.bit_origin = img.bit_origin;
  for (int ci = 0; ci < plan.cell_rows; ++ci)
    for (int cj = 0; cj < plan.cell_cols; ++cj) {
      std::size_t src = plan_source_index(plan, ci, cj, slot, img.width);
      for (int c = 0; c < img.channels; ++c)
        out.at(ci, cj, c) = img.data[src * img.channels + c];
    }
  return out;
}

void apply_plan_chw(const float* src, int channels, int h, int w, const SubsamplePlan& plan,
                    int slot, float* dst) {
  if (slot != 1 && slot != 2) throw std::invalid_argument("apply_plan_chw: slot must be 1 or 2");
  if (h != 2 * plan.cell_rows || w != 2 * plan.cell_cols)
    throw std::invalid_argument("apply_plan_chw: dims must be twice the plan dims");
  const std::size_t in_plane = static_cast<std::size_t>(h) * w;
  const std::size_t out_plane = plan.cells();
  for (int c = 0; c < channels; ++c) {
    const float* sp = src + c * in_plane;
    float* dp = dst + c * out_plane;
    for (int ci = 0; ci < plan.cell_rows; ++ci)
      for (int cj = 0; cj < plan.cell_cols; ++cj)
        dp[static_cast<std::size_t>(ci) * plan.cell_cols + cj] =
            sp[plan_source_index(plan, ci, cj, slot, w)];
  }
}

}  // namespace selfir

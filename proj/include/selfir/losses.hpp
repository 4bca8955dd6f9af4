#pragma once

#include <stdexcept>
#include <vector>

#include "selfir/net.hpp"
#include "selfir/sharp_mask.hpp"
#include "selfir/subsample.hpp"
#include "selfir/tensor.hpp"

namespace selfir {

struct LossWeights {
  double lambda_reg = 2.0;
  double lambda_aux = 2.0;  // the raw-like track uses lambda_reg = 4
};

struct LossReport {
  double rec = 0, reg = 0, aux = 0, total = 0;
  double mask_fill_ratio = 0;
};

namespace detail {
template <class T>
void check_same(const Tensor<T>& a, const Tensor<T>& b, const char* who) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(who) + ": shape mismatch");
}

// Copies one sample's sub-image (per the plan and slot) into dst.
template <class T>
void gather_subsample(const Tensor<T>& src, const SubsamplePlan& plan, int slot,
                      Tensor<T>& dst, int i) {
  if (src.h != 2 * plan.cell_rows || src.w != 2 * plan.cell_cols)
    throw std::invalid_argument("gather_subsample: plan dims must be half the input dims");
  const T* sp = src.sample(i);
  T* dp = dst.sample(i);
  for (int c = 0; c < src.c; ++c)
    for (int ci = 0; ci < plan.cell_rows; ++ci)
      for (int cj = 0; cj < plan.cell_cols; ++cj)
        dp[(static_cast<std::size_t>(c) * plan.cell_rows + ci) * plan.cell_cols + cj] =
            sp[static_cast<std::size_t>(c) * src.plane() +
               plan_source_index(plan, ci, cj, slot, src.w)];
}
}  // namespace detail

// Mean squared error over all elements. When grad_pred is given,
// d(loss)/d(pred) scaled by gscale is *added* into it, so several loss
// terms can share one gradient buffer.
template <class T>
double loss_rec(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>* grad_pred = nullptr,
                double gscale = 1.0) {
  detail::check_same(pred, target, "loss_rec");
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  double acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    acc += d * d;
    if (grad_pred) grad_pred->data[i] += static_cast<T>(gscale * 2.0 * d * inv_n);
  }
  return acc * inv_n;
}

// Plain supervised l2: identical arithmetic to loss_rec, named for the
// baseline/equivalence runs where the target is clean or noisy imagery.
template <class T>
double loss_supervised(const Tensor<T>& pred, const Tensor<T>& target,
                       Tensor<T>* grad_pred = nullptr, double gscale = 1.0) {
  return loss_rec(pred, target, grad_pred, gscale);
}

// Residual-consistency regularizer: MSE of
//   (pred - target) - (g1_frozen - g2_frozen).
// The frozen terms come from the no-gradient pass, so the gradient flows
// only through pred.
template <class T>
double loss_reg(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& g1_frozen,
                const Tensor<T>& g2_frozen, Tensor<T>* grad_pred = nullptr,
                double gscale = 1.0) {
  detail::check_same(pred, target, "loss_reg");
  detail::check_same(pred, g1_frozen, "loss_reg");
  detail::check_same(pred, g2_frozen, "loss_reg");
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  double acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = (static_cast<double>(pred.data[i]) - target.data[i]) -
                     (static_cast<double>(g1_frozen.data[i]) - g2_frozen.data[i]);
    acc += r * r;
    if (grad_pred) grad_pred->data[i] += static_cast<T>(gscale * 2.0 * r * inv_n);
  }
  return acc * inv_n;
}

// Masked auxiliary loss: per selected patch, the patch-mean squared error
// between the prediction and the (sub-sampled) blurry image. Default
// reduction divides by the number of selected patches so an all-one mask
// reduces to loss_rec; sum_reduction recovers the literal
// sum-of-squares-per-patch formula.
template <class T>
double loss_aux(const Tensor<T>& pred, const Tensor<T>& g1_blur,
                const std::vector<SharpMask>& masks, bool sum_reduction = false,
                Tensor<T>* grad_pred = nullptr, double gscale = 1.0) {
  detail::check_same(pred, g1_blur, "loss_aux");
  if (static_cast<int>(masks.size()) != pred.n)
    throw std::invalid_argument("loss_aux: one mask per sample required");
  long long selected = 0;
  for (const auto& m : masks)
    for (auto v : m.values) selected += v;

  const auto& grid0 = masks[0].grid;
  if (grid0.n_rows * grid0.patch_size > pred.h || grid0.n_cols * grid0.patch_size > pred.w)
    throw std::invalid_argument("loss_aux: mask grid larger than images");
  const int oy = (pred.h - grid0.n_rows * grid0.patch_size) / 2;
  const int ox = (pred.w - grid0.n_cols * grid0.patch_size) / 2;
  const int ps = grid0.patch_size;
  const double patch_elems = static_cast<double>(ps) * ps * pred.c;

  double acc = 0;
  for (int i = 0; i < pred.n; ++i) {
    const auto& m = masks[i];
    if (m.grid.n_rows != grid0.n_rows || m.grid.n_cols != grid0.n_cols ||
        m.grid.patch_size != ps)
      throw std::invalid_argument("loss_aux: inconsistent mask grids in batch");
    const T* pp = pred.sample(i);
    const T* bp = g1_blur.sample(i);
    T* gp = grad_pred ? grad_pred->sample(i) : nullptr;
    for (int r = 0; r < m.grid.n_rows; ++r)
      for (int c = 0; c < m.grid.n_cols; ++c) {
        if (!m.values[static_cast<std::size_t>(r) * m.grid.n_cols + c]) continue;
        double patch_sq = 0;
        for (int ch = 0; ch < pred.c; ++ch)
          for (int y = oy + r * ps; y < oy + (r + 1) * ps; ++y)
            for (int x = ox + c * ps; x < ox + (c + 1) * ps; ++x) {
              const std::size_t off = (static_cast<std::size_t>(ch) * pred.h + y) * pred.w + x;
              const double d = static_cast<double>(pp[off]) - static_cast<double>(bp[off]);
              patch_sq += d * d;
              if (gp) {
                const double denom =
                    sum_reduction ? 1.0 : patch_elems * static_cast<double>(std::max<long long>(1, selected));
                gp[off] += static_cast<T>(gscale * 2.0 * d / denom);
              }
            }
        acc += sum_reduction ? patch_sq : patch_sq / patch_elems;
      }
  }
  return sum_reduction ? acc : acc / static_cast<double>(std::max<long long>(1, selected));
}

// Single-input counterpart used by the neighbor-supervised denoiser mode:
// pred = net(g1(N)) trained against g2(N), plus the residual-consistency
// regularizer from a frozen full-resolution pass on N. No blurry input,
// no mask.
template <class T>
LossReport neighbor_loss(DualUNet<T>& net, const Tensor<T>& full_noisy,
                         const std::vector<SubsamplePlan>& plans, double lambda_reg,
                         bool do_backward) {
  if (static_cast<int>(plans.size()) != full_noisy.n)
    throw std::invalid_argument("neighbor_loss: one plan per sample required");
  const int hh = full_noisy.h / 2, hw = full_noisy.w / 2;
  Tensor<T> g1n(full_noisy.n, full_noisy.c, hh, hw), g2n = g1n;
  for (int i = 0; i < full_noisy.n; ++i) {
    detail::gather_subsample(full_noisy, plans[i], 1, g1n, i);
    detail::gather_subsample(full_noisy, plans[i], 2, g2n, i);
  }
  typename DualUNet<T>::Cache cache;
  Tensor<T> pred = net.forward(g1n, Tensor<T>(), &cache);
  Tensor<T> frozen_full = net.forward_nograd(full_noisy);
  Tensor<T> g1f = g1n, g2f = g1n;
  for (int i = 0; i < full_noisy.n; ++i) {
    detail::gather_subsample(frozen_full, plans[i], 1, g1f, i);
    detail::gather_subsample(frozen_full, plans[i], 2, g2f, i);
  }
  Tensor<T> grad(pred.n, pred.c, pred.h, pred.w);
  Tensor<T>* gp = do_backward ? &grad : nullptr;
  LossReport rep;
  rep.rec = loss_rec(pred, g2n, gp, 1.0);
  rep.reg = loss_reg(pred, g2n, g1f, g2f, gp, lambda_reg);
  rep.total = rep.rec + lambda_reg * rep.reg;
  if (do_backward) net.backward(cache, grad);
  return rep;
}

// Knobs of the full objective beyond the lambda weights.
struct ObjectiveConfig {
  LossWeights weights;
  int mask_patch = 16;  // at sub-sampled resolution
  double eps_s = 0.99;
  double eps_v = 1e-5;
  bool sum_reduction_aux = false;
  bool neighbor_only = false;  // restrict sub-sampler picks to 4-adjacent
};

// One objective evaluation on a batch of full-resolution (blurry, noisy)
// tensors. Draws nothing itself: the per-sample plans come from the
// caller so a training step and its replay are bit-identical.
//
// Pipeline (per step): sub-sample both inputs with the shared plans;
// pred = net(g1(B), g1(N)); frozen full-resolution pass net^(B, N),
// sub-sampled to both slots for the regularizer; the mask compares g1(B)
// against the frozen copy of pred (the no-gradient pass on (g1(B), g1(N))
// is numerically identical to pred, so its values are reused as
// constants). When do_backward is set, gradients of the weighted total
// are accumulated into the network.
template <class T>
LossReport total_loss(DualUNet<T>& net, const Tensor<T>& full_blur, const Tensor<T>& full_noisy,
                      const std::vector<SubsamplePlan>& plans, const ObjectiveConfig& cfg,
                      bool do_backward) {
  detail::check_same(full_blur, full_noisy, "total_loss");
  if (static_cast<int>(plans.size()) != full_blur.n)
    throw std::invalid_argument("total_loss: one plan per sample required");

  const int hh = full_blur.h / 2, hw = full_blur.w / 2;
  Tensor<T> g1b(full_blur.n, full_blur.c, hh, hw), g1n = g1b, g2n = g1b;
  for (int i = 0; i < full_blur.n; ++i) {
    detail::gather_subsample(full_blur, plans[i], 1, g1b, i);
    detail::gather_subsample(full_noisy, plans[i], 1, g1n, i);
    detail::gather_subsample(full_noisy, plans[i], 2, g2n, i);
  }

  typename DualUNet<T>::Cache cache;
  Tensor<T> pred = net.forward(g1b, g1n, &cache);

  // Frozen full-resolution pass, then both sub-sampled slots (shared plan).
  Tensor<T> frozen_full = net.forward_nograd(full_blur, full_noisy);
  Tensor<T> g1f = g1b, g2f = g1b;
  for (int i = 0; i < full_blur.n; ++i) {
    detail::gather_subsample(frozen_full, plans[i], 1, g1f, i);
    detail::gather_subsample(frozen_full, plans[i], 2, g2f, i);
  }

  // Mask from g1(B) vs the frozen copy of the restored sub-image.
  std::vector<SharpMask> masks;
  masks.reserve(full_blur.n);
  double fill = 0;
  for (int i = 0; i < full_blur.n; ++i) {
    Image b = tensor_to_image(g1b, i, ColorSpace::LINEAR);
    Image r = tensor_to_image(pred, i, ColorSpace::LINEAR);
    masks.push_back(training_mask(b, r, cfg.mask_patch, cfg.eps_s, cfg.eps_v));
    fill += masks.back().fill_ratio();
  }
  fill /= full_blur.n;

  Tensor<T> grad(pred.n, pred.c, pred.h, pred.w);
  Tensor<T>* gp = do_backward ? &grad : nullptr;
  LossReport rep;
  rep.rec = loss_rec(pred, g2n, gp, 1.0);
  rep.reg = loss_reg(pred, g2n, g1f, g2f, gp, cfg.weights.lambda_reg);
  rep.aux = loss_aux(pred, g1b, masks, cfg.sum_reduction_aux, gp, cfg.weights.lambda_aux);
  rep.total = rep.rec + cfg.weights.lambda_reg * rep.reg + cfg.weights.lambda_aux * rep.aux;
  rep.mask_fill_ratio = fill;
  if (do_backward) net.backward(cache, grad);
  return rep;
}

}  // namespace selfir

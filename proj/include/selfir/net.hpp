#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfir/gemm.hpp"
#include "selfir/rng.hpp"
#include "selfir/tensor.hpp"

namespace selfir {

enum class NetVariant { DUAL, SINGLE };

std::string to_string(NetVariant v);
NetVariant net_variant_from_string(const std::string& s);

// Restoration network shape. DUAL is the two-encoder U-Net (blurry +
// noisy branches fused per decoder level); SINGLE drops one encoder for
// the single-input baselines.
struct NetworkConfig {
  int n_levels = 5;
  int base_channels = 48;
  int in_channels = 3;  // per branch
  int out_channels = 3;
  int dec_channels = 0;  // decoder width; 0 means 2 * base_channels
  NetVariant variant = NetVariant::DUAL;
  bool residual = false;  // add the (noisy) input to the prediction

  int decoder_width() const { return dec_channels > 0 ? dec_channels : 2 * base_channels; }
  int n_branches() const { return variant == NetVariant::DUAL ? 2 : 1; }
  int spatial_divisor() const { return 1 << (n_levels - 1); }
  void validate() const {
    if (n_levels < 2) throw std::invalid_argument("n_levels must be >= 2");
    if (base_channels < 1 || in_channels < 1 || out_channels < 1)
      throw std::invalid_argument("channel counts must be positive");
    if (residual && out_channels != in_channels)
      throw std::invalid_argument("residual output needs out_channels == in_channels");
  }
};

nlohmann::json net_config_to_json(const NetworkConfig& cfg);
NetworkConfig net_config_from_json(const nlohmann::json& j);
std::uint64_t net_config_hash(const NetworkConfig& cfg);

constexpr double kLReluSlope = 0.1;

// One 3x3 zero-padded convolution; weights row-major (out_c, in_c*9).
template <class T>
struct ConvParam {
  std::string name;
  int in_c = 0, out_c = 0;
  std::vector<T> w, b;
  std::vector<T> gw, gb;

  std::size_t count() const { return w.size() + b.size(); }
};

namespace netops {

template <class T>
void im2col3(const T* x, int c_in, int h, int w, T* col) {
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
        const int dy = ky - 1, dx = kx - 1;
        for (int y = 0; y < h; ++y) {
          T* drow = dst + static_cast<std::size_t>(y) * w;
          const int sy = y + dy;
          if (sy < 0 || sy >= h) {
            std::fill(drow, drow + w, T(0));
            continue;
          }
          const T* srow = x + (static_cast<std::size_t>(c) * h + sy) * w;
          if (dx == 0) {
            std::copy(srow, srow + w, drow);
          } else if (dx == 1) {
            std::copy(srow + 1, srow + w, drow);
            drow[w - 1] = T(0);
          } else {
            drow[0] = T(0);
            std::copy(srow, srow + w - 1, drow + 1);
          }
        }
      }
}

template <class T>
void col2im3(const T* col, int c_in, int h, int w, T* gx) {
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
        const int dy = ky - 1, dx = kx - 1;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          T* grow = gx + (static_cast<std::size_t>(c) * h + sy) * w;
          const T* srow = src + static_cast<std::size_t>(y) * w;
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          for (int xx = x0; xx < x1; ++xx) grow[xx + dx] += srow[xx];
        }
      }
}

template <class T>
Tensor<T> conv3x3_fwd(const ConvParam<T>& p, const Tensor<T>& x, std::vector<T>& col) {
  if (x.c != p.in_c) throw std::invalid_argument("conv " + p.name + ": channel mismatch");
  Tensor<T> out(x.n, p.out_c, x.h, x.w);
  const int hw = x.h * x.w;
  const int k = p.in_c * 9;
  col.resize(static_cast<std::size_t>(k) * hw);
  for (int i = 0; i < x.n; ++i) {
    im2col3(x.sample(i), x.c, x.h, x.w, col.data());
    gemm(false, false, p.out_c, hw, k, T(1), p.w.data(), k, col.data(), hw, T(0),
         out.sample(i), hw);
    T* o = out.sample(i);
    for (int oc = 0; oc < p.out_c; ++oc) {
      const T bb = p.b[oc];
      T* row = o + static_cast<std::size_t>(oc) * hw;
      for (int j = 0; j < hw; ++j) row[j] += bb;
    }
  }
  return out;
}

// Accumulates weight/bias gradients; writes input gradient when gin is
// given (the column matrix is recomputed rather than cached).
template <class T>
void conv3x3_bwd(ConvParam<T>& p, const Tensor<T>& x, const Tensor<T>& gout, Tensor<T>* gin,
                 std::vector<T>& col, std::vector<T>& gcol) {
  const int hw = x.h * x.w;
  const int k = p.in_c * 9;
  col.resize(static_cast<std::size_t>(k) * hw);
  if (gin) gcol.resize(static_cast<std::size_t>(k) * hw);
  for (int i = 0; i < x.n; ++i) {
    im2col3(x.sample(i), x.c, x.h, x.w, col.data());
    gemm(false, true, p.out_c, k, hw, T(1), gout.sample(i), hw, col.data(), hw, T(1),
         p.gw.data(), k);
    const T* go = gout.sample(i);
    for (int oc = 0; oc < p.out_c; ++oc) {
      T s = T(0);
      const T* row = go + static_cast<std::size_t>(oc) * hw;
      for (int j = 0; j < hw; ++j) s += row[j];
      p.gb[oc] += s;
    }
    if (gin) {
      gemm(true, false, k, hw, p.out_c, T(1), p.w.data(), k, gout.sample(i), hw, T(0),
           gcol.data(), hw);
      col2im3(gcol.data(), p.in_c, x.h, x.w, gin->sample(i));
    }
  }
}

template <class T>
void lrelu_fwd(Tensor<T>& x) {
  for (auto& v : x.data)
    if (v < T(0)) v *= T(kLReluSlope);
}

template <class T>
void lrelu_bwd(const Tensor<T>& pre, Tensor<T>& g) {
  for (std::size_t i = 0; i < g.data.size(); ++i)
    if (pre.data[i] < T(0)) g.data[i] *= T(kLReluSlope);
}

template <class T>
Tensor<T> maxpool2_fwd(const Tensor<T>& x, std::vector<std::int64_t>* idx) {
  Tensor<T> out(x.n, x.c, x.h / 2, x.w / 2);
  if (idx) idx->assign(out.size(), 0);
  std::size_t o = 0;
  for (int i = 0; i < x.n; ++i)
    for (int c = 0; c < x.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(i) * x.c + c) * x.plane();
      for (int y = 0; y < out.h; ++y)
        for (int xx = 0; xx < out.w; ++xx, ++o) {
          std::size_t p00 = base + (2 * y) * static_cast<std::size_t>(x.w) + 2 * xx;
          std::size_t cand[4] = {p00, p00 + 1, p00 + x.w, p00 + x.w + 1};
          std::size_t best = cand[0];
          for (int t = 1; t < 4; ++t)
            if (x.data[cand[t]] > x.data[best]) best = cand[t];
          out.data[o] = x.data[best];
          if (idx) (*idx)[o] = static_cast<std::int64_t>(best);
        }
    }
  return out;
}

template <class T>
void maxpool2_bwd(const std::vector<std::int64_t>& idx, const Tensor<T>& gout, Tensor<T>& gin) {
  for (std::size_t i = 0; i < gout.size(); ++i) gin.data[idx[i]] += gout.data[i];
}

template <class T>
Tensor<T> upsample2_fwd(const Tensor<T>& x) {
  Tensor<T> out(x.n, x.c, x.h * 2, x.w * 2);
  for (int i = 0; i < x.n; ++i)
    for (int c = 0; c < x.c; ++c) {
      const T* sp = x.sample(i) + static_cast<std::size_t>(c) * x.plane();
      T* dp = out.sample(i) + static_cast<std::size_t>(c) * out.plane();
      for (int y = 0; y < out.h; ++y)
        for (int xx = 0; xx < out.w; ++xx)
          dp[static_cast<std::size_t>(y) * out.w + xx] =
              sp[static_cast<std::size_t>(y / 2) * x.w + xx / 2];
    }
  return out;
}

template <class T>
Tensor<T> upsample2_bwd(const Tensor<T>& g) {
  Tensor<T> gin(g.n, g.c, g.h / 2, g.w / 2);
  for (int i = 0; i < g.n; ++i)
    for (int c = 0; c < g.c; ++c) {
      const T* sp = g.sample(i) + static_cast<std::size_t>(c) * g.plane();
      T* dp = gin.sample(i) + static_cast<std::size_t>(c) * gin.plane();
      for (int y = 0; y < g.h; ++y)
        for (int xx = 0; xx < g.w; ++xx)
          dp[static_cast<std::size_t>(y / 2) * gin.w + xx / 2] +=
              sp[static_cast<std::size_t>(y) * g.w + xx];
    }
  return gin;
}

template <class T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& xs) {
  int c_total = 0;
  for (const auto* x : xs) c_total += x->c;
  Tensor<T> out(xs[0]->n, c_total, xs[0]->h, xs[0]->w);
  for (int i = 0; i < out.n; ++i) {
    T* dst = out.sample(i);
    for (const auto* x : xs) {
      const std::size_t bytes = x->sample_stride();
      std::copy(x->sample(i), x->sample(i) + bytes, dst);
      dst += bytes;
    }
  }
  return out;
}

template <class T>
void split_channels(const Tensor<T>& g, const std::vector<Tensor<T>*>& outs) {
  for (int i = 0; i < g.n; ++i) {
    const T* src = g.sample(i);
    for (auto* o : outs) {
      const std::size_t count = o->sample_stride();
      std::copy(src, src + count, o->sample(i));
      src += count;
    }
  }
}

}  // namespace netops

// Dual-encoder U-Net with per-level skip fusion in a shared decoder.
// Templated on the scalar so gradient oracles can run the identical
// topology in double precision. forward() with a null cache is the
// stop-gradient path: same arithmetic, nothing retained, so no gradient
// can flow back through it.
template <class T>
class DualUNet {
 public:
  struct Cache {
    std::vector<Tensor<T>> conv_in;   // input of each conv, by param index
    std::vector<Tensor<T>> act_pre;   // pre-activation of each conv with LeakyReLU
    std::vector<std::vector<std::int64_t>> pool_idx;  // [branch * (L-1) + level]
  };

  explicit DualUNet(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    build();
  }

  const NetworkConfig& config() const { return cfg_; }
  std::vector<ConvParam<T>>& params() { return params_; }
  const std::vector<ConvParam<T>>& params() const { return params_; }

  std::size_t param_count() const {
    std::size_t s = 0;
    for (const auto& p : params_) s += p.count();
    return s;
  }

  void zero_grad() {
    for (auto& p : params_) {
      std::fill(p.gw.begin(), p.gw.end(), T(0));
      std::fill(p.gb.begin(), p.gb.end(), T(0));
    }
  }

  // Kaiming-normal weights for the LeakyReLU gain, zero biases. Each
  // parameter gets its own derived stream, so init order is irrelevant.
  void init(std::uint64_t seed) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      std::mt19937_64 rng = make_rng(seed, Stream::Init, i);
      const double fan_in = p.in_c * 9;
      const double std = std::sqrt(2.0 / ((1.0 + kLReluSlope * kLReluSlope) * fan_in));
      std::normal_distribution<double> dist(0.0, std);
      for (auto& v : p.w) v = static_cast<T>(dist(rng));
      std::fill(p.b.begin(), p.b.end(), T(0));
    }
  }

  // a = blurry input (or the sole input for SINGLE); b = noisy input,
  // which must be an empty tensor for SINGLE. Passing cache = nullptr is
  // the frozen-parameters evaluation: numerically identical output,
  // nothing saved for backward.
  Tensor<T> forward(const Tensor<T>& a, const Tensor<T>& b, Cache* cache = nullptr) const {
    const int L = cfg_.n_levels;
    const int nb = cfg_.n_branches();
    check_inputs(a, b);
    const Tensor<T>* inputs[2] = {&a, &b};

    if (cache) {
      cache->conv_in.assign(params_.size(), Tensor<T>());
      cache->act_pre.assign(params_.size(), Tensor<T>());
      cache->pool_idx.assign(static_cast<std::size_t>(nb) * (L - 1), {});
    }
    std::vector<T> col;
    auto run_conv = [&](int pidx, Tensor<T>&& in, bool act) {
      Tensor<T> out = netops::conv3x3_fwd(params_[pidx], in, col);
      if (cache) {
        cache->conv_in[pidx] = std::move(in);
        if (act) cache->act_pre[pidx] = out;
      }
      if (act) netops::lrelu_fwd(out);
      return out;
    };

    std::vector<std::vector<Tensor<T>>> skips(nb, std::vector<Tensor<T>>(L));
    for (int br = 0; br < nb; ++br) {
      Tensor<T> x = *inputs[br];
      for (int l = 0; l < L; ++l) {
        x = run_conv(enc_idx(br, l, 0), std::move(x), true);
        x = run_conv(enc_idx(br, l, 1), std::move(x), true);
        skips[br][l] = std::move(x);
        if (l < L - 1) {
          auto* idx = cache ? &cache->pool_idx[static_cast<std::size_t>(br) * (L - 1) + l]
                            : nullptr;
          x = netops::maxpool2_fwd(skips[br][l], idx);
        }
      }
    }

    Tensor<T> d = nb == 2 ? netops::concat_channels<T>({&skips[0][L - 1], &skips[1][L - 1]})
                          : skips[0][L - 1];
    for (int j = 0; j < L - 1; ++j) {
      const int l = L - 2 - j;
      d = netops::upsample2_fwd(d);
      d = nb == 2 ? netops::concat_channels<T>({&d, &skips[0][l], &skips[1][l]})
                  : netops::concat_channels<T>({&d, &skips[0][l]});
      d = run_conv(dec_idx(j, 0), std::move(d), true);
      d = run_conv(dec_idx(j, 1), std::move(d), true);
    }
    Tensor<T> out = run_conv(head_idx(), std::move(d), false);
    if (cfg_.residual) {
      const Tensor<T>& base = nb == 2 ? b : a;
      for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += base.data[i];
    }
    return out;
  }

  Tensor<T> forward_nograd(const Tensor<T>& a, const Tensor<T>& b = Tensor<T>()) const {
    return forward(a, b, nullptr);
  }

  // Accumulates parameter gradients for d(scalar)/d(params) given
  // d(scalar)/d(output). Input gradients are not propagated past the
  // first convolutions (nothing upstream needs them).
  void backward(const Cache& cache, const Tensor<T>& grad_out) {
    const int L = cfg_.n_levels;
    const int nb = cfg_.n_branches();
    const int B = cfg_.base_channels;
    std::vector<T> col, gcol;

    auto conv_back = [&](int pidx, Tensor<T>&& g, bool want_gin) {
      const Tensor<T>& in = cache.conv_in[pidx];
      Tensor<T> gin;
      if (want_gin) gin = Tensor<T>(in.n, in.c, in.h, in.w);
      netops::conv3x3_bwd(params_[pidx], in, g, want_gin ? &gin : nullptr, col, gcol);
      return gin;
    };

    // Head (linear). The residual add, when present, is an identity
    // branch to the input, so grad_out passes through unchanged.
    Tensor<T> g = conv_back(head_idx(), Tensor<T>(grad_out), true);

    std::vector<std::vector<Tensor<T>>> skip_grad(nb, std::vector<Tensor<T>>(L));
    for (int j = L - 2; j >= 0; --j) {
      const int l = L - 2 - j;
      netops::lrelu_bwd(cache.act_pre[dec_idx(j, 1)], g);
      g = conv_back(dec_idx(j, 1), std::move(g), true);
      netops::lrelu_bwd(cache.act_pre[dec_idx(j, 0)], g);
      g = conv_back(dec_idx(j, 0), std::move(g), true);

      Tensor<T> gup(g.n, g.c - nb * B, g.h, g.w);
      std::vector<Tensor<T>*> parts{&gup};
      for (int br = 0; br < nb; ++br) {
        skip_grad[br][l] = Tensor<T>(g.n, B, g.h, g.w);
        parts.push_back(&skip_grad[br][l]);
      }
      netops::split_channels(g, parts);
      g = netops::upsample2_bwd(gup);
    }

    // g is now the gradient at the decoder bottom.
    if (nb == 2) {
      skip_grad[0][L - 1] = Tensor<T>(g.n, B, g.h, g.w);
      skip_grad[1][L - 1] = Tensor<T>(g.n, B, g.h, g.w);
      netops::split_channels(g, {&skip_grad[0][L - 1], &skip_grad[1][L - 1]});
    } else {
      skip_grad[0][L - 1] = std::move(g);
    }

    for (int br = 0; br < nb; ++br) {
      Tensor<T> gx;  // grad at the pooled output feeding the next-deeper level
      for (int l = L - 1; l >= 0; --l) {
        Tensor<T> gs = std::move(skip_grad[br][l]);
        if (l < L - 1)
          netops::maxpool2_bwd(cache.pool_idx[static_cast<std::size_t>(br) * (L - 1) + l],
                               gx, gs);
        netops::lrelu_bwd(cache.act_pre[enc_idx(br, l, 1)], gs);
        gs = conv_back(enc_idx(br, l, 1), std::move(gs), true);
        netops::lrelu_bwd(cache.act_pre[enc_idx(br, l, 0)], gs);
        gx = conv_back(enc_idx(br, l, 0), std::move(gs), l > 0);
      }
    }
  }

  template <class U>
  DualUNet<U> cast() const {
    DualUNet<U> out(cfg_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      for (std::size_t j = 0; j < params_[i].w.size(); ++j)
        out.params()[i].w[j] = static_cast<U>(params_[i].w[j]);
      for (std::size_t j = 0; j < params_[i].b.size(); ++j)
        out.params()[i].b[j] = static_cast<U>(params_[i].b[j]);
    }
    return out;
  }

 private:
  int enc_idx(int br, int l, int k) const { return (br * cfg_.n_levels + l) * 2 + k; }
  int dec_idx(int j, int k) const {
    return cfg_.n_branches() * cfg_.n_levels * 2 + j * 2 + k;
  }
  int head_idx() const { return static_cast<int>(params_.size()) - 1; }

  void check_inputs(const Tensor<T>& a, const Tensor<T>& b) const {
    if (cfg_.variant == NetVariant::SINGLE) {
      if (!b.empty())
        throw std::invalid_argument("single-input network takes exactly one input");
    } else {
      if (!a.same_shape(b))
        throw std::invalid_argument("dual network inputs must have identical shape");
    }
    if (a.c != cfg_.in_channels) throw std::invalid_argument("input channels mismatch");
    const int div = cfg_.spatial_divisor();
    if (a.h % div != 0 || a.w % div != 0 || a.h == 0 || a.w == 0)
      throw std::invalid_argument("input spatial dims must be divisible by " +
                                  std::to_string(div));
  }

  void add_conv(const std::string& name, int in_c, int out_c) {
    ConvParam<T> p;
    p.name = name;
    p.in_c = in_c;
    p.out_c = out_c;
    p.w.assign(static_cast<std::size_t>(out_c) * in_c * 9, T(0));
    p.b.assign(out_c, T(0));
    p.gw.assign(p.w.size(), T(0));
    p.gb.assign(p.b.size(), T(0));
    params_.push_back(std::move(p));
  }

  void build() {
    const int L = cfg_.n_levels;
    const int B = cfg_.base_channels;
    const int nb = cfg_.n_branches();
    const int dw = cfg_.decoder_width();
    for (int br = 0; br < nb; ++br)
      for (int l = 0; l < L; ++l) {
        const std::string stem = "enc" + std::to_string(br) + ".l" + std::to_string(l);
        add_conv(stem + ".c0", l == 0 ? cfg_.in_channels : B, B);
        add_conv(stem + ".c1", B, B);
      }
    for (int j = 0; j < L - 1; ++j) {
      const int l = L - 2 - j;
      const int up_c = j == 0 ? nb * B : dw;
      const std::string stem = "dec.l" + std::to_string(l);
      add_conv(stem + ".c0", up_c + nb * B, dw);
      add_conv(stem + ".c1", dw, dw);
    }
    add_conv("head", dw, cfg_.out_channels);
  }

  NetworkConfig cfg_;
  std::vector<ConvParam<T>> params_;
};

}  // namespace selfir

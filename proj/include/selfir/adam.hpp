#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "selfir/net.hpp"

namespace selfir {

// Adam with bias correction. Moment buffers mirror the network's
// parameter list; t counts completed steps and is part of checkpoints.
template <class T>
struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long long t = 0;
  std::vector<std::vector<T>> mw, vw, mb, vb;

  void init(const DualUNet<T>& net) {
    const auto& ps = net.params();
    mw.resize(ps.size());
    vw.resize(ps.size());
    mb.resize(ps.size());
    vb.resize(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
      mw[i].assign(ps[i].w.size(), T(0));
      vw[i].assign(ps[i].w.size(), T(0));
      mb[i].assign(ps[i].b.size(), T(0));
      vb[i].assign(ps[i].b.size(), T(0));
    }
    t = 0;
  }

  void step(DualUNet<T>& net, double lr) {
    auto& ps = net.params();
    if (mw.size() != ps.size()) throw std::runtime_error("Adam: not initialized for this net");
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    auto update = [&](std::vector<T>& p, const std::vector<T>& g, std::vector<T>& m,
                      std::vector<T>& v) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i];
        const double mi = beta1 * m[i] + (1.0 - beta1) * gi;
        const double vi = beta2 * v[i] + (1.0 - beta2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        p[i] -= static_cast<T>(lr * (mi / c1) / (std::sqrt(vi / c2) + eps));
      }
    };
    for (std::size_t i = 0; i < ps.size(); ++i) {
      update(ps[i].w, ps[i].gw, mw[i], vw[i]);
      update(ps[i].b, ps[i].gb, mb[i], vb[i]);
    }
  }
};

}  // namespace selfir

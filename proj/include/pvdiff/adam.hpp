#pragma once

#include <cmath>
#include <vector>

#include "pvdiff/tensor.hpp"

namespace pvdiff {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 1.0;  // global L2 norm; <= 0 disables
};

/// Adaptive-moment optimizer over a ParamSet.
template <typename S>
class Adam {
 public:
  Adam(const ParamSet<S>& like, AdamOptions opt) : opt_(opt), m_(like.zeros_like()), v_(like.zeros_like()) {}

  long steps() const { return step_; }
  double learning_rate() const { return opt_.learning_rate; }
  void set_learning_rate(double lr) { opt_.learning_rate = lr; }

  /// Applies one update and returns the pre-clipping gradient norm.
  double step(ParamSet<S>& params, const ParamSet<S>& grads) {
    double sq = 0.0;
    for (std::size_t i = 0; i < grads.size(); ++i) {
      for (S g : grads[i].data) sq += static_cast<double>(g) * g;
    }
    const double norm = std::sqrt(sq);
    const double scale = (opt_.grad_clip > 0.0 && norm > opt_.grad_clip) ? opt_.grad_clip / norm : 1.0;
    ++step_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i].data;
      auto& m = m_[i].data;
      auto& v = v_[i].data;
      const auto& g = grads[i].data;
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double gk = g[k] * scale;
        m[k] = static_cast<S>(opt_.beta1 * m[k] + (1.0 - opt_.beta1) * gk);
        v[k] = static_cast<S>(opt_.beta2 * v[k] + (1.0 - opt_.beta2) * gk * gk);
        const double mh = m[k] / c1;
        const double vh = v[k] / c2;
        p[k] = static_cast<S>(p[k] - opt_.learning_rate * mh / (std::sqrt(vh) + opt_.epsilon));
      }
    }
    return norm;
  }

 private:
  AdamOptions opt_;
  ParamSet<S> m_;
  ParamSet<S> v_;
  long step_ = 0;
};

}  // namespace pvdiff

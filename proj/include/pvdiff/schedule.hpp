#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pvdiff/error.hpp"

namespace pvdiff {

/// Per-step coefficients of the forward and reverse processes at step t.
struct StepCoefficients {
  double sqrt_ab;          // sqrt(alpha_bar_t)
  double sqrt_1mab;        // sqrt(1 - alpha_bar_t)
  double alpha;            // alpha_t
  double beta;             // beta_t
  double posterior_sigma;  // sqrt(beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t))
};

/// Discrete diffusion time axis. Steps are 1-indexed; alpha_bar_0 is 1.
/// Immutable after construction.
class NoiseSchedule {
 public:
  NoiseSchedule(int steps, double beta_start, double beta_end)
      : beta_start_(beta_start), beta_end_(beta_end) {
    if (steps < 1) throw ConfigError("noise schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end) {
      throw ConfigError("noise schedule: require 0 < beta_start <= beta_end < 1");
    }
    betas_.resize(steps);
    alphas_.resize(steps);
    alpha_bars_.resize(steps);
    double acc = 1.0;
    for (int i = 0; i < steps; ++i) {
      const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
      betas_[i] = beta_start + (beta_end - beta_start) * frac;
      alphas_[i] = 1.0 - betas_[i];
      acc *= alphas_[i];
      alpha_bars_[i] = acc;
    }
  }

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }

  // Accessors take the 1-indexed step.
  double beta(int t) const { return betas_[index(t)]; }
  double alpha(int t) const { return alphas_[index(t)]; }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars_[index(t)]; }

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

  StepCoefficients coefficients_at(int t) const {
    const std::size_t i = index(t);
    const double ab = alpha_bars_[i];
    const double ab_prev = alpha_bar(t - 1);
    return StepCoefficients{std::sqrt(ab), std::sqrt(1.0 - ab), alphas_[i], betas_[i],
                            std::sqrt(betas_[i] * (1.0 - ab_prev) / (1.0 - ab))};
  }

 private:
  std::size_t index(int t) const {
    if (t < 1 || t > steps()) {
      throw ConfigError("noise schedule: step " + std::to_string(t) + " outside [1, " +
                        std::to_string(steps()) + "]");
    }
    return static_cast<std::size_t>(t - 1);
  }

  double beta_start_;
  double beta_end_;
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
};

inline NoiseSchedule make_linear_schedule(int steps, double beta_start, double beta_end) {
  return NoiseSchedule(steps, beta_start, beta_end);
}

}  // namespace pvdiff

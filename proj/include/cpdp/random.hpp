#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>

#include "cpdp/types.hpp"

namespace cpdp {

inline double draw_normal(double mean, double var, Rng& rng) {
  return std::normal_distribution<double>(mean, std::sqrt(var))(rng);
}

/// Inverse-Gamma draw with the given shape and scale (mean scale/(shape-1)).
inline double draw_inverse_gamma(double shape, double scale, Rng& rng) {
  const double g = std::gamma_distribution<double>(shape, 1.0)(rng);
  return scale / std::max(g, std::numeric_limits<double>::min());
}

inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// Index drawn with probability proportional to exp(log_weights[k]).
inline std::size_t draw_log_categorical(std::span<const double> log_weights, Rng& rng) {
  const double m = *std::max_element(log_weights.begin(), log_weights.end());
  double total = 0.0;
  for (double w : log_weights) total += std::exp(w - m);
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    u -= std::exp(log_weights[k] - m);
    if (u < 0.0) return k;
  }
  return log_weights.size() - 1;
}

inline double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * 3.14159265358979323846 * var) - 0.5 * d * d / var;
}

}  // namespace cpdp

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "cpdp/rjmcmc.hpp"
#include "cpdp/types.hpp"

namespace cpdp {

/// Label-free sampler: the same moves with every segment pinned to its own class.
std::vector<ChainSample> run_chain_nolabel(const TimeSeries& x, const Hyperparams& hyper,
                                           SamplerSettings settings);
DetectionResult run_mcmc_nolabel(const TimeSeries& x, const Hyperparams& hyper,
                                 const SamplerSettings& settings);

/// Exact penalised least-squares mean-change segmentation by PELT.
///
/// Minimises sum of segment costs C(s,t) = sum x^2 - (sum x)^2/(t-s) plus
/// penalty per change point, with every segment at least min_seg_len long.
/// Returns one-based change points (last index of each left segment).
std::vector<int> pelt_mean(std::span<const double> x, double penalty, int min_seg_len = 2);

/// Robust noise standard deviation from first differences (MAD / (sqrt(2) * 0.6745)).
double estimate_noise_sd(std::span<const double> x);

/// PELT on the series scaled by its estimated noise level, so the penalty is
/// in units of the noise variance.
std::vector<int> pelt_profiled(std::span<const double> x, double penalty, int min_seg_len = 2);

struct Calibration {
  double value = 0.0;      // calibrated threshold or penalty
  double fp = 0.0;         // false-positive proportion at value
  int evaluations = 0;
  bool converged = false;  // |fp - target| <= tolerance
  int monotonicity_violations = 0;
};

/// Bisection for a parameter whose false-positive proportion does not increase
/// with the parameter. Stops once within tolerance of the target or after
/// max_iter bisection steps, returning the closest value seen.
Calibration calibrate_parameter(const std::function<double(double)>& fp_at, double lo, double hi,
                                double target_fp, bool log_scale, int max_iter = 30,
                                double tolerance = 0.01);

}  // namespace cpdp

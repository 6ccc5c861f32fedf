#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cpdp/baselines.hpp"
#include "cpdp/rjmcmc.hpp"
#include "cpdp/types.hpp"

namespace cpdp {

enum class Scenario { random_mean, repeating_mean };

std::string scenario_name(Scenario s);     // "random" / "repeating"
std::string scenario_caption(Scenario s);  // table caption
Scenario parse_scenario(const std::string& name);

struct ScenarioConfig {
  Scenario scenario = Scenario::random_mean;
  int min_seg_len = 20;
  int max_seg_len = 70;
  int min_changes = 5;
  int max_changes = 9;
  double noise_sd = 2.0;
  int class_count = 3;  // repeating scenario only
  double class_mean_sd = 5.0;
  double min_class_separation = 4.0;
  int realizations = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

struct GroundTruth {
  std::vector<int> change_points;   // one-based, last index of each left segment
  std::vector<double> segment_means;
  std::vector<int> labels;          // repeating scenario; empty otherwise
};

/// Segment means drawn independently with a minimum gap between neighbours.
std::pair<TimeSeries, GroundTruth> gen_scenario_random(const ScenarioConfig& cfg, Rng& rng);

/// Segment means drawn from a few well-separated classes, never repeating the
/// previous segment's class.
std::pair<TimeSeries, GroundTruth> gen_scenario_repeating(const ScenarioConfig& cfg, Rng& rng);

std::pair<TimeSeries, GroundTruth> gen_scenario(const ScenarioConfig& cfg, Rng& rng);

struct Matching {
  std::vector<std::pair<int, int>> pairs;  // (truth, detected)
  std::vector<int> missed;                 // unmatched truths
  std::vector<int> false_alarms;           // unmatched detections
};

/// Greedy one-to-one matching in increasing distance; ties go to the earlier
/// truth, then the earlier detection. Pairs further apart than window never match.
Matching match_changepoints(const std::vector<int>& truth, const std::vector<int>& detected,
                            int window);

struct MethodMetrics {
  std::string method;
  double tp_proportion = 0.0;
  double fp_proportion = 0.0;          // false alarms / true change points
  double fp_per_detection = 0.0;       // false alarms / detections
  double mean_abs_location_error = 0.0;
  double tp_se = 0.0;
  double fp_se = 0.0;
  double error_se = 0.0;
  long truths = 0;
  long detections = 0;
  long matched = 0;
  double parameter = 0.0;  // calibrated threshold or penalty
};

/// Pooled metrics over realizations with ratio-estimator standard errors.
MethodMetrics compute_metrics(const std::vector<Matching>& matchings);

enum class Method { proposed, mcmc, pelt };
std::string method_name(Method m);

struct HarnessSettings {
  std::vector<Method> methods{Method::proposed, Method::mcmc, Method::pelt};
  int match_window = 5;
  double target_fp = 0.059;
  int calibration_realizations = 20;
  std::uint64_t calibration_seed_offset = 1000003;
  SamplerSettings sampler;
  /// Hyperparameters for the proposed sampler; k_max is capped per series.
  Hyperparams hyper;
  /// Hyperparameters for the label-free sampler (no partition prior).
  Hyperparams nolabel_hyper;
  int pelt_min_seg_len = 2;
  int jobs = 1;

  HarnessSettings();
};

/// Per-realization outcome for one method.
struct RealizationResult {
  std::size_t index = 0;
  std::vector<int> truth;
  std::vector<int> detected;
  Matching matching;
};

struct BenchmarkTable {
  std::string caption;
  ScenarioConfig config;
  std::vector<MethodMetrics> rows;
  std::vector<std::vector<RealizationResult>> raw;  // per method, per realization
};

/// Per-realization change-point scores for methods that detect by thresholding.
struct ScoredSeries {
  std::vector<double> pooled;
  std::vector<double> marginal;
};

/// Runs a sampler-based method on one series and returns its scores.
ScoredSeries score_series(Method m, const TimeSeries& x, const HarnessSettings& h,
                          std::uint64_t seed);

/// Penalty for PELT whose false-positive proportion on held-out realizations is
/// closest to target_fp.
Calibration calibrate_penalty(const ScenarioConfig& cfg, double target_fp,
                              const HarnessSettings& h);

/// Generates cfg.realizations series, calibrates and runs every method, and
/// aggregates matched metrics. Deterministic given cfg.seed.
BenchmarkTable run_benchmark(const ScenarioConfig& cfg, const HarnessSettings& h);

/// Plain-text table: the caption, then one row per method.
std::string format_table(const BenchmarkTable& table);

}  // namespace cpdp

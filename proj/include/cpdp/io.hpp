#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpdp/bench.hpp"
#include "cpdp/rjmcmc.hpp"
#include "cpdp/types.hpp"

namespace cpdp {

/// Input/format problem; the message names the offending line where there is one.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One value per line, or "index,value" per line using the second column. A
/// single non-numeric header line is skipped; blank lines are ignored.
TimeSeries parse_series_text(const std::string& text, const std::string& source = "<input>");
TimeSeries parse_series_csv(const std::filesystem::path& path);

std::string format_series_csv(const TimeSeries& x);

/// Everything that determines a `detect` run.
struct DetectConfig {
  Hyperparams hyper;
  SamplerSettings sampler;
  std::string baseline;  // "" (proposed), "mcmc" or "pelt"
  double penalty = 0.0;  // pelt only; 0 means 2 sigma^2 log N with sigma estimated
  int min_seg_len = 2;   // pelt only

  /// Hyperparameters actually used for a series of length n.
  Hyperparams resolved_hyper(std::size_t n) const;
};

/// Everything that determines a `bench` run.
struct BenchConfig {
  ScenarioConfig scenario;
  HarnessSettings harness;
};

/// Flat key=value settings; '#' starts a comment.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(const std::string& text, const std::string& source = "<config>");
KeyValues read_key_values(const std::filesystem::path& path);

/// Applies settings; an unknown key raises ValidationError listing the valid keys.
void apply_detect_config(DetectConfig& cfg, const KeyValues& kv);
void apply_bench_config(BenchConfig& cfg, const KeyValues& kv);
std::vector<std::string> detect_config_keys();
std::vector<std::string> bench_config_keys();

/// Result document with the resolved settings and seed embedded.
std::string result_to_json(const DetectionResult& r, const DetectConfig& cfg, std::size_t n);
DetectionResult result_from_json(const std::string& text);

std::string table_to_csv(const BenchmarkTable& t);
std::string table_to_json(const BenchmarkTable& t, const HarnessSettings& h);
std::string raw_results_csv(const BenchmarkTable& t);

}  // namespace cpdp

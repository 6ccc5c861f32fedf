#include "cpdp/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

namespace cpdp {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr int kMaxRedraws = 100000;

// Lengths and change points for one realization.
std::pair<std::vector<int>, std::vector<int>> draw_layout(const ScenarioConfig& cfg, Rng& rng) {
  const int k = std::uniform_int_distribution<int>(cfg.min_changes, cfg.max_changes)(rng);
  std::uniform_int_distribution<int> len(cfg.min_seg_len, cfg.max_seg_len);
  std::vector<int> lengths(static_cast<std::size_t>(k) + 1);
  for (int& l : lengths) l = len(rng);
  std::vector<int> cps;
  int pos = 0;
  for (std::size_t i = 0; i + 1 < lengths.size(); ++i) {
    pos += lengths[i];
    cps.push_back(pos);
  }
  return {lengths, cps};
}

TimeSeries add_noise(const std::vector<int>& lengths, const std::vector<double>& means,
                     double sd, Rng& rng) {
  std::normal_distribution<double> noise(0.0, sd);
  std::vector<double> x;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    for (int t = 0; t < lengths[i]; ++t) x.push_back(means[i] + noise(rng));
  }
  return TimeSeries(std::move(x));
}

template <class F>
void parallel_for(std::size_t count, int jobs, const F& body) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t i = next++; i < count && !failed; i = next++) {
      try {
        body(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct Realization {
  TimeSeries x;
  GroundTruth truth;
};

std::vector<Realization> generate_all(const ScenarioConfig& cfg, std::uint64_t seed, int count) {
  std::vector<Realization> out;
  for (int i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    auto [x, g] = gen_scenario(cfg, rng);
    out.push_back({std::move(x), std::move(g)});
  }
  return out;
}

double fp_of(const std::vector<Realization>& reals, const std::vector<std::vector<int>>& found,
             int window) {
  std::vector<Matching> ms;
  for (std::size_t i = 0; i < reals.size(); ++i) {
    ms.push_back(match_changepoints(reals[i].truth.change_points, found[i], window));
  }
  return compute_metrics(ms).fp_proportion;
}

}  // namespace

std::string scenario_name(Scenario s) {
  return s == Scenario::random_mean ? "random" : "repeating";
}

std::string scenario_caption(Scenario s) {
  return s == Scenario::random_mean ? "Random mean parameter assignment."
                                    : "Repeating mean parameter assignment.";
}

Scenario parse_scenario(const std::string& name) {
  if (name == "random" || name == "random-mean") return Scenario::random_mean;
  if (name == "repeating" || name == "repeating-mean") return Scenario::repeating_mean;
  throw ValidationError("unknown scenario '" + name + "' (expected random or repeating)");
}

void ScenarioConfig::validate() const {
  if (min_seg_len < 1 || min_seg_len > max_seg_len) {
    throw ValidationError("segment length range must satisfy 1 <= min <= max");
  }
  if (min_changes < 0 || min_changes > max_changes) {
    throw ValidationError("change-point count range must satisfy 0 <= min <= max");
  }
  if (!(noise_sd > 0.0)) throw ValidationError("noise_sd must be > 0");
  if (class_count < 2) throw ValidationError("class_count must be >= 2");
  if (!(class_mean_sd > 0.0)) throw ValidationError("class_mean_sd must be > 0");
  if (!(min_class_separation > 0.0)) throw ValidationError("min_class_separation must be > 0");
  if (realizations < 1) throw ValidationError("realizations must be >= 1");
}

std::pair<TimeSeries, GroundTruth> gen_scenario_random(const ScenarioConfig& cfg, Rng& rng) {
  cfg.validate();
  auto [lengths, cps] = draw_layout(cfg, rng);
  std::normal_distribution<double> mean_dist(0.0, cfg.class_mean_sd);
  GroundTruth g;
  g.change_points = cps;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    double m = mean_dist(rng);
    for (int tries = 0; i > 0 && std::abs(m - g.segment_means.back()) < cfg.min_class_separation;
         ++tries) {
      if (tries == kMaxRedraws) throw ValidationError("cannot satisfy min_class_separation");
      m = mean_dist(rng);
    }
    g.segment_means.push_back(m);
  }
  TimeSeries x = add_noise(lengths, g.segment_means, cfg.noise_sd, rng);
  return {std::move(x), std::move(g)};
}

std::pair<TimeSeries, GroundTruth> gen_scenario_repeating(const ScenarioConfig& cfg, Rng& rng) {
  cfg.validate();
  auto [lengths, cps] = draw_layout(cfg, rng);
  std::normal_distribution<double> mean_dist(0.0, cfg.class_mean_sd);
  const auto v = static_cast<std::size_t>(cfg.class_count);
  std::vector<double> centres(v);
  for (int tries = 0;; ++tries) {
    if (tries == kMaxRedraws) throw ValidationError("cannot satisfy min_class_separation");
    for (double& c : centres) c = mean_dist(rng);
    bool ok = true;
    for (std::size_t a = 0; a < v && ok; ++a) {
      for (std::size_t b = a + 1; b < v && ok; ++b) {
        ok = std::abs(centres[a] - centres[b]) >= cfg.min_class_separation;
      }
    }
    if (ok) break;
  }
  GroundTruth g;
  g.change_points = cps;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    int c = 0;
    if (i == 0) {
      c = std::uniform_int_distribution<int>(0, cfg.class_count - 1)(rng);
    } else {
      // Uniform over the other classes.
      c = std::uniform_int_distribution<int>(0, cfg.class_count - 2)(rng);
      if (c >= g.labels.back()) ++c;
    }
    g.labels.push_back(c);
    g.segment_means.push_back(centres[static_cast<std::size_t>(c)]);
  }
  TimeSeries x = add_noise(lengths, g.segment_means, cfg.noise_sd, rng);
  return {std::move(x), std::move(g)};
}

std::pair<TimeSeries, GroundTruth> gen_scenario(const ScenarioConfig& cfg, Rng& rng) {
  return cfg.scenario == Scenario::random_mean ? gen_scenario_random(cfg, rng)
                                               : gen_scenario_repeating(cfg, rng);
}

Matching match_changepoints(const std::vector<int>& truth, const std::vector<int>& detected,
                            int window) {
  if (window < 0) throw ValidationError("matching window must be >= 0");
  std::vector<std::tuple<int, int, int, std::size_t, std::size_t>> cand;
  for (std::size_t a = 0; a < truth.size(); ++a) {
    for (std::size_t b = 0; b < detected.size(); ++b) {
      const int d = std::abs(truth[a] - detected[b]);
      if (d <= window) cand.emplace_back(d, truth[a], detected[b], a, b);
    }
  }
  std::sort(cand.begin(), cand.end());
  std::vector<bool> used_t(truth.size(), false);
  std::vector<bool> used_d(detected.size(), false);
  Matching m;
  for (const auto& [d, t, s, a, b] : cand) {
    if (used_t[a] || used_d[b]) continue;
    used_t[a] = used_d[b] = true;
    m.pairs.emplace_back(t, s);
  }
  for (std::size_t a = 0; a < truth.size(); ++a) {
    if (!used_t[a]) m.missed.push_back(truth[a]);
  }
  for (std::size_t b = 0; b < detected.size(); ++b) {
    if (!used_d[b]) m.false_alarms.push_back(detected[b]);
  }
  std::sort(m.pairs.begin(), m.pairs.end());
  return m;
}

MethodMetrics compute_metrics(const std::vector<Matching>& matchings) {
  if (matchings.empty()) throw ValidationError("no realizations to aggregate");
  const auto r = static_cast<double>(matchings.size());
  std::vector<double> truths, detections, matched, spurious, err;
  for (const auto& m : matchings) {
    truths.push_back(static_cast<double>(m.pairs.size() + m.missed.size()));
    matched.push_back(static_cast<double>(m.pairs.size()));
    spurious.push_back(static_cast<double>(m.false_alarms.size()));
    detections.push_back(static_cast<double>(m.pairs.size() + m.false_alarms.size()));
    double e = 0.0;
    for (const auto& [t, d] : m.pairs) e += std::abs(t - d);
    err.push_back(e);
  }
  auto total = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
  // Ratio estimator sum(num)/sum(den) and its delta-method standard error.
  auto ratio = [&](const std::vector<double>& num, const std::vector<double>& den) {
    const double sd = total(den);
    if (sd == 0.0) return std::pair{0.0, 0.0};
    const double q = total(num) / sd;
    if (matchings.size() < 2) return std::pair{q, 0.0};
    const double mean_den = sd / r;
    double ss = 0.0;
    for (std::size_t i = 0; i < num.size(); ++i) {
      const double z = (num[i] - q * den[i]) / mean_den;
      ss += z * z;
    }
    return std::pair{q, std::sqrt(ss / (r * (r - 1.0)))};
  };

  MethodMetrics out;
  out.truths = static_cast<long>(total(truths));
  out.detections = static_cast<long>(total(detections));
  out.matched = static_cast<long>(total(matched));
  if (out.truths == 0) throw ValidationError("no true change points across realizations");
  std::tie(out.tp_proportion, out.tp_se) = ratio(matched, truths);
  std::tie(out.fp_proportion, out.fp_se) = ratio(spurious, truths);
  out.fp_per_detection = ratio(spurious, detections).first;
  std::tie(out.mean_abs_location_error, out.error_se) = ratio(err, matched);
  return out;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::proposed: return "Proposed Method";
    case Method::mcmc: return "MCMC";
    case Method::pelt: return "PELT";
  }
  return "?";
}

HarnessSettings::HarnessSettings() {
  nolabel_hyper.eppf_in_ratio = false;
}

ScoredSeries score_series(Method m, const TimeSeries& x, const HarnessSettings& h,
                          std::uint64_t seed) {
  if (m == Method::pelt) throw ValidationError("PELT has no posterior scores");
  Hyperparams hyper = m == Method::proposed ? h.hyper : h.nolabel_hyper;
  hyper.k_max = std::min(hyper.k_max, static_cast<int>(x.size()) - 2);
  SamplerSettings s = h.sampler;
  s.seed = seed;
  const auto samples = m == Method::proposed ? run_chain(x, hyper, s)
                                             : run_chain_nolabel(x, hyper, s);
  return {pooled_change_probability(samples, s.window, x.size()),
          marginal_change_probability(samples, x.size())};
}

namespace {

// Scores every realization with a sampler-based method.
std::vector<ScoredSeries> score_all(Method m, const std::vector<Realization>& reals,
                                    const HarnessSettings& h, std::uint64_t seed) {
  std::vector<ScoredSeries> out(reals.size());
  parallel_for(reals.size(), h.jobs, [&](std::size_t i) {
    out[i] = score_series(m, reals[i].x, h, mix_seed(seed, i));
  });
  return out;
}

std::vector<std::vector<int>> peaks_all(const std::vector<ScoredSeries>& scores, double rho,
                                        int window) {
  std::vector<std::vector<int>> out;
  for (const auto& s : scores) out.push_back(detect_peaks(s.pooled, s.marginal, rho, window));
  return out;
}

std::vector<std::vector<int>> pelt_all(const std::vector<Realization>& reals, double penalty,
                                       const HarnessSettings& h) {
  std::vector<std::vector<int>> out(reals.size());
  parallel_for(reals.size(), h.jobs, [&](std::size_t i) {
    out[i] = pelt_profiled(reals[i].x.values(), penalty, h.pelt_min_seg_len);
  });
  return out;
}

Calibration calibrate_threshold(const std::vector<Realization>& reals,
                                const std::vector<ScoredSeries>& scores, double target_fp,
                                const HarnessSettings& h) {
  return calibrate_parameter(
      [&](double rho) {
        return fp_of(reals, peaks_all(scores, rho, h.sampler.window), h.match_window);
      },
      0.01, 0.99, target_fp, false);
}

}  // namespace

Calibration calibrate_penalty(const ScenarioConfig& cfg, double target_fp,
                              const HarnessSettings& h) {
  const auto reals = generate_all(cfg, cfg.seed + h.calibration_seed_offset,
                                  h.calibration_realizations);
  return calibrate_parameter(
      [&](double pen) { return fp_of(reals, pelt_all(reals, pen, h), h.match_window); }, 0.1,
      1000.0, target_fp, true);
}

BenchmarkTable run_benchmark(const ScenarioConfig& cfg, const HarnessSettings& h) {
  cfg.validate();
  h.sampler.validate();
  BenchmarkTable table;
  table.caption = scenario_caption(cfg.scenario);
  table.config = cfg;
  const auto reals = generate_all(cfg, cfg.seed, cfg.realizations);
  const std::uint64_t held_out = cfg.seed + h.calibration_seed_offset;
  const auto calib = generate_all(cfg, held_out, h.calibration_realizations);

  for (Method m : h.methods) {
    std::vector<std::vector<int>> found;
    double param = 0.0;
    const auto tag = static_cast<std::uint64_t>(m) + 1;
    if (m == Method::pelt) {
      param = calibrate_penalty(cfg, h.target_fp, h).value;
      found = pelt_all(reals, param, h);
    } else {
      const auto calib_scores = score_all(m, calib, h, mix_seed(held_out, tag));
      param = calibrate_threshold(calib, calib_scores, h.target_fp, h).value;
      found = peaks_all(score_all(m, reals, h, mix_seed(cfg.seed, tag)), param, h.sampler.window);
    }
    std::vector<Matching> ms;
    std::vector<RealizationResult> raw;
    for (std::size_t i = 0; i < reals.size(); ++i) {
      RealizationResult rr;
      rr.index = i;
      rr.truth = reals[i].truth.change_points;
      rr.detected = found[i];
      rr.matching = match_changepoints(rr.truth, rr.detected, h.match_window);
      ms.push_back(rr.matching);
      raw.push_back(std::move(rr));
    }
    MethodMetrics mm = compute_metrics(ms);
    mm.method = method_name(m);
    mm.parameter = param;
    table.rows.push_back(std::move(mm));
    table.raw.push_back(std::move(raw));
  }
  return table;
}

std::string format_table(const BenchmarkTable& table) {
  std::ostringstream os;
  os << table.caption << "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %15s %16s %8s\n", "Method", "True Positives",
                "False Positives", "Error");
  os << line;
  for (const auto& r : table.rows) {
    std::snprintf(line, sizeof line, "%-16s %14.1f%% %15.1f%% %8.2f\n", r.method.c_str(),
                  100.0 * r.tp_proportion, 100.0 * r.fp_proportion, r.mean_abs_location_error);
    os << line;
  }
  return os.str();
}

}  // namespace cpdp

// Command-line front end: detect, bench, simulate.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cpdp/baselines.hpp"
#include "cpdp/bench.hpp"
#include "cpdp/io.hpp"
#include "cpdp/model.hpp"
#include "cpdp/rjmcmc.hpp"

namespace {

using namespace cpdp;

enum Exit { ok = 0, usage = 1, data = 2, invariant = 3 };

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

TimeSeries read_series(const std::string& path) {
  if (path == "-") {
    std::string text((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
    return parse_series_text(text, "<stdin>");
  }
  return parse_series_csv(path);
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("CPDP_SEED");
  if (!s || !*s) return std::nullopt;
  KeyValues kv{{"seed", s}};
  BenchConfig probe;
  try {
    apply_bench_config(probe, kv);
  } catch (const ValidationError&) {
    throw ValidationError(std::string("CPDP_SEED: expected a non-negative integer, got '") + s +
                          "'");
  }
  return probe.scenario.seed;
}

DetectionResult pelt_result(const TimeSeries& x, const std::vector<int>& cps) {
  DetectionResult r;
  r.change_points = cps;
  r.map_change_points = cps;
  const Segmentation seg(cps);
  const SeriesStats stats(x);
  for (std::size_t i = 0; i < seg.num_segments(); ++i) {
    const SuffStats s = stats.range(seg.segment(i, x.size()));
    r.labels.push_back(static_cast<int>(i));
    r.class_means.push_back(s.sum / static_cast<double>(s.count));
  }
  r.num_classes = seg.num_segments();
  r.k_posterior[static_cast<int>(cps.size())] = 1.0;
  return r;
}

struct DetectArgs {
  std::string input;
  std::string out;
  std::string config;
  std::optional<int> iterations, burn_in, window, k_max;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha, gamma, threshold, penalty;
  std::optional<std::string> baseline, label_kernel, move_labels;
  bool no_eppf = false;
};

int run_detect(const DetectArgs& a) {
  DetectConfig cfg;
  if (const auto s = env_seed()) cfg.sampler.seed = *s;
  if (!a.config.empty()) apply_detect_config(cfg, read_key_values(a.config));
  KeyValues flags;
  auto put = [&](const char* key, const auto& opt) {
    if (!opt) return;
    std::ostringstream os;
    os.precision(17);
    os << *opt;
    flags[key] = os.str();
  };
  put("iterations", a.iterations);
  put("burn_in", a.burn_in);
  put("window", a.window);
  put("k_max", a.k_max);
  put("seed", a.seed);
  put("alpha", a.alpha);
  put("gamma", a.gamma);
  put("threshold", a.threshold);
  put("penalty", a.penalty);
  put("baseline", a.baseline);
  put("label_kernel", a.label_kernel);
  put("move_labels", a.move_labels);
  if (a.no_eppf) flags["eppf"] = "false";
  apply_detect_config(cfg, flags);
  if (cfg.baseline == "mcmc") cfg.hyper.eppf_in_ratio = false;

  const TimeSeries x = read_series(a.input);
  if (x.size() < 4) {
    throw ValidationError("series has " + std::to_string(x.size()) +
                          " values; at least 4 are needed");
  }
  DetectionResult r;
  if (cfg.baseline == "pelt") {
    if (cfg.penalty <= 0.0) {
      const double sd = estimate_noise_sd(x.values());
      cfg.penalty = 2.0 * sd * sd * std::log(static_cast<double>(x.size()));
    }
    r = pelt_result(x, pelt_mean(x.values(), cfg.penalty, cfg.min_seg_len));
  } else {
    const Hyperparams h = cfg.resolved_hyper(x.size());
    r = cfg.baseline == "mcmc" ? run_mcmc_nolabel(x, h, cfg.sampler)
                               : summarize(run_chain(x, h, cfg.sampler), cfg.sampler, x.size());
  }
  write_text(a.out, result_to_json(r, cfg, x.size()));
  return ok;
}

struct BenchArgs {
  std::string config;
  std::string out_dir;
  std::optional<std::string> scenario, methods;
  std::optional<int> realizations, jobs, iterations, burn_in, calibration;
  std::optional<std::uint64_t> seed;
};

int run_bench(const BenchArgs& a) {
  BenchConfig cfg;
  if (const auto s = env_seed()) cfg.scenario.seed = *s;
  if (!a.config.empty()) apply_bench_config(cfg, read_key_values(a.config));
  KeyValues flags;
  auto put = [&](const char* key, const auto& opt) {
    if (!opt) return;
    std::ostringstream os;
    os << *opt;
    flags[key] = os.str();
  };
  put("scenario", a.scenario);
  put("methods", a.methods);
  put("realizations", a.realizations);
  put("jobs", a.jobs);
  put("iterations", a.iterations);
  put("burn_in", a.burn_in);
  put("calibration_realizations", a.calibration);
  put("seed", a.seed);
  apply_bench_config(cfg, flags);
  if (a.iterations && !a.burn_in) cfg.harness.sampler.burn_in = *a.iterations / 2;

  const BenchmarkTable t = run_benchmark(cfg.scenario, cfg.harness);
  const std::string dir =
      a.out_dir.empty() ? "bench_" + scenario_name(cfg.scenario.scenario) : a.out_dir;
  std::filesystem::create_directories(dir);
  write_text(dir + "/table.csv", table_to_csv(t));
  write_text(dir + "/table.json", table_to_json(t, cfg.harness));
  write_text(dir + "/raw.csv", raw_results_csv(t));
  std::cout << format_table(t);
  return ok;
}

struct SimulateArgs {
  std::string scenario = "repeating";
  std::uint64_t seed = 1;
  std::string out;
  std::string truth;
};

int run_simulate(const SimulateArgs& a) {
  ScenarioConfig cfg;
  cfg.scenario = parse_scenario(a.scenario);
  Rng rng(a.seed);
  auto [x, g] = gen_scenario(cfg, rng);
  write_text(a.out, format_series_csv(x));
  if (!a.truth.empty()) {
    nlohmann::json doc = {{"scenario", scenario_name(cfg.scenario)},
                          {"seed", a.seed},
                          {"change_points", g.change_points},
                          {"segment_means", g.segment_means},
                          {"labels", g.labels}};
    write_text(a.truth, doc.dump(2) + "\n");
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian mean-shift change-point detection with shared segment classes"};
  app.require_subcommand(1);

  DetectArgs d;
  auto* detect = app.add_subcommand("detect", "Detect change points in a series");
  detect->add_option("input", d.input, "CSV file (one value per line, or index,value); - for stdin")
      ->required();
  detect->add_option("--out,-o", d.out, "Write JSON here instead of stdout");
  detect->add_option("--config", d.config, "key=value settings file (flags override)");
  detect->add_option("--iterations", d.iterations, "Total sweeps");
  detect->add_option("--burn-in", d.burn_in, "Discarded leading sweeps");
  detect->add_option("--seed", d.seed, "RNG seed (default: CPDP_SEED or 1)");
  detect->add_option("--alpha", d.alpha, "Concentration of the class prior");
  detect->add_option("--gamma", d.gamma, "Noise-variance prior scale");
  detect->add_option("--threshold", d.threshold, "Detection threshold on pooled probability");
  detect->add_option("--window", d.window, "Pooling half-width");
  detect->add_option("--k-max", d.k_max, "Maximum number of change points");
  detect->add_flag("--no-eppf", d.no_eppf, "Drop the class prior from move ratios");
  detect->add_option("--baseline", d.baseline, "Run a baseline instead")
      ->check(CLI::IsMember({"mcmc", "pelt"}));
  detect->add_option("--penalty", d.penalty, "PELT penalty per change point");
  detect->add_option("--label-kernel", d.label_kernel, "collapsed or conditional")
      ->check(CLI::IsMember({"collapsed", "conditional"}));
  detect->add_option("--move-labels", d.move_labels, "marginal, fresh or fresh_literal")
      ->check(CLI::IsMember({"marginal", "fresh", "fresh_literal"}));

  BenchArgs b;
  auto* bench = app.add_subcommand("bench", "Run the synthetic benchmark");
  bench->add_option("--scenario", b.scenario, "random or repeating")
      ->check(CLI::IsMember({"random", "repeating", "random-mean", "repeating-mean"}));
  bench->add_option("--realizations", b.realizations, "Number of test series");
  bench->add_option("--seed", b.seed, "Benchmark seed (default: CPDP_SEED or 1)");
  bench->add_option("--jobs", b.jobs, "Worker threads");
  bench->add_option("--iterations", b.iterations, "Sampler sweeps per series");
  bench->add_option("--burn-in", b.burn_in, "Discarded sweeps (default half of iterations)");
  bench->add_option("--calibration-realizations", b.calibration, "Held-out tuning series");
  bench->add_option("--methods", b.methods, "Comma list of proposed, mcmc, pelt");
  bench->add_option("--config", b.config, "key=value settings file (flags override)");
  bench->add_option("--out-dir", b.out_dir, "Output directory (default bench_<scenario>)");

  SimulateArgs s;
  auto* sim = app.add_subcommand("simulate", "Generate one synthetic series");
  sim->add_option("--scenario", s.scenario, "random or repeating")
      ->check(CLI::IsMember({"random", "repeating", "random-mean", "repeating-mean"}));
  sim->add_option("--seed", s.seed, "Generator seed");
  sim->add_option("--out,-o", s.out, "Series CSV (default stdout)");
  sim->add_option("--truth", s.truth, "Ground-truth JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ok : usage;
  }

  try {
    if (*detect) return run_detect(d);
    if (*bench) return run_bench(b);
    return run_simulate(s);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return data;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  } catch (const std::logic_error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return invariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return data;
  }
}

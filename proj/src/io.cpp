#include "cpdp/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

namespace cpdp {

namespace {

using json = nlohmann::json;
using Setter = std::function<void(const std::string&)>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<double> to_number(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  const char* first = t.data();
  if (*first == '+') ++first;
  double v = 0.0;
  const auto [p, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size()) return std::nullopt;
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

double parse_double(const std::string& key, const std::string& v) {
  const auto d = to_number(v);
  if (!d || !std::isfinite(*d)) throw ValidationError(key + ": expected a number, got '" + v + "'");
  return *d;
}

long long parse_integer(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  long long out = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size()) {
    throw ValidationError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  const long long x = parse_integer(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ValidationError(key + ": out of range");
  }
  return static_cast<int>(x);
}

std::uint64_t parse_seed(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size()) {
    throw ValidationError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ValidationError(key + ": expected true or false, got '" + v + "'");
}

std::string kernel_name(LabelKernel k) {
  return k == LabelKernel::collapsed ? "collapsed" : "conditional";
}

LabelKernel parse_kernel(const std::string& v) {
  if (v == "collapsed") return LabelKernel::collapsed;
  if (v == "conditional") return LabelKernel::conditional;
  throw ValidationError("label_kernel: expected collapsed or conditional, got '" + v + "'");
}

std::string rule_name(MoveLabelRule r) {
  switch (r) {
    case MoveLabelRule::marginal: return "marginal";
    case MoveLabelRule::fresh: return "fresh";
    case MoveLabelRule::fresh_literal: return "fresh_literal";
  }
  return "?";
}

MoveLabelRule parse_rule(const std::string& v) {
  if (v == "marginal") return MoveLabelRule::marginal;
  if (v == "fresh") return MoveLabelRule::fresh;
  if (v == "fresh_literal") return MoveLabelRule::fresh_literal;
  throw ValidationError("move_labels: expected marginal, fresh or fresh_literal, got '" + v + "'");
}

void add_hyper_setters(std::map<std::string, Setter>& s, Hyperparams& h) {
  s["alpha"] = [&h](const std::string& v) { h.alpha = parse_double("alpha", v); };
  s["mean_loc"] = [&h](const std::string& v) { h.mean_loc = parse_double("mean_loc", v); };
  s["mean_scale"] = [&h](const std::string& v) { h.mean_scale = parse_double("mean_scale", v); };
  s["noise_shape"] = [&h](const std::string& v) { h.noise_shape = parse_double("noise_shape", v); };
  s["gamma"] = [&h](const std::string& v) { h.noise_scale = parse_double("gamma", v); };
  s["classvar_shape"] = [&h](const std::string& v) {
    h.classvar_shape = parse_double("classvar_shape", v);
  };
  s["classvar_scale"] = [&h](const std::string& v) {
    h.classvar_scale = parse_double("classvar_scale", v);
  };
  s["k_max"] = [&h](const std::string& v) { h.k_max = parse_int("k_max", v); };
  s["eppf"] = [&h](const std::string& v) { h.eppf_in_ratio = parse_bool("eppf", v); };
}

void add_sampler_setters(std::map<std::string, Setter>& s, SamplerSettings& p,
                         const std::string& window_key) {
  s["iterations"] = [&p](const std::string& v) { p.iterations = parse_int("iterations", v); };
  s["burn_in"] = [&p](const std::string& v) { p.burn_in = parse_int("burn_in", v); };
  s["threshold"] = [&p](const std::string& v) { p.threshold = parse_double("threshold", v); };
  s[window_key] = [&p, window_key](const std::string& v) { p.window = parse_int(window_key, v); };
  s["label_kernel"] = [&p](const std::string& v) { p.label_kernel = parse_kernel(trim(v)); };
  s["move_labels"] = [&p](const std::string& v) { p.move_labels = parse_rule(trim(v)); };
}

std::map<std::string, Setter> detect_setters(DetectConfig& c) {
  std::map<std::string, Setter> s;
  add_hyper_setters(s, c.hyper);
  add_sampler_setters(s, c.sampler, "window");
  s["seed"] = [&c](const std::string& v) { c.sampler.seed = parse_seed("seed", v); };
  s["baseline"] = [&c](const std::string& v) {
    const std::string t = trim(v);
    if (t != "" && t != "none" && t != "mcmc" && t != "pelt") {
      throw ValidationError("baseline: expected mcmc or pelt, got '" + v + "'");
    }
    c.baseline = t == "none" ? "" : t;
  };
  s["penalty"] = [&c](const std::string& v) { c.penalty = parse_double("penalty", v); };
  s["min_seg_len"] = [&c](const std::string& v) { c.min_seg_len = parse_int("min_seg_len", v); };
  return s;
}

std::map<std::string, Setter> bench_setters(BenchConfig& c) {
  std::map<std::string, Setter> s;
  ScenarioConfig& sc = c.scenario;
  HarnessSettings& h = c.harness;
  add_hyper_setters(s, h.hyper);
  add_sampler_setters(s, h.sampler, "sampler_window");
  s["scenario"] = [&sc](const std::string& v) { sc.scenario = parse_scenario(trim(v)); };
  s["realizations"] = [&sc](const std::string& v) {
    sc.realizations = parse_int("realizations", v);
  };
  s["seed"] = [&sc](const std::string& v) { sc.seed = parse_seed("seed", v); };
  s["seg_len_min"] = [&sc](const std::string& v) { sc.min_seg_len = parse_int("seg_len_min", v); };
  s["seg_len_max"] = [&sc](const std::string& v) { sc.max_seg_len = parse_int("seg_len_max", v); };
  s["changes_min"] = [&sc](const std::string& v) { sc.min_changes = parse_int("changes_min", v); };
  s["changes_max"] = [&sc](const std::string& v) { sc.max_changes = parse_int("changes_max", v); };
  s["noise_sd"] = [&sc](const std::string& v) { sc.noise_sd = parse_double("noise_sd", v); };
  s["class_count"] = [&sc](const std::string& v) { sc.class_count = parse_int("class_count", v); };
  s["class_mean_sd"] = [&sc](const std::string& v) {
    sc.class_mean_sd = parse_double("class_mean_sd", v);
  };
  s["min_class_separation"] = [&sc](const std::string& v) {
    sc.min_class_separation = parse_double("min_class_separation", v);
  };
  s["match_window"] = [&h](const std::string& v) { h.match_window = parse_int("match_window", v); };
  s["target_fp"] = [&h](const std::string& v) { h.target_fp = parse_double("target_fp", v); };
  s["calibration_realizations"] = [&h](const std::string& v) {
    h.calibration_realizations = parse_int("calibration_realizations", v);
  };
  s["jobs"] = [&h](const std::string& v) { h.jobs = parse_int("jobs", v); };
  s["pelt_min_seg_len"] = [&h](const std::string& v) {
    h.pelt_min_seg_len = parse_int("pelt_min_seg_len", v);
  };
  s["mcmc_eppf"] = [&h](const std::string& v) {
    h.nolabel_hyper.eppf_in_ratio = parse_bool("mcmc_eppf", v);
  };
  s["methods"] = [&h](const std::string& v) {
    std::vector<Method> ms;
    std::stringstream ss(v);
    for (std::string item; std::getline(ss, item, ',');) {
      item = trim(item);
      if (item == "proposed") ms.push_back(Method::proposed);
      else if (item == "mcmc") ms.push_back(Method::mcmc);
      else if (item == "pelt") ms.push_back(Method::pelt);
      else throw ValidationError("methods: unknown method '" + item + "'");
    }
    if (ms.empty()) throw ValidationError("methods: at least one method required");
    h.methods = std::move(ms);
  };
  return s;
}

std::string join_keys(const std::map<std::string, Setter>& s) {
  std::string out;
  for (const auto& [k, f] : s) out += (out.empty() ? "" : ", ") + k;
  return out;
}

void apply(std::map<std::string, Setter>& setters, const KeyValues& kv) {
  for (const auto& [k, v] : kv) {
    const auto it = setters.find(k);
    if (it == setters.end()) {
      throw ValidationError("unknown config key '" + k + "'; valid keys: " + join_keys(setters));
    }
    it->second(v);
  }
}

template <class M>
std::vector<std::string> keys_of(const M& m) {
  std::vector<std::string> out;
  for (const auto& [k, v] : m) out.push_back(k);
  return out;
}

json hyper_json(const Hyperparams& h) {
  return {{"alpha", h.alpha},
          {"mean_loc", h.mean_loc},
          {"mean_scale", h.mean_scale},
          {"noise_shape", h.noise_shape},
          {"gamma", h.noise_scale},
          {"classvar_shape", h.classvar_shape},
          {"classvar_scale", h.classvar_scale},
          {"k_max", h.k_max},
          {"eppf", h.eppf_in_ratio}};
}

json sampler_json(const SamplerSettings& s) {
  return {{"iterations", s.iterations},
          {"burn_in", s.burn_in},
          {"threshold", s.threshold},
          {"window", s.window},
          {"label_kernel", kernel_name(s.label_kernel)},
          {"move_labels", rule_name(s.move_labels)}};
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (int x : v) out += (out.empty() ? "" : " ") + std::to_string(x);
  return out;
}

}  // namespace

TimeSeries parse_series_text(const std::string& text, const std::string& source) {
  std::vector<double> values;
  std::istringstream in(text);
  bool header_allowed = true;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(trim(f));
    if (line.back() == ',') fields.emplace_back();
    auto where = [&] { return source + ":" + std::to_string(line_no) + ": "; };
    if (fields.size() > 2) throw DataError(where() + "expected 1 or 2 columns, got " +
                                           std::to_string(fields.size()));
    const std::string& payload = fields.back();
    const auto v = to_number(payload);
    const bool index_ok = fields.size() == 1 || to_number(fields.front()).has_value();
    if (!v || !index_ok) {
      if (header_allowed && values.empty()) {
        header_allowed = false;
        continue;
      }
      throw DataError(where() + "non-numeric value '" + line + "'");
    }
    if (!std::isfinite(*v)) throw DataError(where() + "non-finite value '" + payload + "'");
    header_allowed = false;
    values.push_back(*v);
  }
  if (values.size() < 2) {
    throw DataError(source + ": need at least 2 values, got " + std::to_string(values.size()));
  }
  return TimeSeries(std::move(values));
}

TimeSeries parse_series_csv(const std::filesystem::path& path) {
  return parse_series_text(read_file(path), path.string());
}

std::string format_series_csv(const TimeSeries& x) {
  std::string out = "t,x\n";
  for (std::size_t t = 0; t < x.size(); ++t) {
    out += std::to_string(t + 1) + "," + json(x[t]).dump() + "\n";
  }
  return out;
}

Hyperparams DetectConfig::resolved_hyper(std::size_t n) const {
  Hyperparams h = hyper;
  h.k_max = std::min(h.k_max, static_cast<int>(n) - 2);
  return h;
}

KeyValues parse_key_values(const std::string& text, const std::string& source) {
  KeyValues kv;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(source + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw DataError(source + ":" + std::to_string(line_no) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  return parse_key_values(read_file(path), path.string());
}

void apply_detect_config(DetectConfig& cfg, const KeyValues& kv) {
  auto s = detect_setters(cfg);
  apply(s, kv);
}

void apply_bench_config(BenchConfig& cfg, const KeyValues& kv) {
  auto s = bench_setters(cfg);
  apply(s, kv);
}

std::vector<std::string> detect_config_keys() {
  DetectConfig c;
  return keys_of(detect_setters(c));
}

std::vector<std::string> bench_config_keys() {
  BenchConfig c;
  return keys_of(bench_setters(c));
}

std::string result_to_json(const DetectionResult& r, const DetectConfig& cfg, std::size_t n) {
  json kpost = json::object();
  for (const auto& [k, p] : r.k_posterior) kpost[std::to_string(k)] = p;
  json settings = sampler_json(cfg.sampler);
  settings["hyper"] = hyper_json(cfg.resolved_hyper(n));
  settings["method"] = cfg.baseline.empty() ? "proposed" : cfg.baseline;
  if (cfg.baseline == "pelt") {
    settings["penalty"] = cfg.penalty;
    settings["min_seg_len"] = cfg.min_seg_len;
  }
  settings["n"] = n;
  json doc = {{"change_points", r.change_points},
              {"posterior_prob", r.posterior_prob},
              {"labels", r.labels},
              {"class_means", r.class_means},
              {"num_classes", r.num_classes},
              {"k_posterior", kpost},
              {"map_change_points", r.map_change_points},
              {"settings", settings},
              {"seed", cfg.sampler.seed}};
  return doc.dump(2) + "\n";
}

DetectionResult result_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("invalid result JSON: ") + e.what());
  }
  DetectionResult r;
  try {
    r.change_points = doc.at("change_points").get<std::vector<int>>();
    r.posterior_prob = doc.at("posterior_prob").get<std::vector<double>>();
    r.labels = doc.at("labels").get<std::vector<int>>();
    r.class_means = doc.at("class_means").get<std::vector<double>>();
    r.num_classes = doc.at("num_classes").get<std::size_t>();
    for (const auto& [k, p] : doc.at("k_posterior").items()) {
      r.k_posterior[std::stoi(k)] = p.get<double>();
    }
    if (doc.contains("map_change_points")) {
      r.map_change_points = doc["map_change_points"].get<std::vector<int>>();
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed result JSON: ") + e.what());
  }
  return r;
}

std::string table_to_csv(const BenchmarkTable& t) {
  std::ostringstream os;
  os << "caption,method,tp_proportion,tp_se,fp_proportion,fp_se,fp_per_detection,"
        "mean_abs_location_error,error_se,parameter,truths,detections,matched\n";
  for (const auto& r : t.rows) {
    os << '"' << t.caption << "\"," << r.method << ',' << json(r.tp_proportion).dump() << ','
       << json(r.tp_se).dump() << ',' << json(r.fp_proportion).dump() << ','
       << json(r.fp_se).dump() << ',' << json(r.fp_per_detection).dump() << ','
       << json(r.mean_abs_location_error).dump() << ',' << json(r.error_se).dump() << ','
       << json(r.parameter).dump() << ',' << r.truths << ',' << r.detections << ','
       << r.matched << '\n';
  }
  return os.str();
}

std::string table_to_json(const BenchmarkTable& t, const HarnessSettings& h) {
  const ScenarioConfig& c = t.config;
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"method", r.method},
                    {"tp_proportion", r.tp_proportion},
                    {"tp_se", r.tp_se},
                    {"fp_proportion", r.fp_proportion},
                    {"fp_se", r.fp_se},
                    {"fp_per_detection", r.fp_per_detection},
                    {"mean_abs_location_error", r.mean_abs_location_error},
                    {"error_se", r.error_se},
                    {"parameter", r.parameter},
                    {"truths", r.truths},
                    {"detections", r.detections},
                    {"matched", r.matched}});
  }
  json methods = json::array();
  for (Method m : h.methods) methods.push_back(method_name(m));
  json doc = {
      {"caption", t.caption},
      {"scenario",
       {{"scenario", scenario_name(c.scenario)},
        {"seg_len_min", c.min_seg_len},
        {"seg_len_max", c.max_seg_len},
        {"changes_min", c.min_changes},
        {"changes_max", c.max_changes},
        {"noise_sd", c.noise_sd},
        {"class_count", c.class_count},
        {"class_mean_sd", c.class_mean_sd},
        {"min_class_separation", c.min_class_separation},
        {"realizations", c.realizations}}},
      {"harness",
       {{"methods", methods},
        {"match_window", h.match_window},
        {"target_fp", h.target_fp},
        {"calibration_realizations", h.calibration_realizations},
        {"sampler", sampler_json(h.sampler)},
        {"hyper", hyper_json(h.hyper)},
        {"mcmc_hyper", hyper_json(h.nolabel_hyper)},
        {"pelt_min_seg_len", h.pelt_min_seg_len}}},
      {"rows", rows},
      {"seed", c.seed}};
  return doc.dump(2) + "\n";
}

std::string raw_results_csv(const BenchmarkTable& t) {
  std::ostringstream os;
  os << "method,realization,truth,detected,matched,false_alarms,abs_error\n";
  for (std::size_t m = 0; m < t.raw.size(); ++m) {
    for (const auto& rr : t.raw[m]) {
      long err = 0;
      for (const auto& [a, b] : rr.matching.pairs) err += std::abs(a - b);
      os << t.rows[m].method << ',' << rr.index << ',' << join_ints(rr.truth) << ','
         << join_ints(rr.detected) << ',' << rr.matching.pairs.size() << ','
         << rr.matching.false_alarms.size() << ',' << err << '\n';
    }
  }
  return os.str();
}

}  // namespace cpdp

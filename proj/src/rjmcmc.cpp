#include "cpdp/rjmcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cpdp/dp_labels.hpp"
#include "cpdp/random.hpp"

namespace cpdp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_singleton(const LabelAssignment& labels, std::size_t i) {
  const int c = labels[i];
  return std::count(labels.labels().begin(), labels.labels().end(), c) == 1;
}

// Relabels classes so that segment i carries class i (label-free sampler).
ChainState to_identity(ChainState state) {
  const std::size_t m = state.seg.num_segments();
  ClassParams p;
  p.segment_means = std::move(state.params.segment_means);
  for (std::size_t i = 0; i < m; ++i) {
    const auto v = static_cast<std::size_t>(state.labels[i]);
    p.class_means.push_back(state.params.class_means[v]);
    p.class_mean_vars.push_back(state.params.class_mean_vars[v]);
    p.noise_vars.push_back(state.params.noise_vars[v]);
  }
  state.params = std::move(p);
  state.labels = LabelAssignment::singletons(m);
  return state;
}

}  // namespace

MoveProbabilities MoveProbabilities::at(std::size_t k, int k_max) {
  const auto km = static_cast<std::size_t>(k_max);
  if (k == 0) return {0.5, 0.0, 0.5};
  if (k >= km) return {0.0, 0.5, 0.5};
  return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
}

void SamplerSettings::validate() const {
  if (iterations < 1) throw ValidationError("iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations) {
    throw ValidationError("burn_in must be in [0, iterations)");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("threshold must be in (0,1)");
  if (window < 1) throw ValidationError("window must be >= 1");
}

ChangePointSampler::ChangePointSampler(const TimeSeries& x, const Hyperparams& hyper,
                                       SamplerSettings settings)
    : model_(x, hyper), settings_(std::move(settings)) {
  if (x.size() < 4) {
    throw ValidationError("series of length " + std::to_string(x.size()) +
                          " has no interior change-point positions (need N >= 4)");
  }
  settings_.validate();
}

ChainState ChangePointSampler::initial_state(Rng& rng) const {
  ChainState s;
  s.seg = Segmentation(settings_.initial_change_points);
  s.seg.validate(size());
  if (s.seg.num_changes() > static_cast<std::size_t>(model_.hyper().k_max)) {
    throw ValidationError("initial change points exceed k_max");
  }
  s.labels = LabelAssignment::singletons(s.seg.num_segments());
  for (std::size_t i = 0; i < s.seg.num_segments(); ++i) {
    const FreshClass c = draw_fresh_class(model_.segment_stats(s.seg, i), model_.hyper(), rng);
    s.params.class_means.push_back(c.class_mean);
    s.params.class_mean_vars.push_back(c.class_mean_var);
    s.params.noise_vars.push_back(c.noise_var);
    s.params.segment_means.push_back(c.class_mean);
  }
  return s;
}

std::vector<ChangePointSampler::Completion> ChangePointSampler::completions(
    const Segmentation& seg, const std::vector<int>& labels,
    std::span<const std::size_t> free) const {
  const int max_id = labels.empty() ? -1 : *std::max_element(labels.begin(), labels.end());
  const auto ids = static_cast<std::size_t>(max_id + 1);
  std::vector<SuffStats> pooled(ids);
  std::vector<int> sizes(ids, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    const auto v = static_cast<std::size_t>(labels[i]);
    pooled[v] += model_.segment_stats(seg, i);
    ++sizes[v];
  }
  double base = model_.structure_term(seg.num_changes());
  std::vector<int> existing;
  for (std::size_t v = 0; v < ids; ++v) {
    if (sizes[v] == 0) continue;
    base += model_.class_term(pooled[v]) + model_.class_prior_term(sizes[v]);
    existing.push_back(static_cast<int>(v));
  }
  auto delta = [&](int v, const SuffStats& add, int count) {
    const SuffStats cur = v >= 0 ? pooled[static_cast<std::size_t>(v)] : SuffStats{};
    const int n = v >= 0 ? sizes[static_cast<std::size_t>(v)] : 0;
    return model_.class_term(cur + add) - model_.class_term(cur) +
           model_.class_prior_term(n + count) - model_.class_prior_term(n);
  };

  std::vector<Completion> out;
  const SuffStats s1 = model_.segment_stats(seg, free[0]);
  if (free.size() == 1) {
    out.reserve(existing.size() + 1);
    for (int v : existing) out.push_back({{v, 0}, base + delta(v, s1, 1)});
    out.push_back({{-1, 0}, base + delta(-1, s1, 1)});
    return out;
  }
  const SuffStats s2 = model_.segment_stats(seg, free[1]);
  out.reserve((existing.size() + 2) * (existing.size() + 1));
  for (int v : existing) {
    const double dv = delta(v, s1, 1);
    for (int w : existing) {
      const double d = v == w ? delta(v, s1 + s2, 2) : dv + delta(w, s2, 1);
      out.push_back({{v, w}, base + d});
    }
    out.push_back({{v, -1}, base + dv + delta(-1, s2, 1)});
  }
  const double dnew = delta(-1, s1, 1);
  for (int w : existing) out.push_back({{-1, w}, base + dnew + delta(w, s2, 1)});
  out.push_back({{-1, -1}, base + delta(-1, s1 + s2, 2)});
  out.push_back({{-1, -2}, base + dnew + delta(-1, s2, 1)});
  return out;
}

ChainState ChangePointSampler::build_state(Segmentation seg, std::vector<int> labels,
                                           const ChainState& from,
                                           std::span<const std::size_t> free,
                                           const std::array<int, 2>& classes,
                                           std::span<const double> kept_means,
                                           Rng& rng) const {
  ChainState s;
  s.params = from.params;
  s.params.segment_means.assign(kept_means.begin(), kept_means.end());
  const int first_new = static_cast<int>(s.params.num_classes());
  int next_id = first_new;
  std::array<int, 2> new_ids{-1, -1};
  std::array<SuffStats, 2> new_stats{};
  for (std::size_t k = 0; k < free.size(); ++k) {
    const int c = classes[k];
    if (c >= 0) {
      labels[free[k]] = c;
      continue;
    }
    const auto slot = static_cast<std::size_t>(-c - 1);
    if (new_ids[slot] < 0) new_ids[slot] = next_id++;
    labels[free[k]] = new_ids[slot];
    new_stats[slot] += model_.segment_stats(seg, free[k]);
  }
  for (int id = first_new; id < next_id; ++id) {
    const std::size_t slot = new_ids[0] == id ? 0 : 1;
    const FreshClass c = draw_fresh_class(new_stats[slot], model_.hyper(), rng);
    s.params.class_means.push_back(c.class_mean);
    s.params.class_mean_vars.push_back(c.class_mean_var);
    s.params.noise_vars.push_back(c.noise_var);
  }
  for (std::size_t k = 0; k < free.size(); ++k) {
    s.params.segment_means[free[k]] =
        s.params.class_means[static_cast<std::size_t>(labels[free[k]])];
  }
  s.seg = std::move(seg);
  s.labels = LabelAssignment(std::move(labels));
  s = compact_labels(std::move(s));
  if (settings_.pin_labels) s = to_identity(std::move(s));
  return s;
}

Proposal ChangePointSampler::relabelled(const ChainState& state, Segmentation seg,
                                        std::vector<int> labels, std::vector<double> kept_means,
                                        std::span<const std::size_t> free_new,
                                        std::span<const std::size_t> free_old, double log_q,
                                        Rng& rng) const {
  if (settings_.pin_labels || settings_.move_labels != MoveLabelRule::marginal) {
    if (!settings_.pin_labels && settings_.move_labels == MoveLabelRule::fresh) {
      for (std::size_t i : free_old) {
        if (!is_singleton(state.labels, i)) return {state, kNegInf};
      }
    }
    ChainState next = build_state(std::move(seg), std::move(labels), state, free_new, {-1, -2},
                                  kept_means, rng);
    const double ratio = model_.log_joint(next.seg, next.labels) -
                         model_.log_joint(state.seg, state.labels) + log_q;
    return {std::move(next), ratio};
  }

  std::vector<int> old_labels = state.labels.labels();
  for (std::size_t i : free_old) old_labels[i] = -1;
  const auto cy = completions(seg, labels, free_new);
  const auto cx = completions(state.seg, old_labels, free_old);
  std::vector<double> wy(cy.size());
  std::vector<double> wx(cx.size());
  for (std::size_t k = 0; k < cy.size(); ++k) wy[k] = cy[k].log_joint;
  for (std::size_t k = 0; k < cx.size(); ++k) wx[k] = cx[k].log_joint;
  const double ratio = log_sum_exp(wy) - log_sum_exp(wx) + log_q;
  const std::size_t pick = draw_log_categorical(wy, rng);
  ChainState next = build_state(std::move(seg), std::move(labels), state, free_new,
                                cy[pick].classes, kept_means, rng);
  return {std::move(next), ratio};
}

Proposal ChangePointSampler::propose_birth_at(const ChainState& state, int tau, Rng& rng) const {
  const std::size_t n = size();
  const std::size_t k = state.seg.num_changes();
  if (tau < 2 || tau > static_cast<int>(n) - 1 || state.seg.contains(tau)) {
    throw ValidationError("birth position " + std::to_string(tau) + " is not free");
  }
  if (k >= static_cast<std::size_t>(model_.hyper().k_max)) return {state, kNegInf};

  const std::size_t i = state.seg.segment_containing(tau);
  std::vector<int> labels = state.labels.labels();
  labels[i] = -1;
  labels.insert(labels.begin() + static_cast<std::ptrdiff_t>(i), -1);
  std::vector<double> means = state.params.segment_means;
  means[i] = kNaN;
  means.insert(means.begin() + static_cast<std::ptrdiff_t>(i), kNaN);

  const int k_max = model_.hyper().k_max;
  const double log_q = std::log(MoveProbabilities::at(k + 1, k_max).death / static_cast<double>(k + 1)) -
                       std::log(MoveProbabilities::at(k, k_max).birth /
                                static_cast<double>(n - 2 - k));
  const std::array<std::size_t, 2> free_new{i, i + 1};
  const std::array<std::size_t, 1> free_old{i};
  return relabelled(state, state.seg.with_change(tau), std::move(labels), std::move(means),
                    free_new, free_old, log_q, rng);
}

Proposal ChangePointSampler::propose_birth(const ChainState& state, Rng& rng) const {
  const std::size_t n = size();
  const std::size_t k = state.seg.num_changes();
  if (k >= static_cast<std::size_t>(model_.hyper().k_max) || n - 2 <= k) return {state, kNegInf};
  auto r = std::uniform_int_distribution<std::size_t>(0, n - 3 - k)(rng);
  // r-th free index of [2, N-1].
  int tau = 2 + static_cast<int>(r);
  for (int cp : state.seg.change_points()) {
    if (cp <= tau) ++tau;
    else break;
  }
  return propose_birth_at(state, tau, rng);
}

Proposal ChangePointSampler::propose_death_at(const ChainState& state, std::size_t j,
                                              Rng& rng) const {
  const std::size_t n = size();
  const std::size_t k = state.seg.num_changes();
  if (j >= k) throw ValidationError("death index out of range");

  std::vector<int> labels = state.labels.labels();
  labels.erase(labels.begin() + static_cast<std::ptrdiff_t>(j));
  labels[j] = -1;
  std::vector<double> means = state.params.segment_means;
  means.erase(means.begin() + static_cast<std::ptrdiff_t>(j));
  means[j] = kNaN;

  const int k_max = model_.hyper().k_max;
  const double log_q =
      std::log(MoveProbabilities::at(k - 1, k_max).birth / static_cast<double>(n - 1 - k)) -
      std::log(MoveProbabilities::at(k, k_max).death / static_cast<double>(k));
  const std::array<std::size_t, 1> free_new{j};
  const std::array<std::size_t, 2> free_old{j, j + 1};
  return relabelled(state, state.seg.without_change(j), std::move(labels), std::move(means),
                    free_new, free_old, log_q, rng);
}

Proposal ChangePointSampler::propose_death(const ChainState& state, Rng& rng) const {
  const std::size_t k = state.seg.num_changes();
  if (k == 0) throw ValidationError("death move needs K >= 1");
  const auto j = std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
  return propose_death_at(state, j, rng);
}

std::pair<int, int> ChangePointSampler::move_range(const ChainState& state, std::size_t j) const {
  const auto& cp = state.seg.change_points();
  const int lo = j == 0 ? 2 : cp[j - 1] + 1;
  const int hi = j + 1 == cp.size() ? static_cast<int>(size()) - 1 : cp[j + 1] - 1;
  return {lo, hi};
}

Proposal ChangePointSampler::propose_move_at(const ChainState& state, std::size_t j, int tau,
                                             Rng& rng) const {
  if (j >= state.seg.num_changes()) throw ValidationError("update index out of range");
  const auto [lo, hi] = move_range(state, j);
  if (tau < lo || tau > hi) {
    throw ValidationError("update position " + std::to_string(tau) + " outside [" +
                          std::to_string(lo) + "," + std::to_string(hi) + "]");
  }
  std::vector<int> labels = state.labels.labels();
  labels[j] = -1;
  labels[j + 1] = -1;
  std::vector<double> means = state.params.segment_means;
  means[j] = kNaN;
  means[j + 1] = kNaN;
  const std::array<std::size_t, 2> free{j, j + 1};
  return relabelled(state, state.seg.with_moved(j, tau), std::move(labels), std::move(means), free,
                    free, 0.0, rng);
}

bool ChangePointSampler::accept(double log_ratio, Rng& rng) const {
  if (log_ratio >= 0.0) return true;
  if (!(log_ratio > kNegInf)) return false;
  return std::log(std::uniform_real_distribution<double>(0.0, 1.0)(rng)) < log_ratio;
}

ChainState ChangePointSampler::move_update(ChainState state, Rng& rng,
                                           MoveCounters* counters) const {
  for (std::size_t j = 0; j < state.seg.num_changes(); ++j) {
    const auto [lo, hi] = move_range(state, j);
    const int tau = std::uniform_int_distribution<int>(lo, hi)(rng);
    Proposal p = propose_move_at(state, j, tau, rng);
    const bool ok = accept(p.log_accept_ratio, rng);
    if (counters) {
      ++counters->proposed[2];
      if (ok) ++counters->accepted[2];
    }
    if (ok) state = std::move(p.state);
  }
  return state;
}

ChainState ChangePointSampler::gibbs_scan(ChainState state, Rng& rng) const {
  const Hyperparams& h = model_.hyper();
  state.params.segment_means = sample_segment_means(model_.stats(), state, h, rng);
  if (!settings_.pin_labels) {
    for (std::size_t i = 0; i < state.seg.num_segments(); ++i) {
      state = settings_.label_kernel == LabelKernel::collapsed
                  ? collapsed_update_label(i, std::move(state), model_, rng)
                  : gibbs_update_label(i, std::move(state), h, rng);
    }
  }
  for (std::size_t v = 0; v < state.labels.num_classes(); ++v) {
    const int cls = static_cast<int>(v);
    state.params.class_means[v] = sample_class_mean(cls, state, h, rng);
    state.params.class_mean_vars[v] = sample_class_var(cls, state, h, rng);
    state.params.noise_vars[v] = sample_noise_var(cls, model_.stats(), state, h, rng);
  }
  return state;
}

std::pair<ChainState, ChainSample> ChangePointSampler::sweep(ChainState state, Rng& rng,
                                                             MoveCounters* counters) const {
  const std::size_t k = state.seg.num_changes();
  const MoveProbabilities mp = MoveProbabilities::at(k, model_.hyper().k_max);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < mp.birth) {
    Proposal p = propose_birth(state, rng);
    const bool ok = accept(p.log_accept_ratio, rng);
    if (counters) {
      ++counters->proposed[0];
      if (ok) ++counters->accepted[0];
    }
    if (ok) state = std::move(p.state);
  } else if (u < mp.birth + mp.death) {
    Proposal p = propose_death(state, rng);
    const bool ok = accept(p.log_accept_ratio, rng);
    if (counters) {
      ++counters->proposed[1];
      if (ok) ++counters->accepted[1];
    }
    if (ok) state = std::move(p.state);
  } else {
    state = move_update(std::move(state), rng, counters);
  }
  state = gibbs_scan(std::move(state), rng);
  ChainSample sample = record(state);
  return {std::move(state), std::move(sample)};
}

ChainSample ChangePointSampler::record(const ChainState& state) const {
  ChainSample s;
  s.seg = state.seg;
  s.labels = state.labels;
  s.num_classes = state.labels.num_classes();
  s.log_joint = model_.log_joint(state.seg, state.labels);
  s.indicator.assign(size(), 0);
  for (int tau : state.seg.change_points()) s.indicator[static_cast<std::size_t>(tau - 1)] = 1;
  s.class_means = state.params.class_means;
  return s;
}

std::vector<ChainSample> ChangePointSampler::run(MoveCounters* counters) const {
  Rng rng(settings_.seed);
  ChainState state = initial_state(rng);
  std::vector<ChainSample> samples;
  samples.reserve(static_cast<std::size_t>(settings_.iterations - settings_.burn_in));
  for (int it = 0; it < settings_.iterations; ++it) {
    auto [next, sample] = sweep(std::move(state), rng, counters);
    state = std::move(next);
    if (it >= settings_.burn_in) samples.push_back(std::move(sample));
  }
  return samples;
}

std::vector<ChainSample> run_chain(const TimeSeries& x, const Hyperparams& hyper,
                                   const SamplerSettings& settings) {
  return ChangePointSampler(x, hyper, settings).run();
}

std::vector<double> marginal_change_probability(std::span<const ChainSample> samples,
                                                std::size_t n) {
  std::vector<double> p(n, 0.0);
  for (const auto& s : samples) {
    for (int tau : s.seg.change_points()) p[static_cast<std::size_t>(tau - 1)] += 1.0;
  }
  for (double& v : p) v /= static_cast<double>(samples.size());
  return p;
}

std::vector<double> pooled_change_probability(std::span<const ChainSample> samples, int window,
                                              std::size_t n) {
  std::vector<double> diff(n + 1, 0.0);
  const int last = static_cast<int>(n);
  for (const auto& s : samples) {
    int covered = 0;  // highest one-based index already counted for this sample
    for (int tau : s.seg.change_points()) {
      const int lo = std::max({1, tau - window, covered + 1});
      const int hi = std::min(last, tau + window);
      if (lo > hi) continue;
      diff[static_cast<std::size_t>(lo - 1)] += 1.0;
      diff[static_cast<std::size_t>(hi)] -= 1.0;
      covered = hi;
    }
  }
  std::vector<double> p(n);
  double run = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    run += diff[t];
    p[t] = run / static_cast<double>(samples.size());
  }
  return p;
}

std::vector<int> detect_peaks(std::span<const double> pooled, std::span<const double> marginal,
                              double threshold, int window) {
  const int n = static_cast<int>(pooled.size());
  std::vector<int> order;
  for (int t = 0; t < n; ++t) {
    if (pooled[static_cast<std::size_t>(t)] > threshold) order.push_back(t);
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto ua = static_cast<std::size_t>(a);
    const auto ub = static_cast<std::size_t>(b);
    if (pooled[ua] != pooled[ub]) return pooled[ua] > pooled[ub];
    if (marginal[ua] != marginal[ub]) return marginal[ua] > marginal[ub];
    return a < b;
  });
  std::vector<int> found;
  auto clashes = [&](int t) {
    return std::any_of(found.begin(), found.end(),
                       [&](int f) { return std::abs(f - t) <= window; });
  };
  for (int t : order) {
    if (clashes(t)) continue;
    int best = t;
    for (int s = std::max(0, t - window); s <= std::min(n - 1, t + window); ++s) {
      const double ms = marginal[static_cast<std::size_t>(s)];
      const double mb = marginal[static_cast<std::size_t>(best)];
      if (ms > mb || (ms == mb && std::abs(s - t) < std::abs(best - t))) best = s;
    }
    if (clashes(best)) continue;
    found.push_back(best);
  }
  for (int& f : found) ++f;  // one-based
  std::sort(found.begin(), found.end());
  return found;
}

DetectionResult summarize(std::span<const ChainSample> samples, const SamplerSettings& settings,
                          std::size_t n) {
  if (samples.empty()) throw ValidationError("cannot summarise an empty sample set");
  DetectionResult r;
  const auto marginal = marginal_change_probability(samples, n);
  r.posterior_prob = pooled_change_probability(samples, settings.window, n);
  r.change_points = detect_peaks(r.posterior_prob, marginal, settings.threshold, settings.window);

  const ChainSample* best = &samples[0];
  for (const auto& s : samples) {
    r.k_posterior[static_cast<int>(s.seg.num_changes())] += 1.0;
    if (s.log_joint > best->log_joint) best = &s;
  }
  for (auto& [k, p] : r.k_posterior) p /= static_cast<double>(samples.size());
  r.labels = best->labels.labels();
  // Class means averaged over the samples that visit the MAP configuration.
  r.class_means.assign(best->class_means.size(), 0.0);
  double visits = 0.0;
  for (const auto& s : samples) {
    if (s.seg != best->seg || s.labels != best->labels) continue;
    for (std::size_t v = 0; v < r.class_means.size(); ++v) r.class_means[v] += s.class_means[v];
    visits += 1.0;
  }
  for (double& m : r.class_means) m /= visits;
  r.num_classes = best->num_classes;
  r.map_change_points = best->seg.change_points();
  return r;
}

}  // namespace cpdp

#include "cpdp/dp_labels.hpp"

#include <cmath>
#include <numbers>

#include "cpdp/random.hpp"

namespace cpdp {

namespace {

void require_member(int v, const ChainState& state) {
  if (v < 0 || static_cast<std::size_t>(v) >= state.labels.num_classes()) {
    throw ValidationError("class " + std::to_string(v) + " does not exist");
  }
  for (int l : state.labels.labels()) {
    if (l == v) return;
  }
  throw ValidationError("class " + std::to_string(v) + " is empty; compact labels first");
}

// Sizes of every class with segment i taken out.
std::vector<int> sizes_without(std::size_t i, const ChainState& state) {
  auto sizes = state.labels.class_sizes();
  --sizes[static_cast<std::size_t>(state.labels[i])];
  return sizes;
}

void append_class(ClassParams& p, const FreshClass& c) {
  p.class_means.push_back(c.class_mean);
  p.class_mean_vars.push_back(c.class_mean_var);
  p.noise_vars.push_back(c.noise_var);
}

ChainState assign_label(std::size_t i, ChainState state, const LabelChoice& choice,
                        std::size_t pick, const FreshClass& fresh) {
  std::vector<int> labels = state.labels.labels();
  const int cls = choice.classes[pick];
  if (cls >= 0) {
    labels[i] = cls;
  } else {
    labels[i] = static_cast<int>(state.params.num_classes());
    append_class(state.params, fresh);
  }
  state.labels = LabelAssignment(std::move(labels));
  return compact_labels(std::move(state));
}

}  // namespace

double log_fresh_mean_predictive(double segment_mean, const Hyperparams& h) {
  const double a = 0.5 * h.classvar_shape;
  const double b = 0.5 * h.classvar_scale;
  const double spread = 1.0 + h.mean_scale;
  const double d = segment_mean - h.mean_loc;
  return a * std::log(b) - std::lgamma(a) + std::lgamma(a + 0.5) -
         0.5 * std::log(2.0 * std::numbers::pi * spread) -
         (a + 0.5) * std::log(b + 0.5 * d * d / spread);
}

FreshClass draw_fresh_class(const SuffStats& data, const Hyperparams& h, Rng& rng) {
  FreshClass c;
  const double inv_delta = 1.0 / h.mean_scale;
  const double shrink = data.count + inv_delta;
  const double mean = (data.sum + h.mean_loc * inv_delta) / shrink;
  const double off = data.count > 0 ? data.sum / data.count - h.mean_loc : 0.0;
  const double q = data.centered_sum_sq() +
                   data.count * off * off / (h.mean_scale * data.count + 1.0);
  c.noise_var = draw_inverse_gamma(0.5 * (h.noise_shape + data.count),
                                   0.5 * (h.noise_scale + q), rng);
  c.class_mean = draw_normal(mean, c.noise_var / shrink, rng);
  // The segment mean starts at the class mean, so the class-mean variance sees
  // one member with zero residual.
  c.class_mean_var = draw_inverse_gamma(0.5 * (h.classvar_shape + 1.0), 0.5 * h.classvar_scale, rng);
  return c;
}

NormalParams segment_mean_conditional(std::size_t i, const SeriesStats& x,
                                      const ChainState& state) {
  const auto& p = state.params;
  const auto v = static_cast<std::size_t>(state.labels[i]);
  const double noise = p.noise_vars[v];
  const double prior_var = p.class_mean_vars[v];
  if (!(noise > 0.0) || !(prior_var > 0.0)) {
    throw ValidationError("segment-mean update needs positive variances");
  }
  const SuffStats s = x.range(state.seg.segment(i, x.size()));
  if (s.count < 1.0) throw InvariantError("empty segment");
  const double prec = s.count / noise + 1.0 / prior_var;
  return {(s.sum / noise + p.class_means[v] / prior_var) / prec, 1.0 / prec};
}

std::vector<double> sample_segment_means(const SeriesStats& x, const ChainState& state,
                                         const Hyperparams& /*hyper*/, Rng& rng) {
  std::vector<double> out(state.seg.num_segments());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const NormalParams c = segment_mean_conditional(i, x, state);
    out[i] = draw_normal(c.mean, c.var, rng);
  }
  return out;
}

LabelChoice conditional_label_weights(std::size_t i, const ChainState& state,
                                      const Hyperparams& h) {
  const auto sizes = sizes_without(i, state);
  const double mu = state.params.segment_means[i];
  LabelChoice out;
  for (std::size_t v = 0; v < sizes.size(); ++v) {
    if (sizes[v] == 0) continue;
    double w = std::log(static_cast<double>(sizes[v]));
    if (!h.prior_only) {
      w += log_normal_pdf(mu, state.params.class_means[v], state.params.class_mean_vars[v]);
    }
    out.classes.push_back(static_cast<int>(v));
    out.log_weights.push_back(w);
  }
  out.classes.push_back(-1);
  out.log_weights.push_back(std::log(h.alpha) +
                            (h.prior_only ? 0.0 : log_fresh_mean_predictive(mu, h)));
  return out;
}

ChainState gibbs_update_label(std::size_t i, ChainState state, const Hyperparams& h, Rng& rng) {
  if (i >= state.seg.num_segments()) throw ValidationError("segment index out of range");
  const LabelChoice choice = conditional_label_weights(i, state, h);
  const std::size_t pick = draw_log_categorical(choice.log_weights, rng);
  FreshClass fresh;
  if (choice.classes[pick] < 0) {
    // Posterior of (mu-hat, sigma-hat^2) given the single member mu_i.
    const double mu = state.params.segment_means[i];
    const double spread = 1.0 + h.mean_scale;
    const double d = mu - h.mean_loc;
    fresh.class_mean_var = draw_inverse_gamma(0.5 * (h.classvar_shape + 1.0),
                                              0.5 * h.classvar_scale + 0.5 * d * d / spread, rng);
    fresh.class_mean = draw_normal((h.mean_loc + h.mean_scale * mu) / spread,
                                   h.mean_scale * fresh.class_mean_var / spread, rng);
    fresh.noise_var = draw_inverse_gamma(0.5 * h.noise_shape, 0.5 * h.noise_scale, rng);
  }
  return assign_label(i, std::move(state), choice, pick, fresh);
}

LabelChoice collapsed_label_weights(std::size_t i, const ChainState& state,
                                    const CollapsedModel& model) {
  const auto sizes = sizes_without(i, state);
  std::vector<SuffStats> pooled(sizes.size());
  for (std::size_t j = 0; j < state.seg.num_segments(); ++j) {
    if (j == i) continue;
    pooled[static_cast<std::size_t>(state.labels[j])] += model.segment_stats(state.seg, j);
  }
  const SuffStats own = model.segment_stats(state.seg, i);
  LabelChoice out;
  for (std::size_t v = 0; v < sizes.size(); ++v) {
    if (sizes[v] == 0) continue;
    const double w = model.class_term(pooled[v] + own) - model.class_term(pooled[v]) +
                     model.label_prior_term(sizes[v] + 1) - model.label_prior_term(sizes[v]);
    out.classes.push_back(static_cast<int>(v));
    out.log_weights.push_back(w);
  }
  out.classes.push_back(-1);
  out.log_weights.push_back(model.class_term(own) + model.label_prior_term(1));
  return out;
}

ChainState collapsed_update_label(std::size_t i, ChainState state, const CollapsedModel& model,
                                  Rng& rng) {
  if (i >= state.seg.num_segments()) throw ValidationError("segment index out of range");
  const LabelChoice choice = collapsed_label_weights(i, state, model);
  const std::size_t pick = draw_log_categorical(choice.log_weights, rng);
  FreshClass fresh;
  if (choice.classes[pick] < 0) {
    fresh = draw_fresh_class(model.segment_stats(state.seg, i), model.hyper(), rng);
  }
  return assign_label(i, std::move(state), choice, pick, fresh);
}

NormalParams class_mean_conditional(int v, const ChainState& state, const Hyperparams& h) {
  require_member(v, state);
  const auto cv = static_cast<std::size_t>(v);
  const double between = state.params.class_mean_vars[cv];
  const double prior_var = h.mean_scale * state.params.noise_vars[cv];
  double n = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < state.labels.size(); ++i) {
    if (state.labels[i] != v) continue;
    n += 1.0;
    sum += state.params.segment_means[i];
  }
  const double prec = n / between + 1.0 / prior_var;
  return {(sum / between + h.mean_loc / prior_var) / prec, 1.0 / prec};
}

InvGammaParams class_var_conditional(int v, const ChainState& state, const Hyperparams& h) {
  require_member(v, state);
  const double centre = state.params.class_means[static_cast<std::size_t>(v)];
  double n = 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < state.labels.size(); ++i) {
    if (state.labels[i] != v) continue;
    const double d = state.params.segment_means[i] - centre;
    n += 1.0;
    ss += d * d;
  }
  return {0.5 * (h.classvar_shape + n), 0.5 * (h.classvar_scale + ss)};
}

InvGammaParams noise_var_conditional(int v, const SeriesStats& x, const ChainState& state,
                                     const Hyperparams& h) {
  require_member(v, state);
  double d = 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < state.labels.size(); ++i) {
    if (state.labels[i] != v) continue;
    const SuffStats s = x.range(state.seg.segment(i, x.size()));
    d += s.count;
    ss += s.sum_sq_about(state.params.segment_means[i]);
  }
  return {0.5 * (h.noise_shape + d), 0.5 * (h.noise_scale + ss)};
}

double sample_class_mean(int v, const ChainState& state, const Hyperparams& h, Rng& rng) {
  const NormalParams c = class_mean_conditional(v, state, h);
  return draw_normal(c.mean, c.var, rng);
}

double sample_class_var(int v, const ChainState& state, const Hyperparams& h, Rng& rng) {
  const InvGammaParams c = class_var_conditional(v, state, h);
  return draw_inverse_gamma(c.shape, c.scale, rng);
}

double sample_noise_var(int v, const SeriesStats& x, const ChainState& state,
                        const Hyperparams& h, Rng& rng) {
  const InvGammaParams c = noise_var_conditional(v, x, state, h);
  return draw_inverse_gamma(c.shape, c.scale, rng);
}

ChainState compact_labels(ChainState state) {
  if (state.labels.is_compact() &&
      state.params.num_classes() == state.labels.num_classes()) {
    return state;
  }
  const std::vector<int> used = state.labels.used_classes();
  std::vector<int> remap(state.labels.num_classes(), -1);
  ClassParams p;
  p.segment_means = std::move(state.params.segment_means);
  for (std::size_t k = 0; k < used.size(); ++k) {
    const auto old = static_cast<std::size_t>(used[k]);
    remap[old] = static_cast<int>(k);
    if (old < state.params.num_classes()) {
      p.class_means.push_back(state.params.class_means[old]);
      p.class_mean_vars.push_back(state.params.class_mean_vars[old]);
      p.noise_vars.push_back(state.params.noise_vars[old]);
    }
  }
  std::vector<int> labels = state.labels.labels();
  for (int& l : labels) l = remap[static_cast<std::size_t>(l)];
  state.labels = LabelAssignment(std::move(labels));
  state.params = std::move(p);
  return state;
}

}  // namespace cpdp

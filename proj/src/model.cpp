#include "cpdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cpdp {

double SuffStats::centered_sum_sq() const {
  if (count <= 0.0) return 0.0;
  return std::max(0.0, sum_sq - sum * sum / count);
}

double SuffStats::sum_sq_about(double centre) const {
  if (count <= 0.0) return 0.0;
  const double d = sum / count - centre;
  return centered_sum_sq() + count * d * d;
}

SeriesStats::SeriesStats(const TimeSeries& x)
    : n_(x.size()), sum_(x.size() + 1, 0.0), sum_sq_(x.size() + 1, 0.0) {
  for (std::size_t i = 0; i < n_; ++i) {
    sum_[i + 1] = sum_[i] + x[i];
    sum_sq_[i + 1] = sum_sq_[i] + x[i] * x[i];
  }
}

SuffStats SeriesStats::range(SegmentRange r) const {
  return {static_cast<double>(r.length()), sum_[r.end] - sum_[r.begin],
          sum_sq_[r.end] - sum_sq_[r.begin]};
}

namespace {

// Quadratic form (y - loc)' P (y - loc) with P = I - 11'/(d + 1/delta), written
// as the centred sum of squares plus a shrunken mean offset.
double shrunk_quadratic(double count, double centered_ss, double mean, const Hyperparams& h) {
  const double off = mean - h.mean_loc;
  return centered_ss + count * off * off / (h.mean_scale * count + 1.0);
}

double marginal_from_quadratic(double d, double q, const Hyperparams& h) {
  const double nu = h.noise_shape;
  const double g = h.noise_scale;
  return std::lgamma(0.5 * (d + nu)) - std::lgamma(0.5 * nu) + 0.5 * nu * std::log(g) -
         0.5 * d * std::log(std::numbers::pi) - 0.5 * std::log(h.mean_scale * d + 1.0) -
         0.5 * (d + nu) * std::log(g + q);
}

}  // namespace

double log_class_marginal(std::span<const double> y, const Hyperparams& hyper) {
  if (y.empty()) return 0.0;
  double mean = 0.0;
  for (double v : y) {
    if (!std::isfinite(v)) throw ValidationError("non-finite value in class data");
    mean += v;
  }
  const double d = static_cast<double>(y.size());
  mean /= d;
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  return marginal_from_quadratic(d, shrunk_quadratic(d, ss, mean, hyper), hyper);
}

double log_class_marginal(const SuffStats& s, const Hyperparams& hyper) {
  if (s.count <= 0.0) return 0.0;
  const double q = shrunk_quadratic(s.count, s.centered_sum_sq(), s.sum / s.count, hyper);
  return marginal_from_quadratic(s.count, q, hyper);
}

double log_segmentation_prior(std::size_t k, std::size_t n) {
  const double a = static_cast<double>(k) + 1.0;
  const double b = static_cast<double>(n) - static_cast<double>(k);
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double log_partition_prior(std::span<const int> class_sizes, double alpha) {
  double total = 0.0;
  double n = 0.0;
  for (int s : class_sizes) {
    if (s <= 0) continue;
    total += std::log(alpha) + std::lgamma(static_cast<double>(s));
    n += s;
  }
  return total + std::lgamma(alpha) - std::lgamma(alpha + n);
}

namespace {

void check_label_count(const LabelAssignment& labels, const Segmentation& seg) {
  if (labels.size() != seg.num_segments()) {
    throw ValidationError("expected " + std::to_string(seg.num_segments()) + " labels, got " +
                          std::to_string(labels.size()));
  }
}

}  // namespace

double log_joint_collapsed(const TimeSeries& x, const Segmentation& seg,
                           const LabelAssignment& labels, const Hyperparams& hyper) {
  const std::size_t n = x.size();
  seg.validate(n);
  check_label_count(labels, seg);

  double total = log_segmentation_prior(seg.num_changes(), n);
  if (!hyper.prior_only) {
    std::vector<std::vector<double>> pooled(labels.num_classes());
    for (std::size_t i = 0; i < seg.num_segments(); ++i) {
      const auto r = seg.segment(i, n);
      auto& dst = pooled[static_cast<std::size_t>(labels[i])];
      dst.insert(dst.end(), x.values().begin() + static_cast<std::ptrdiff_t>(r.begin),
                 x.values().begin() + static_cast<std::ptrdiff_t>(r.end));
    }
    for (const auto& y : pooled) total += log_class_marginal(y, hyper);
  }
  if (hyper.eppf_in_ratio) {
    const auto sizes = labels.class_sizes();
    total += log_partition_prior(sizes, hyper.alpha);
  }
  return total;
}

double log_likelihood_given_params(const TimeSeries& x, const Segmentation& seg,
                                   const LabelAssignment& labels, const ClassParams& params) {
  const std::size_t n = x.size();
  seg.validate(n);
  check_label_count(labels, seg);
  if (params.num_classes() < labels.num_classes()) {
    throw ValidationError("class parameters do not match labels");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < seg.num_segments(); ++i) {
    const auto v = static_cast<std::size_t>(labels[i]);
    const double mean = params.class_means[v];
    const double var = params.noise_vars[v];
    if (!(var > 0.0) || !std::isfinite(var)) {
      throw ValidationError("noise variance must be positive");
    }
    const auto r = seg.segment(i, n);
    double ss = 0.0;
    for (std::size_t t = r.begin; t < r.end; ++t) ss += (x[t] - mean) * (x[t] - mean);
    total += -0.5 * static_cast<double>(r.length()) * std::log(2.0 * std::numbers::pi * var) -
             0.5 * ss / var;
  }
  return total;
}

CollapsedModel::CollapsedModel(const TimeSeries& x, const Hyperparams& hyper)
    : stats_(x), hyper_(hyper), size_const_(x.size() + 1, 0.0) {
  hyper_.validate(x.size());
  const double nu = hyper_.noise_shape;
  const double base = -std::lgamma(0.5 * nu) + 0.5 * nu * std::log(hyper_.noise_scale);
  for (std::size_t d = 0; d <= x.size(); ++d) {
    const double dd = static_cast<double>(d);
    size_const_[d] = std::lgamma(0.5 * (dd + nu)) + base -
                     0.5 * dd * std::log(std::numbers::pi) -
                     0.5 * std::log(hyper_.mean_scale * dd + 1.0);
  }
  log_alpha_ = std::log(hyper_.alpha);
  lgamma_alpha_ = std::lgamma(hyper_.alpha);
}

double CollapsedModel::class_term(const SuffStats& s) const {
  if (hyper_.prior_only || s.count <= 0.0) return 0.0;
  const auto d = static_cast<std::size_t>(std::lround(s.count));
  const double q = shrunk_quadratic(s.count, s.centered_sum_sq(), s.sum / s.count, hyper_);
  return size_const_[d] - 0.5 * (s.count + hyper_.noise_shape) * std::log(hyper_.noise_scale + q);
}

double CollapsedModel::structure_term(std::size_t k) const {
  double t = log_segmentation_prior(k, size());
  if (hyper_.eppf_in_ratio) {
    t += lgamma_alpha_ - std::lgamma(hyper_.alpha + static_cast<double>(k) + 1.0);
  }
  return t;
}

double CollapsedModel::class_prior_term(int n) const {
  if (!hyper_.eppf_in_ratio || n <= 0) return 0.0;
  return log_alpha_ + std::lgamma(static_cast<double>(n));
}

double CollapsedModel::label_prior_term(int n) const {
  if (n <= 0) return 0.0;
  return log_alpha_ + std::lgamma(static_cast<double>(n));
}

double CollapsedModel::log_joint(const Segmentation& seg, const LabelAssignment& labels) const {
  std::vector<SuffStats> pooled(labels.num_classes());
  std::vector<int> sizes(labels.num_classes(), 0);
  for (std::size_t i = 0; i < seg.num_segments(); ++i) {
    const auto v = static_cast<std::size_t>(labels[i]);
    pooled[v] += segment_stats(seg, i);
    ++sizes[v];
  }
  double total = structure_term(seg.num_changes());
  for (std::size_t v = 0; v < pooled.size(); ++v) {
    total += class_term(pooled[v]) + class_prior_term(sizes[v]);
  }
  return total;
}

}  // namespace cpdp

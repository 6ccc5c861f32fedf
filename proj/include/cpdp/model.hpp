#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cpdp/types.hpp"

namespace cpdp {

/// Count, sum and sum of squares of a block of observations.
struct SuffStats {
  double count = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;

  SuffStats& operator+=(const SuffStats& o) {
    count += o.count;
    sum += o.sum;
    sum_sq += o.sum_sq;
    return *this;
  }
  SuffStats& operator-=(const SuffStats& o) {
    count -= o.count;
    sum -= o.sum;
    sum_sq -= o.sum_sq;
    return *this;
  }
  friend SuffStats operator+(SuffStats a, const SuffStats& b) { return a += b; }
  friend SuffStats operator-(SuffStats a, const SuffStats& b) { return a -= b; }

  /// Sum of squared deviations about the block mean (clamped at zero).
  double centered_sum_sq() const;
  /// Sum of squared deviations about an arbitrary centre.
  double sum_sq_about(double centre) const;
};

/// Prefix sums over a series so any segment's statistics cost O(1).
class SeriesStats {
 public:
  explicit SeriesStats(const TimeSeries& x);

  std::size_t size() const noexcept { return n_; }
  SuffStats range(SegmentRange r) const;
  SuffStats range(std::size_t begin, std::size_t end) const { return range({begin, end}); }

 private:
  std::size_t n_ = 0;
  std::vector<double> sum_;
  std::vector<double> sum_sq_;
};

/// Log marginal density of one class's pooled data with the class mean and
/// noise variance integrated out: y_j ~ N(m, s2), m ~ N(mean_loc, mean_scale*s2),
/// s2 ~ IG(noise_shape, noise_scale). Zero for an empty class.
double log_class_marginal(std::span<const double> y, const Hyperparams& hyper);
double log_class_marginal(const SuffStats& stats, const Hyperparams& hyper);

/// log B(K+1, N-K): the Bernoulli change-point prior with its rate integrated
/// over a uniform prior.
double log_segmentation_prior(std::size_t k, std::size_t n);

/// CRP log partition probability for the given class sizes.
double log_partition_prior(std::span<const int> class_sizes, double alpha);

/// Collapsed log posterior of (tau, K, c) up to an additive constant. Labels
/// need not be compact; unused class ids contribute nothing.
double log_joint_collapsed(const TimeSeries& x, const Segmentation& seg,
                           const LabelAssignment& labels, const Hyperparams& hyper);

/// Gaussian log likelihood with each segment at its class mean and noise variance.
double log_likelihood_given_params(const TimeSeries& x, const Segmentation& seg,
                                   const LabelAssignment& labels, const ClassParams& params);

/// Collapsed-posterior evaluator bound to one series and hyperparameter set.
///
/// Caches prefix sums and the log-gamma terms that depend only on class size,
/// so a class term costs one logarithm.
class CollapsedModel {
 public:
  CollapsedModel(const TimeSeries& x, const Hyperparams& hyper);

  const Hyperparams& hyper() const noexcept { return hyper_; }
  const SeriesStats& stats() const noexcept { return stats_; }
  std::size_t size() const noexcept { return stats_.size(); }

  SuffStats segment_stats(const Segmentation& seg, std::size_t i) const {
    return stats_.range(seg.segment(i, size()));
  }

  /// log_class_marginal of a class with the given pooled statistics.
  double class_term(const SuffStats& s) const;
  /// Beta change-point prior plus the K-dependent EPPF normaliser.
  double structure_term(std::size_t k) const;
  /// Log EPPF contribution of one class of size n (log alpha + lgamma(n)).
  double class_prior_term(int n) const;
  /// CRP weight term used by the label conditional, whatever eppf_in_ratio says.
  double label_prior_term(int n) const;

  /// Same value as log_joint_collapsed, from prefix sums.
  double log_joint(const Segmentation& seg, const LabelAssignment& labels) const;

 private:
  SeriesStats stats_;
  Hyperparams hyper_;
  std::vector<double> size_const_;  // per class size d: lgamma terms and det factor
  double log_alpha_ = 0.0;
  double lgamma_alpha_ = 0.0;
};

}  // namespace cpdp

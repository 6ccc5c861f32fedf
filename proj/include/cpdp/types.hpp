#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpdp {

using Rng = std::mt19937_64;

/// Raised when a value violates a documented domain invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by the sampler when its own bookkeeping breaks an invariant.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Ordered, finite observations x_1..x_N with N >= 2.
class TimeSeries {
 public:
  TimeSeries() = default;
  explicit TimeSeries(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

 private:
  std::vector<double> values_;
};

/// Half-open, zero-based index range [begin, end) of one segment.
struct SegmentRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end - begin; }
  friend bool operator==(const SegmentRange&, const SegmentRange&) = default;
};

/// Change-point times tau_1 < ... < tau_K, each in [2, N-1].
///
/// A change point tau is the one-based index of the last observation of the
/// segment to its left, so segment i covers observations tau_i+1..tau_{i+1}
/// (one-based, inclusive) with the first segment starting at observation 1 and
/// the last ending at N. In zero-based half-open terms the boundaries are
/// exactly the tau values: [0, tau_1), [tau_1, tau_2), ..., [tau_K, N).
class Segmentation {
 public:
  Segmentation() = default;
  explicit Segmentation(std::vector<int> change_points)
      : change_points_(std::move(change_points)) {}

  std::size_t num_changes() const noexcept { return change_points_.size(); }
  std::size_t num_segments() const noexcept { return change_points_.size() + 1; }
  const std::vector<int>& change_points() const noexcept { return change_points_; }

  /// Throws ValidationError unless strictly increasing within [2, n-1].
  void validate(std::size_t n) const;

  /// Zero-based [begin, end) of segment i for a series of length n.
  SegmentRange segment(std::size_t i, std::size_t n) const;

  /// Index of the segment that a new change point at tau would split.
  std::size_t segment_containing(int tau) const;

  bool contains(int tau) const;

  /// Returns a copy with tau inserted in order. Caller guarantees tau is free.
  Segmentation with_change(int tau) const;
  /// Returns a copy with the j-th change point (zero-based) removed.
  Segmentation without_change(std::size_t j) const;
  /// Returns a copy with the j-th change point moved to tau, order preserved.
  Segmentation with_moved(std::size_t j, int tau) const;

  friend bool operator==(const Segmentation&, const Segmentation&) = default;

 private:
  std::vector<int> change_points_;
};

/// Per-segment class labels c_0..c_K in compact form.
class LabelAssignment {
 public:
  LabelAssignment() = default;
  /// Accepts any non-negative labels; num_classes() is max label + 1.
  explicit LabelAssignment(std::vector<int> labels);

  /// Identity partition: every segment in its own class.
  static LabelAssignment singletons(std::size_t num_segments);
  /// All segments in class 0.
  static LabelAssignment single_class(std::size_t num_segments);

  std::size_t size() const noexcept { return labels_.size(); }
  int operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  std::size_t num_classes() const noexcept { return num_classes_; }

  /// Member count per class (length num_classes()).
  std::vector<int> class_sizes() const;

  /// Throws ValidationError unless labels cover [0, V) with no empty class.
  void validate(std::size_t num_segments) const;
  bool is_compact() const;

  /// Old class id of each class after compaction, in increasing id order.
  std::vector<int> used_classes() const;

  friend bool operator==(const LabelAssignment&, const LabelAssignment&) = default;

 private:
  std::vector<int> labels_;
  std::size_t num_classes_ = 0;
};

/// Class-level and segment-level parameters of the DP mixture layer.
struct ClassParams {
  std::vector<double> class_means;      // mu-hat_v
  std::vector<double> class_mean_vars;  // sigma-hat^2_v
  std::vector<double> noise_vars;       // sigma^2_v
  std::vector<double> segment_means;    // mu_i

  std::size_t num_classes() const noexcept { return class_means.size(); }
  void validate(std::size_t num_classes, std::size_t num_segments) const;

  friend bool operator==(const ClassParams&, const ClassParams&) = default;
};

/// Model hyperparameters.
///
/// Inverse-Gamma priors written IG(a, b) use shape a/2 and scale b/2, so the
/// noise prior IG(noise_shape, noise_scale) has mean
/// (noise_scale/2) / (noise_shape/2 - 1) when noise_shape > 2.
struct Hyperparams {
  double alpha = 2.0;            // DP concentration
  double mean_loc = 0.0;         // class-mean prior location
  double mean_scale = 1.0;       // class-mean prior variance multiplier (delta)
  double noise_shape = 2.0;      // nu
  double noise_scale = 20.0;     // gamma
  double classvar_shape = 0.01;  // beta
  double classvar_scale = 200.0; // omega
  int k_max = 50;
  /// Include the CRP partition prior in the collapsed posterior over (tau, K).
  bool eppf_in_ratio = true;
  /// Drop every data-dependent term (prior-only runs for diagnostics).
  bool prior_only = false;

  /// Defaults with k_max = min(n - 2, 50).
  static Hyperparams defaults_for(std::size_t n);
  void validate(std::size_t n) const;

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

/// Full Markov-chain state.
struct ChainState {
  Segmentation seg;
  LabelAssignment labels;
  ClassParams params;

  void validate(std::size_t n, const Hyperparams& hyper) const;
  friend bool operator==(const ChainState&, const ChainState&) = default;
};

/// Zero-based [begin, end) ranges of the K+1 segments, in order.
std::vector<SegmentRange> segment_slices(const Segmentation& seg, std::size_t n);

}  // namespace cpdp

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "cpdp/model.hpp"
#include "cpdp/types.hpp"

namespace cpdp {

/// Probabilities of proposing a birth, death or update move at a given K.
struct MoveProbabilities {
  double birth = 0.0;
  double death = 0.0;
  double update = 0.0;

  /// Thirds in the interior; (1/2, 0, 1/2) at K = 0; (0, 1/2, 1/2) at K = k_max.
  static MoveProbabilities at(std::size_t k, int k_max);
};

/// How segment labels are resampled in the Gibbs scan.
enum class LabelKernel {
  collapsed,    // class parameters integrated out; targets the collapsed posterior
  conditional,  // given segment means and class parameters
};

/// How the segments touched by a birth, death or update move are labelled.
enum class MoveLabelRule {
  marginal,       // labels summed out of the ratio, then drawn from their conditional
  fresh,          // fresh singleton classes; only from singleton classes
  fresh_literal,  // fresh singleton classes unconditionally (not reversible)
};

struct SamplerSettings {
  int iterations = 20000;
  int burn_in = 10000;
  std::uint64_t seed = 1;
  double threshold = 0.5;  // summary detection threshold rho
  int window = 3;          // summary pooling half-width w_s
  LabelKernel label_kernel = LabelKernel::collapsed;
  MoveLabelRule move_labels = MoveLabelRule::marginal;
  /// Keep every segment in its own class (label-free sampler).
  bool pin_labels = false;
  /// Change points of the initial state; empty starts from K = 0.
  std::vector<int> initial_change_points;

  void validate() const;
};

struct ChainSample {
  Segmentation seg;
  LabelAssignment labels;
  std::size_t num_classes = 0;
  double log_joint = 0.0;
  std::vector<std::uint8_t> indicator;  // indicator[t-1] == 1 iff t is a change point
  std::vector<double> class_means;
};

struct Proposal {
  ChainState state;
  double log_accept_ratio = 0.0;
};

struct DetectionResult {
  std::vector<int> change_points;
  std::vector<double> posterior_prob;  // window-pooled, one per index 1..N
  std::vector<int> labels;             // per segment of map_change_points
  std::vector<double> class_means;
  std::size_t num_classes = 0;
  std::map<int, double> k_posterior;
  std::vector<int> map_change_points;

  friend bool operator==(const DetectionResult&, const DetectionResult&) = default;
};

/// Counts of proposed and accepted moves over a run.
struct MoveCounters {
  std::array<long, 3> proposed{};  // birth, death, update
  std::array<long, 3> accepted{};
};

/// Metropolis-Hastings-within-Gibbs sampler over (tau, K, c) and the class
/// parameters for one series.
class ChangePointSampler {
 public:
  ChangePointSampler(const TimeSeries& x, const Hyperparams& hyper, SamplerSettings settings);

  const CollapsedModel& model() const noexcept { return model_; }
  const SamplerSettings& settings() const noexcept { return settings_; }
  std::size_t size() const noexcept { return model_.size(); }

  ChainState initial_state(Rng& rng) const;

  /// Birth at a uniformly chosen free index. A log ratio of -inf marks a
  /// proposal that must be rejected.
  Proposal propose_birth(const ChainState& state, Rng& rng) const;
  Proposal propose_birth_at(const ChainState& state, int tau, Rng& rng) const;

  /// Death of a uniformly chosen change point.
  Proposal propose_death(const ChainState& state, Rng& rng) const;
  Proposal propose_death_at(const ChainState& state, std::size_t j, Rng& rng) const;

  /// Composite death-then-birth of change point j into position tau, which must
  /// lie strictly between its neighbours.
  Proposal propose_move_at(const ChainState& state, std::size_t j, int tau, Rng& rng) const;

  /// Positions change point j may move to.
  std::pair<int, int> move_range(const ChainState& state, std::size_t j) const;

  /// Left-to-right composite update of every change point.
  ChainState move_update(ChainState state, Rng& rng, MoveCounters* counters = nullptr) const;

  /// Gibbs scan over segment means, labels and class parameters.
  ChainState gibbs_scan(ChainState state, Rng& rng) const;

  /// One birth/death/update move followed by a Gibbs scan.
  std::pair<ChainState, ChainSample> sweep(ChainState state, Rng& rng,
                                           MoveCounters* counters = nullptr) const;

  ChainSample record(const ChainState& state) const;

  /// Post-burn-in samples; deterministic given the settings' seed.
  std::vector<ChainSample> run(MoveCounters* counters = nullptr) const;

 private:
  struct Completion {
    std::array<int, 2> classes{};  // >= 0 existing id, -1 first new class, -2 second new class
    double log_joint = 0.0;
  };

  std::vector<Completion> completions(const Segmentation& seg, const std::vector<int>& labels,
                                      std::span<const std::size_t> free) const;
  ChainState build_state(Segmentation seg, std::vector<int> labels, const ChainState& from,
                         std::span<const std::size_t> free, const std::array<int, 2>& classes,
                         std::span<const double> kept_means, Rng& rng) const;
  Proposal relabelled(const ChainState& state, Segmentation seg, std::vector<int> labels,
                      std::vector<double> kept_means, std::span<const std::size_t> free_new,
                      std::span<const std::size_t> free_old, double log_q, Rng& rng) const;
  bool accept(double log_ratio, Rng& rng) const;

  CollapsedModel model_;
  SamplerSettings settings_;
};

/// Runs one chain and returns its post-burn-in samples.
std::vector<ChainSample> run_chain(const TimeSeries& x, const Hyperparams& hyper,
                                   const SamplerSettings& settings);

/// Fraction of samples with a change point within +-window of each index 1..N.
std::vector<double> pooled_change_probability(std::span<const ChainSample> samples,
                                              int window, std::size_t n);

/// Per-index change-point frequency, one entry per index 1..N.
std::vector<double> marginal_change_probability(std::span<const ChainSample> samples,
                                                std::size_t n);

/// Greedy non-overlapping peaks of the pooled probability above threshold,
/// each placed at the most probable single index in its window.
std::vector<int> detect_peaks(std::span<const double> pooled, std::span<const double> marginal,
                              double threshold, int window);

/// Point estimates from a set of samples (possibly pooled over chains).
DetectionResult summarize(std::span<const ChainSample> samples, const SamplerSettings& settings,
                          std::size_t n);

}  // namespace cpdp

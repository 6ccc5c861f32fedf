#pragma once

#include <cstddef>
#include <vector>

#include "cpdp/model.hpp"
#include "cpdp/types.hpp"

namespace cpdp {

/// Parameters for a newly opened class.
struct FreshClass {
  double class_mean = 0.0;
  double class_mean_var = 1.0;
  double noise_var = 1.0;
};

/// Candidate classes for one segment's label and their unnormalised log weights.
/// A class id of -1 stands for a fresh class.
struct LabelChoice {
  std::vector<int> classes;
  std::vector<double> log_weights;
};

/// Log density of a segment mean under the base measure with the class mean and
/// class-mean variance integrated out (a Student-t with classvar_shape degrees
/// of freedom).
double log_fresh_mean_predictive(double segment_mean, const Hyperparams& hyper);

/// Class parameters drawn from the collapsed posterior given a block of data;
/// used when a sampler move opens a class for that block.
FreshClass draw_fresh_class(const SuffStats& data, const Hyperparams& hyper, Rng& rng);

struct NormalParams {
  double mean = 0.0;
  double var = 1.0;
};

/// Inverse-Gamma with the given shape and scale (not halved).
struct InvGammaParams {
  double shape = 1.0;
  double scale = 1.0;
};

/// Full conditionals of the Gibbs layer.
NormalParams segment_mean_conditional(std::size_t i, const SeriesStats& x,
                                      const ChainState& state);
NormalParams class_mean_conditional(int v, const ChainState& state, const Hyperparams& hyper);
InvGammaParams class_var_conditional(int v, const ChainState& state, const Hyperparams& hyper);
InvGammaParams noise_var_conditional(int v, const SeriesStats& x, const ChainState& state,
                                     const Hyperparams& hyper);

/// Conjugate normal draw of every segment mean mu_i.
std::vector<double> sample_segment_means(const SeriesStats& x, const ChainState& state,
                                         const Hyperparams& hyper, Rng& rng);

/// Weights of the label conditional given segment means and class parameters.
LabelChoice conditional_label_weights(std::size_t i, const ChainState& state,
                                      const Hyperparams& hyper);

/// Gibbs update of label c_i given segment means and class parameters.
/// A fresh class takes (mu-hat, sigma-hat^2) from its posterior given mu_i and a
/// noise variance from its prior. Returns a compact state.
ChainState gibbs_update_label(std::size_t i, ChainState state, const Hyperparams& hyper,
                              Rng& rng);

/// Weights of the label conditional with class parameters integrated out,
/// i.e. proportional to the collapsed joint with c_i set to each candidate.
LabelChoice collapsed_label_weights(std::size_t i, const ChainState& state,
                                    const CollapsedModel& model);

/// Gibbs update of c_i under the collapsed posterior. Returns a compact state.
ChainState collapsed_update_label(std::size_t i, ChainState state, const CollapsedModel& model,
                                  Rng& rng);

/// mu-hat_v given member segment means, prior N(mean_loc, mean_scale * sigma^2_v).
double sample_class_mean(int v, const ChainState& state, const Hyperparams& hyper, Rng& rng);

/// sigma-hat^2_v given member segment means and mu-hat_v.
double sample_class_var(int v, const ChainState& state, const Hyperparams& hyper, Rng& rng);

/// sigma^2_v given residuals of class-v data about their segment means.
double sample_noise_var(int v, const SeriesStats& x, const ChainState& state,
                        const Hyperparams& hyper, Rng& rng);

/// Renumbers classes to 0..V-1 in increasing id order, dropping empty ones and
/// permuting class parameters to match.
ChainState compact_labels(ChainState state);

}  // namespace cpdp

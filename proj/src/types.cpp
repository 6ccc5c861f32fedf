#include "cpdp/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cpdp {

namespace {

std::string join(const std::vector<int>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out + "]";
}

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

TimeSeries::TimeSeries(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) {
    throw ValidationError("time series needs at least 2 observations, got " +
                          std::to_string(values_.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw ValidationError("non-finite observation at index " + std::to_string(i + 1));
    }
  }
}

void Segmentation::validate(std::size_t n) const {
  int prev = 1;
  for (int tau : change_points_) {
    if (tau <= prev || tau > static_cast<int>(n) - 1) {
      throw ValidationError("invalid change points " + join(change_points_) +
                            " for series of length " + std::to_string(n));
    }
    prev = tau;
  }
}

SegmentRange Segmentation::segment(std::size_t i, std::size_t n) const {
  const std::size_t begin = i == 0 ? 0 : static_cast<std::size_t>(change_points_[i - 1]);
  const std::size_t end =
      i == change_points_.size() ? n : static_cast<std::size_t>(change_points_[i]);
  return {begin, end};
}

std::size_t Segmentation::segment_containing(int tau) const {
  return static_cast<std::size_t>(
      std::lower_bound(change_points_.begin(), change_points_.end(), tau) -
      change_points_.begin());
}

bool Segmentation::contains(int tau) const {
  return std::binary_search(change_points_.begin(), change_points_.end(), tau);
}

Segmentation Segmentation::with_change(int tau) const {
  std::vector<int> cp = change_points_;
  cp.insert(std::lower_bound(cp.begin(), cp.end(), tau), tau);
  return Segmentation(std::move(cp));
}

Segmentation Segmentation::without_change(std::size_t j) const {
  std::vector<int> cp = change_points_;
  cp.erase(cp.begin() + static_cast<std::ptrdiff_t>(j));
  return Segmentation(std::move(cp));
}

Segmentation Segmentation::with_moved(std::size_t j, int tau) const {
  std::vector<int> cp = change_points_;
  cp[j] = tau;
  return Segmentation(std::move(cp));
}

std::vector<SegmentRange> segment_slices(const Segmentation& seg, std::size_t n) {
  seg.validate(n);
  std::vector<SegmentRange> out;
  out.reserve(seg.num_segments());
  for (std::size_t i = 0; i < seg.num_segments(); ++i) out.push_back(seg.segment(i, n));
  return out;
}

LabelAssignment::LabelAssignment(std::vector<int> labels) : labels_(std::move(labels)) {
  int max_label = -1;
  for (int l : labels_) {
    if (l < 0) throw ValidationError("negative class label " + std::to_string(l));
    max_label = std::max(max_label, l);
  }
  num_classes_ = static_cast<std::size_t>(max_label + 1);
}

LabelAssignment LabelAssignment::singletons(std::size_t num_segments) {
  std::vector<int> labels(num_segments);
  for (std::size_t i = 0; i < num_segments; ++i) labels[i] = static_cast<int>(i);
  return LabelAssignment(std::move(labels));
}

LabelAssignment LabelAssignment::single_class(std::size_t num_segments) {
  return LabelAssignment(std::vector<int>(num_segments, 0));
}

std::vector<int> LabelAssignment::class_sizes() const {
  std::vector<int> sizes(num_classes_, 0);
  for (int l : labels_) ++sizes[static_cast<std::size_t>(l)];
  return sizes;
}

bool LabelAssignment::is_compact() const {
  const auto sizes = class_sizes();
  return std::none_of(sizes.begin(), sizes.end(), [](int s) { return s == 0; });
}

std::vector<int> LabelAssignment::used_classes() const {
  const auto sizes = class_sizes();
  std::vector<int> used;
  for (std::size_t v = 0; v < sizes.size(); ++v) {
    if (sizes[v] > 0) used.push_back(static_cast<int>(v));
  }
  return used;
}

void LabelAssignment::validate(std::size_t num_segments) const {
  if (labels_.size() != num_segments) {
    throw ValidationError("label count " + std::to_string(labels_.size()) +
                          " does not match segment count " + std::to_string(num_segments));
  }
  if (!is_compact()) throw ValidationError("labels " + join(labels_) + " are not compact");
}

void ClassParams::validate(std::size_t num_classes, std::size_t num_segments) const {
  if (class_means.size() != num_classes || class_mean_vars.size() != num_classes ||
      noise_vars.size() != num_classes) {
    throw ValidationError("class parameter vectors do not match class count " +
                          std::to_string(num_classes));
  }
  if (segment_means.size() != num_segments) {
    throw ValidationError("segment mean vector does not match segment count " +
                          std::to_string(num_segments));
  }
  for (std::size_t v = 0; v < num_classes; ++v) {
    if (!std::isfinite(class_means[v]) || !positive_finite(class_mean_vars[v]) ||
        !positive_finite(noise_vars[v])) {
      throw ValidationError("class " + std::to_string(v) + " has invalid parameters");
    }
  }
  for (double m : segment_means) {
    if (!std::isfinite(m)) throw ValidationError("non-finite segment mean");
  }
}

Hyperparams Hyperparams::defaults_for(std::size_t n) {
  Hyperparams h;
  h.k_max = static_cast<int>(std::min<std::size_t>(n >= 2 ? n - 2 : 0, 50));
  return h;
}

void Hyperparams::validate(std::size_t n) const {
  if (!positive_finite(alpha)) throw ValidationError("alpha must be > 0");
  if (!std::isfinite(mean_loc)) throw ValidationError("mean_loc must be finite");
  if (!positive_finite(mean_scale)) throw ValidationError("mean_scale must be > 0");
  if (!positive_finite(noise_shape)) throw ValidationError("noise_shape must be > 0");
  if (!positive_finite(noise_scale)) throw ValidationError("noise_scale must be > 0");
  if (!positive_finite(classvar_shape)) throw ValidationError("classvar_shape must be > 0");
  if (!positive_finite(classvar_scale)) throw ValidationError("classvar_scale must be > 0");
  if (k_max < 1) throw ValidationError("k_max must be >= 1");
  if (n >= 2 && static_cast<std::size_t>(k_max) > n - 2) {
    throw ValidationError("k_max " + std::to_string(k_max) + " exceeds N-2 = " +
                          std::to_string(n - 2));
  }
}

void ChainState::validate(std::size_t n, const Hyperparams& hyper) const {
  seg.validate(n);
  if (seg.num_changes() > static_cast<std::size_t>(hyper.k_max)) {
    throw ValidationError("K exceeds k_max");
  }
  labels.validate(seg.num_segments());
  params.validate(labels.num_classes(), seg.num_segments());
}

}  // namespace cpdp

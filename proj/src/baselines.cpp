#include "cpdp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cpdp {

std::vector<ChainSample> run_chain_nolabel(const TimeSeries& x, const Hyperparams& hyper,
                                           SamplerSettings settings) {
  settings.pin_labels = true;
  return run_chain(x, hyper, settings);
}

DetectionResult run_mcmc_nolabel(const TimeSeries& x, const Hyperparams& hyper,
                                 const SamplerSettings& settings) {
  const auto samples = run_chain_nolabel(x, hyper, settings);
  return summarize(samples, settings, x.size());
}

std::vector<int> pelt_mean(std::span<const double> x, double penalty, int min_seg_len) {
  if (!(penalty > 0.0)) throw ValidationError("penalty must be > 0");
  if (min_seg_len < 1) throw ValidationError("min_seg_len must be >= 1");
  const auto n = static_cast<long>(x.size());
  const long m = min_seg_len;
  if (n < 2 * m) return {};

  std::vector<double> s1(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> s2(static_cast<std::size_t>(n) + 1, 0.0);
  for (long i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    s1[u + 1] = s1[u] + x[u];
    s2[u + 1] = s2[u] + x[u] * x[u];
  }
  auto cost = [&](long s, long t) {
    const auto a = static_cast<std::size_t>(s);
    const auto b = static_cast<std::size_t>(t);
    const double sum = s1[b] - s1[a];
    return (s2[b] - s2[a]) - sum * sum / static_cast<double>(t - s);
  };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> best(static_cast<std::size_t>(n) + 1, inf);
  std::vector<long> last(static_cast<std::size_t>(n) + 1, -1);
  best[0] = -penalty;
  std::vector<long> cand;  // admissible last change positions, ascending
  for (long t = m; t <= n; ++t) {
    // Position t - m becomes admissible once its own prefix is feasible.
    const long fresh = t - m;
    if (fresh == 0 || fresh >= m) cand.push_back(fresh);
    double f = inf;
    long arg = -1;
    for (long s : cand) {
      const double v = best[static_cast<std::size_t>(s)] + cost(s, t) + penalty;
      if (v < f) {
        f = v;
        arg = s;
      }
    }
    best[static_cast<std::size_t>(t)] = f;
    last[static_cast<std::size_t>(t)] = arg;

    // Prune against the optimum at t - m: any later end point T >= t can then
    // be reached through t - m with a final segment of at least m points.
    const long ref = t - m;
    if (ref >= m) {
      const double fr = best[static_cast<std::size_t>(ref)];
      std::erase_if(cand, [&](long s) {
        return s < ref && best[static_cast<std::size_t>(s)] + cost(s, ref) > fr;
      });
    }
  }

  std::vector<int> cps;
  for (long t = last[static_cast<std::size_t>(n)]; t > 0; t = last[static_cast<std::size_t>(t)]) {
    cps.push_back(static_cast<int>(t));
  }
  std::reverse(cps.begin(), cps.end());
  return cps;
}

double estimate_noise_sd(std::span<const double> x) {
  if (x.size() < 3) return 1.0;
  std::vector<double> d(x.size() - 1);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) d[i] = x[i + 1] - x[i];
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  const double med = *mid;
  for (double& v : d) v = std::abs(v - med);
  std::nth_element(d.begin(), mid, d.end());
  const double sd = *mid / (0.6744897501960817 * std::sqrt(2.0));
  return sd > 0.0 ? sd : 1.0;
}

std::vector<int> pelt_profiled(std::span<const double> x, double penalty, int min_seg_len) {
  const double sd = estimate_noise_sd(x);
  std::vector<double> z(x.begin(), x.end());
  for (double& v : z) v /= sd;
  return pelt_mean(z, penalty, min_seg_len);
}

Calibration calibrate_parameter(const std::function<double(double)>& fp_at, double lo, double hi,
                                double target_fp, bool log_scale, int max_iter,
                                double tolerance) {
  if (!(target_fp > 0.0 && target_fp < 1.0)) throw ValidationError("target_fp must be in (0,1)");
  if (!(lo < hi)) throw ValidationError("calibration bracket must satisfy lo < hi");
  Calibration out;
  double best_gap = std::numeric_limits<double>::infinity();
  auto consider = [&](double value, double fp) {
    ++out.evaluations;
    const double gap = std::abs(fp - target_fp);
    // Prefer the lower false-positive side when equally close.
    if (gap < best_gap || (gap == best_gap && fp < out.fp)) {
      best_gap = gap;
      out.value = value;
      out.fp = fp;
    }
  };

  double f_lo = fp_at(lo);
  consider(lo, f_lo);
  double f_hi = fp_at(hi);
  consider(hi, f_hi);
  if (f_lo < f_hi) ++out.monotonicity_violations;
  for (int it = 0; it < max_iter && best_gap > tolerance; ++it) {
    const double mid = log_scale ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    const double f = fp_at(mid);
    consider(mid, f);
    if (f > f_lo || f < f_hi) ++out.monotonicity_violations;
    if (f > target_fp) {
      lo = mid;
      f_lo = f;
    } else {
      hi = mid;
      f_hi = f;
    }
  }
  out.converged = best_gap <= tolerance;
  return out;
}

}  // namespace cpdp

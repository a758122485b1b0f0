#include "cwm/harness/stats.hpp"

#include <algorithm>
#include <cmath>

#include "cwm/core/error.hpp"

namespace cwm::harness {

double iqm(std::vector<double> scores) {
  if (scores.empty()) throw_data("IQM of an empty score list");
  std::sort(scores.begin(), scores.end());
  const size_t cut = scores.size() / 4;
  // Running mean, exact for constant inputs.
  double mean = 0;
  for (size_t i = cut; i < scores.size() - cut; ++i) mean += (scores[i] - mean) / double(i - cut + 1);
  return mean;
}

double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw_data("percentile of no values");
  const double pos = q * double(sorted.size() - 1);
  const size_t lo = size_t(std::floor(pos));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - double(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

IqmInterval iqm_ci(const std::vector<double>& scores, int resamples, Rng& rng) {
  if (scores.empty()) throw_data("IQM of an empty score list");
  if (resamples < 1) throw_config("bootstrap needs at least one resample");
  IqmInterval out;
  out.iqm = iqm(scores);
  std::vector<double> stats(static_cast<size_t>(resamples)), draw(scores.size());
  for (auto& s : stats) {
    for (auto& d : draw) d = scores[rng.uniform_int(scores.size())];
    s = iqm(draw);
  }
  std::sort(stats.begin(), stats.end());
  out.lo = percentile(stats, 0.025);
  out.hi = percentile(stats, 0.975);
  return out;
}

}  // namespace cwm::harness

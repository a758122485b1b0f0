#pragma once

#include <vector>

#include "cwm/core/rng.hpp"

namespace cwm::harness {

/// Mean of the scores left after dropping floor(n/4) from each end.
double iqm(std::vector<double> scores);

struct IqmInterval {
  double iqm = 0;
  double lo = 0;
  double hi = 0;
};

/// IQM with a percentile bootstrap (2.5 / 97.5) over `resamples` draws.
IqmInterval iqm_ci(const std::vector<double>& scores, int resamples, Rng& rng);

/// Linear-interpolation percentile of sorted data, q in [0, 1].
double percentile(const std::vector<double>& sorted, double q);

}  // namespace cwm::harness

#ifndef TOWERLAB_FIT_HPP
#define TOWERLAB_FIT_HPP

#include <cstdint>
#include <vector>

namespace towerlab {

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double ci_lo = 0.0;   // bootstrap 2.5% quantile
  double ci_hi = 0.0;   // bootstrap 97.5% quantile
  int points = 0;
};

// OLS slope of log(y) against log(x) over the points with x in
// [window_lo, window_hi], with a bootstrap confidence interval
// (resampling points, 200 resamples by default).  All y must be positive
// inside the window; throws DegenerateWindow when fewer than 8 usable
// points remain.
SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y,
                   double window_lo, double window_hi, int bootstrap = 200,
                   std::uint64_t seed = 17);

}  // namespace towerlab

#endif

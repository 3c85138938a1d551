#include "towerlab/fit.hpp"

#include <algorithm>
#include <cmath>

#include "towerlab/errors.hpp"
#include "towerlab/rng.hpp"

namespace towerlab {

namespace {

// slope/intercept of OLS on prepared (log x, log y) pairs
void ols(const std::vector<double>& lx, const std::vector<double>& ly, double& slope,
         double& intercept) {
  const std::size_t n = lx.size();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double denom = n * sxx - sx * sx;
  slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
  intercept = (sy - slope * sx) / static_cast<double>(n);
}

}  // namespace

SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y, double window_lo,
                   double window_hi, int bootstrap, std::uint64_t seed) {
  if (x.size() != y.size()) throw ShapeMismatch("fit_slope: x/y length mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < window_lo || x[i] > window_hi) continue;
    if (!(y[i] > 0.0) || !(x[i] > 0.0)) continue;
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  if (lx.size() < 8) {
    throw DegenerateWindow("fit_slope: fewer than 8 usable points in window");
  }
  SlopeFit fit;
  fit.points = static_cast<int>(lx.size());
  ols(lx, ly, fit.slope, fit.intercept);

  if (bootstrap > 1) {
    Rng rng(seed, 0);
    std::vector<double> bs;
    bs.reserve(bootstrap);
    std::vector<double> rx(lx.size()), ry(lx.size());
    for (int b = 0; b < bootstrap; ++b) {
      for (std::size_t i = 0; i < lx.size(); ++i) {
        const std::size_t j = rng.uniform_index(lx.size());
        rx[i] = lx[j];
        ry[i] = ly[j];
      }
      double s, c;
      ols(rx, ry, s, c);
      bs.push_back(s);
    }
    std::sort(bs.begin(), bs.end());
    const auto q = [&](double p) {
      const double pos = p * (bs.size() - 1);
      const std::size_t i = static_cast<std::size_t>(pos);
      const double frac = pos - i;
      return i + 1 < bs.size() ? bs[i] * (1.0 - frac) + bs[i + 1] * frac : bs.back();
    };
    fit.ci_lo = q(0.025);
    fit.ci_hi = q(0.975);
  } else {
    fit.ci_lo = fit.ci_hi = fit.slope;
  }
  return fit;
}

}  // namespace towerlab

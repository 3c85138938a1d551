#ifndef TOWERLAB_STATS_HPP
#define TOWERLAB_STATS_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "towerlab/model.hpp"
#include "towerlab/tower.hpp"

namespace towerlab {

// Monte-Carlo and spectral estimators for correlation decay and large
// deviations, with Holder observables over the model's charts.

struct Observable {
  std::function<double(const Point2&)> eval;
  double eta = 1.0;               // Holder exponent
  double seminorm_estimate = 0.0;
  double sup_norm = 0.0;
  bool u_only = false;  // depends only on (cell, a); constant on stable leaves
};

Observable obs_constant(double c);
// chart-normalized coordinates: Lipschitz-1 for the chart metric
Observable obs_coordinate_u(const HyperbolicModel& m);
Observable obs_coordinate_s(const HyperbolicModel& m);
Observable obs_trig_u(int harmonics);  // sin of the rescaled unstable coordinate
Observable obs_cell_indicator(int cell);  // jump saturates the unit cross-cell distance

struct CorrelationSeries {
  std::vector<int> n_values;
  std::vector<double> c_values;  // |covariance at lag n|
  std::vector<double> ci;        // batch-means half-widths; zero for spectral
  std::string method;            // "monte_carlo" or "spectral"
};

struct OrbitSummary {
  std::vector<std::vector<double>> series;  // one vector per observable
  Point2 end{};
};

// Streaming orbit evaluation; stores only the requested observables,
// sampled every `stride` steps after `burn_in`.  A nonzero dither_seed
// re-dithers the unstable coordinate at one part in 2^48 per step: exact
// float orbits of the affine branches land on branch endpoints after ~50
// expansion steps, so long orbits need the dither to stay typical.
OrbitSummary simulate_orbit(const HyperbolicModel& m, Point2 p0, std::int64_t n,
                            const std::vector<Observable>& obs, std::int64_t burn_in = 0,
                            std::int64_t stride = 1, std::uint64_t dither_seed = 0);

struct McConfig {
  std::int64_t orbit_len = 20'000'000;  // sampled steps after burn-in
  std::int64_t burn_in = 100'000;
  std::int64_t stride = 1;  // accumulate lag products every stride-th step
  int batches = 64;
  std::uint64_t seed = 1;
};

// Covariance of phi o f^n with psi along one long orbit, with batch-means
// confidence intervals.  Falls back to the fast 1-D factor simulation when
// both observables are constant on stable leaves.
CorrelationSeries correlation_mc(const HyperbolicModel& m, const Observable& phi,
                                 const Observable& psi, const std::vector<int>& n_values,
                                 const McConfig& cfg);

// C_n from iterating the discretized transfer operator on the signed
// density.  Both observables must be constant on stable leaves.
CorrelationSeries correlation_spectral(const TransferMatrix& tm, const Observable& phi,
                                       const Observable& psi, const std::vector<int>& n_values);

struct LdConfig {
  std::int64_t ensemble = 1'000'000;
  std::int64_t burn_in = 100'000;
  std::int64_t spacing = 37;           // orbit steps between ensemble starts
  std::int64_t mean_orbit = 10'000'000;  // calibration orbit for the space average
  std::uint64_t seed = 2;
};

struct LdSeries {
  double eps = 0.0;
  std::vector<int> n_values;
  std::vector<double> ld;  // fraction of members deviating by more than eps
  std::vector<double> ci;  // binomial half-widths
  std::int64_t ensemble = 0;
  double space_average = 0.0;
};

std::vector<LdSeries> large_deviation(const HyperbolicModel& m, const Observable& phi,
                                      const std::vector<double>& eps_list,
                                      const std::vector<int>& n_values, const LdConfig& cfg);

// max over sampled pairs of |f(x)-f(y)| / d(x,y)^eta, pairs drawn at
// dyadic scales along the attractor.
double holder_seminorm(const HyperbolicModel& m, const Observable& obs, int n_pairs,
                       std::uint64_t seed);

}  // namespace towerlab

#endif

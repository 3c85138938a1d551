#include <cmath>

#include "doctest.h"
#include "towerlab/errors.hpp"
#include "towerlab/fit.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/return_times.hpp"
#include "towerlab/stats.hpp"

using namespace towerlab;

namespace {

HyperbolicModel& default_model() {
  static HyperbolicModel m = HyperbolicModel::build(ModelConfig{});
  return m;
}

}  // namespace

TEST_CASE("fit_slope: exact power law, constants, and noise") {
  std::vector<double> x, y, c;
  for (int n = 5; n <= 600; ++n) {
    x.push_back(n);
    y.push_back(std::pow(n, -2.0));
    c.push_back(7.5);
  }
  SlopeFit exact = fit_slope(x, y, 10, 500);
  CHECK(exact.slope == doctest::Approx(-2.0).epsilon(0.01 / 2.0));
  SlopeFit flat = fit_slope(x, c, 10, 500);
  CHECK(std::abs(flat.slope) < 1e-12);

  Rng rng(7, 0);
  std::vector<double> noisy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    noisy.push_back(std::pow(x[i], -3.0) * (1.0 + 0.05 * (2.0 * rng.uniform() - 1.0)));
  }
  SlopeFit nf = fit_slope(x, noisy, 10, 500);
  CHECK(nf.slope == doctest::Approx(-3.0).epsilon(0.1 / 3.0));
  CHECK(nf.ci_lo < nf.slope);
  CHECK(nf.ci_hi > nf.slope);

  CHECK_THROWS_AS(fit_slope(x, y, 1000, 2000), DegenerateWindow);
}

TEST_CASE("fit_slope: bootstrap CI covers the truth on synthetic laws") {
  Rng rng(1234, 0);
  int covered = 0;
  std::vector<double> x;
  for (int n = 10; n <= 300; n += 5) x.push_back(n);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> y;
    for (double v : x) {
      y.push_back(std::pow(v, -3.0) * std::exp(0.1 * (2.0 * rng.uniform() - 1.0)));
    }
    SlopeFit f = fit_slope(x, y, 10, 300, 200, 999 + rep);
    if (f.ci_lo <= -3.0 && -3.0 <= f.ci_hi) ++covered;
  }
  CHECK(covered >= 90);
}

TEST_CASE("simulate_orbit: trivial cases") {
  HyperbolicModel& m = default_model();
  OrbitSummary empty = simulate_orbit(m, Point2{1, 0.4, 0.5}, 0, {obs_coordinate_u(m)});
  CHECK(empty.series[0].empty());

  OrbitSummary fixed = simulate_orbit(m, Point2{0, 0.0, 0.0}, 100, {obs_coordinate_u(m)});
  // the chart-normalized unstable coordinate of the neutral fixed point
  for (double v : fixed.series[0]) CHECK(v == 0.5);
  CHECK(fixed.end.a == 0.0);
  CHECK(fixed.end.b == 0.0);
}

TEST_CASE("simulate_orbit: halves of a long orbit agree within batch-means errors") {
  HyperbolicModel& m = default_model();
  OrbitSummary run =
      simulate_orbit(m, Point2{1, 0.473, 0.52}, 4'000'000, {obs_trig_u(1)}, 10'000, 1, 77);
  const auto& s = run.series[0];
  const std::size_t half = s.size() / 2;
  const int nb = 64;
  const std::size_t bl = half / nb;
  auto half_stats = [&](std::size_t off, double& mean, double& se) {
    std::vector<double> bm(nb, 0.0);
    for (int b = 0; b < nb; ++b) {
      for (std::size_t i = 0; i < bl; ++i) bm[b] += s[off + b * bl + i];
      bm[b] /= bl;
    }
    mean = 0.0;
    for (double v : bm) mean += v;
    mean /= nb;
    double var = 0.0;
    for (double v : bm) var += (v - mean) * (v - mean);
    var /= (nb - 1);
    se = std::sqrt(var / nb);
  };
  double m1, se1, m2, se2;
  half_stats(0, m1, se1);
  half_stats(half, m2, se2);
  CHECK(std::abs(m1 - m2) < 3.0 * std::sqrt(se1 * se1 + se2 * se2));
}

TEST_CASE("correlation_mc: constant observable cancels exactly") {
  HyperbolicModel& m = default_model();
  McConfig cfg;
  cfg.orbit_len = 200'000;
  cfg.burn_in = 1'000;
  CorrelationSeries cs = correlation_mc(m, obs_trig_u(1), obs_constant(2.5), {0, 1, 5, 10}, cfg);
  for (double v : cs.c_values) CHECK(v <= 1e-14);
}

TEST_CASE("correlation_mc: lag zero matches an independent two-pass covariance") {
  HyperbolicModel& m = default_model();
  McConfig cfg;
  cfg.orbit_len = 3'000'000;
  cfg.burn_in = 10'000;
  cfg.seed = 42;
  Observable phi = obs_trig_u(1);
  Observable psi = obs_coordinate_u(m);
  CorrelationSeries cs = correlation_mc(m, phi, psi, {0}, cfg);

  // independent orbit, classic two-pass covariance
  OrbitSummary orb =
      simulate_orbit(m, Point2{1, 0.296, 0.71}, 3'000'000, {phi, psi}, 10'000, 1, 88);
  const auto& f = orb.series[0];
  const auto& g = orb.series[1];
  double mf = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    mf += f[i];
    mg += g[i];
  }
  mf /= f.size();
  mg /= g.size();
  double cov = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) cov += (f[i] - mf) * (g[i] - mg);
  cov /= f.size();
  CHECK(std::abs(cs.c_values[0] - std::abs(cov)) < 3.0 * cs.ci[0] + 0.02 * std::abs(cov) + 1e-4);
}

TEST_CASE("correlation_mc and spectral agree on a mixing pair") {
  HyperbolicModel& m = default_model();
  TowerOptions topts;
  topts.quotient.bins_per_cell = 128;
  topts.quotient.j_max = 1024;
  topts.base_bins = 16;
  topts.r_detail = 32;
  topts.max_level = 512;
  TransferMatrix tm = TransferMatrix::build(m, topts);
  Observable phi = obs_trig_u(1);
  Observable psi = obs_trig_u(2);
  std::vector<int> lags{1, 2, 4, 8};
  CorrelationSeries sp = correlation_spectral(tm, phi, psi, lags);
  McConfig cfg;
  cfg.orbit_len = 8'000'000;
  cfg.burn_in = 50'000;
  cfg.seed = 5;
  CorrelationSeries mc = correlation_mc(m, phi, psi, lags, cfg);
  for (std::size_t i = 0; i < lags.size(); ++i) {
    const double tol = 3.0 * mc.ci[i] + 0.15 * std::abs(sp.c_values[i]) + 5e-4;
    CHECK(std::abs(mc.c_values[i] - sp.c_values[i]) < tol);
  }
}

TEST_CASE("correlation_spectral: constant observable gives zero") {
  HyperbolicModel& m = default_model();
  TowerOptions topts;
  topts.quotient.bins_per_cell = 32;
  topts.quotient.j_max = 128;
  topts.base_bins = 8;
  topts.r_detail = 16;
  topts.max_level = 64;
  topts.tail_extension = 1024;
  TransferMatrix tm = TransferMatrix::build(m, topts);
  CorrelationSeries cs = correlation_spectral(tm, obs_trig_u(1), obs_constant(1.0), {0, 1, 3});
  for (double v : cs.c_values) CHECK(v <= 1e-13);
  CHECK_THROWS_AS(correlation_spectral(tm, obs_coordinate_s(m), obs_constant(1.0), {1}),
                  DomainError);
}

TEST_CASE("large_deviation: trivial exactness") {
  HyperbolicModel& m = default_model();
  LdConfig cfg;
  cfg.ensemble = 2'000;
  cfg.burn_in = 500;
  cfg.mean_orbit = 20'000;
  auto out = large_deviation(m, obs_constant(1.5), {0.01, 0.3}, {5, 10, 20}, cfg);
  for (const LdSeries& s : out) {
    for (double v : s.ld) CHECK(v == 0.0);
  }
  // epsilon beyond twice the sup norm can never be exceeded
  Observable phi = obs_trig_u(1);
  auto big = large_deviation(m, phi, {2.0 * phi.sup_norm + 0.5}, {3, 9}, cfg);
  for (double v : big[0].ld) CHECK(v == 0.0);
}

TEST_CASE("large_deviation: deviations decay with n") {
  HyperbolicModel& m = default_model();
  LdConfig cfg;
  cfg.ensemble = 20'000;
  cfg.burn_in = 2'000;
  cfg.mean_orbit = 500'000;
  Observable phi = obs_trig_u(1);
  auto out = large_deviation(m, phi, {0.15}, {4, 32, 256, 2048}, cfg);
  REQUIRE(out.size() == 1);
  const auto& ld = out[0].ld;
  CHECK(ld.front() > ld.back());
  CHECK(ld.back() < 0.6 * ld.front());
  CHECK(ld.back() < 0.25);
}

TEST_CASE("stats error paths") {
  HyperbolicModel& m = default_model();
  McConfig tiny;
  tiny.orbit_len = 100;
  CHECK_THROWS_AS(correlation_mc(m, obs_trig_u(1), obs_trig_u(2), {50}, tiny),
                  InsufficientSamples);
  CHECK_THROWS_AS(correlation_mc(m, obs_trig_u(1), obs_trig_u(2), {}, McConfig{}), ConfigError);
  LdConfig small;
  small.ensemble = 10;
  CHECK_THROWS_AS(large_deviation(m, obs_trig_u(1), {0.1}, {4}, small), InsufficientSamples);
  CHECK_THROWS_AS(simulate_orbit(m, Point2{1, 0.4, 0.5}, -1, {}), ConfigError);
}

TEST_CASE("holder_seminorm: constants and coordinate functions") {
  HyperbolicModel& m = default_model();
  CHECK(holder_seminorm(m, obs_constant(9.0), 2000, 3) == 0.0);
  const double c = holder_seminorm(m, obs_coordinate_u(m), 4000, 5);
  CHECK(c > 0.8);
  CHECK(c <= 1.0 + 1e-9);
  // trig observable: two independent samples agree within 5%
  const double t1 = holder_seminorm(m, obs_trig_u(1), 20'000, 11);
  const double t2 = holder_seminorm(m, obs_trig_u(1), 20'000, 12);
  CHECK(std::abs(t1 - t2) / std::max(t1, t2) < 0.05);
}

TEST_CASE("determinism: results do not depend on the worker count") {
  HyperbolicModel& m = default_model();
  TailSample a = sample_return_times(m, 50'000, 1'000'000, 33, 1);
  TailSample b = sample_return_times(m, 50'000, 1'000'000, 33, 4);
  // per-sample substreams make even the sample multiset identical
  std::sort(a.values.begin(), a.values.end());
  std::sort(b.values.begin(), b.values.end());
  CHECK(a.values == b.values);
  CHECK(a.censored == b.censored);
}

TEST_CASE("correlation_mc: stride thins the estimator without bias") {
  HyperbolicModel& m = default_model();
  McConfig cfg;
  cfg.orbit_len = 2'000'000;
  cfg.burn_in = 5'000;
  cfg.seed = 3;
  McConfig strided = cfg;
  strided.stride = 7;
  CorrelationSeries full = correlation_mc(m, obs_trig_u(1), obs_trig_u(2), {2}, cfg);
  CorrelationSeries thin = correlation_mc(m, obs_trig_u(1), obs_trig_u(2), {2}, strided);
  CHECK(std::abs(full.c_values[0] - thin.c_values[0]) <
        3.0 * (full.ci[0] + thin.ci[0]) + 1e-3);
}

TEST_CASE("determinism: identical seeds give identical estimates") {
  HyperbolicModel& m = default_model();
  McConfig cfg;
  cfg.orbit_len = 100'000;
  cfg.burn_in = 100;
  CorrelationSeries a = correlation_mc(m, obs_trig_u(1), obs_coordinate_u(m), {1, 3}, cfg);
  CorrelationSeries b = correlation_mc(m, obs_trig_u(1), obs_coordinate_u(m), {1, 3}, cfg);
  CHECK(a.c_values[0] == b.c_values[0]);
  CHECK(a.c_values[1] == b.c_values[1]);
}

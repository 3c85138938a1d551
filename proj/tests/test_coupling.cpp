#include <cmath>

#include "doctest.h"
#include "towerlab/coupling.hpp"
#include "towerlab/errors.hpp"
#include "towerlab/rng.hpp"

using namespace towerlab;

namespace {

HyperbolicModel& default_model() {
  static HyperbolicModel m = HyperbolicModel::build(ModelConfig{});
  return m;
}

TowerOptions coupling_tower() {
  TowerOptions opts;
  opts.quotient.bins_per_cell = 64;
  opts.quotient.j_max = 400;
  opts.base_bins = 8;
  opts.r_detail = 12;
  opts.max_level = 24;
  opts.tail_extension = 2048;
  return opts;
}

CouplingGrid& shared_grid() {
  static CouplingGrid g = CouplingGrid::build(default_model(), coupling_tower(), 28);
  return g;
}

}  // namespace

TEST_CASE("epsilon_schedule: closed forms and the schedule limit") {
  CouplingConfig cfg;
  cfg.K = std::log(2.0);
  cfg.rho = 3.0;
  CHECK(epsilon_schedule(cfg, 2) == doctest::Approx(1.75).epsilon(1e-15));
  // first index below one: eps_5 = 2 (1 - 0.8^3) = 0.976
  CHECK(epsilon_schedule(cfg, 4) >= 1.0);
  CHECK(epsilon_schedule(cfg, 5) == doctest::Approx(0.976).epsilon(1e-12));
  CHECK(first_index_with_eps_below_one(cfg) == 5);

  // i * eps_i converges to e^K rho with the stated second-order bound
  const double limit = std::exp(cfg.K) * cfg.rho;
  const double at_million = 1'000'000 * epsilon_schedule(cfg, 1'000'000);
  CHECK(std::abs(at_million - limit) / limit < 1e-3);
  for (int i = 10; i <= 10'000; i *= 10) {
    const double err = std::abs(i * epsilon_schedule(cfg, i) - limit);
    CHECK(err <= limit * (cfg.rho + 1.0) / i);
  }
}

TEST_CASE("derive_coupling_config: constraint chain is satisfied") {
  CouplingConfig cfg = derive_coupling_config(0.4, 0.5, 3.0, 1.05);
  cfg.validate();
  CHECK(cfg.rho > cfg.zeta + 1.0);
  CHECK(cfg.rho < cfg.theta_reg / std::exp(cfg.K));
  CHECK(cfg.theta_reg > 2.0 * std::exp(cfg.K));
  CHECK(epsilon_schedule(cfg, cfg.i0) < 1.0);
  if (cfg.i0 > 1) CHECK(epsilon_schedule(cfg, cfg.i0 - 1) >= 1.0);

  CouplingConfig bad = cfg;
  bad.rho = bad.zeta + 0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("stopping_times: increments of n0, T at least two blocks") {
  HyperbolicModel& m = default_model();
  Rng rng(211, 0);
  Rng dither(211, 99);
  int completed = 0;
  for (int i = 0; i < 300; ++i) {
    PairWalk w = stopping_times(m, rng.uniform(), 0, rng.uniform(), 0, 200000, &dither);
    if (w.capped) continue;  // float-degenerate orbits are right-censored
    ++completed;
    REQUIRE(w.taus.size() >= 2);
    CHECK(w.T >= w.taus[1]);
    CHECK(w.taus[1] >= 2 * m.n0());
    for (std::size_t k = 1; k < w.taus.size(); ++k) {
      CHECK(w.taus[k] - w.taus[k - 1] >= m.n0());
    }
    CHECK(w.T == w.taus.back());
  }
  CHECK(completed >= 295);
}

TEST_CASE("stopping_times: identical starts couple at the second stopping time") {
  HyperbolicModel& m = default_model();
  const double u = 0.31830988618367;
  PairWalk w = stopping_times(m, u, 0, u, 0, 200000);
  REQUIRE(!w.capped);
  CHECK(w.taus.size() == 2);
  CHECK(w.T == w.taus[1]);
}

TEST_CASE("simultaneous_return_sequence: increasing run") {
  HyperbolicModel& m = default_model();
  bool capped = false;
  auto seq = simultaneous_return_sequence(m, 0.3713, 0.8191, 8, 400000, capped);
  REQUIRE(!capped);
  REQUIRE(seq.size() == 8);
  for (std::size_t i = 1; i < seq.size(); ++i) CHECK(seq[i] > seq[i - 1]);
}

TEST_CASE("coupling grid: symmetric input couples with tiny marginal residual") {
  CouplingGrid& g = shared_grid();
  CouplingConfig cfg = derive_coupling_config(0.4, 0.5, 3.0, 1.05);
  auto lambda = g.base_density([](double) { return 1.0; });
  g.start(lambda, lambda);
  CHECK(g.remaining_mass() == doctest::Approx(1.0).epsilon(1e-12));
  double prev = g.remaining_mass();
  for (int step = 0; step < cfg.i0 + 6; ++step) {
    CouplingStepReport rep = g.density_step(cfg);
    CHECK(rep.marginal_residual <= 1e-12);
    CHECK(rep.remaining_mass <= prev + 1e-12);
    if (rep.i >= cfg.i0) {
      CHECK(rep.decrease_ok);
      CHECK(rep.eps_i < 1.0);
      CHECK(rep.coupled_mass > 0.0);
      // per-cell ratio certificate: admissible cells sit below e^K
      CHECK(rep.ratio_bound <= std::exp(cfg.K) * (1.0 + 1e-6));
    }
    prev = rep.remaining_mass;
  }
  CHECK(prev < 1.0);

  // read-only ratio report agrees with the admissibility structure
  CouplingGrid::RatioReport rr = g.ratio_bound_check(cfg);
  CHECK(rr.worst_admissible <= std::exp(cfg.K) * (1.0 + 1e-6));
  CHECK(rr.admissible_mass_fraction > 0.5);
  CHECK(rr.worst_overall >= rr.worst_admissible);
}

TEST_CASE("coupling grid: near-flat cells are subtracted at almost the full rate") {
  CouplingGrid& g = shared_grid();
  CouplingConfig cfg = derive_coupling_config(0.4, 0.5, 3.0, 1.05);
  auto lambda = g.base_density([](double u) { return 1.0 + 0.5 * std::sin(6.28318 * u); });
  auto mu = g.base_density([](double u) { return 1.0 + 0.5 * std::cos(6.28318 * u); });
  g.start(lambda, mu);
  CouplingStepReport rep{};
  for (int step = 0; step < cfg.i0 + 1; ++step) rep = g.density_step(cfg);
  // on a cell where the landing ratio is r, the subtracted fraction of the
  // landed mass is between eps/r and eps
  CHECK(rep.coupled_mass > 0.0);
  CHECK(rep.coupled_mass <= rep.eps_i * (rep.remaining_mass + rep.coupled_mass));
}

TEST_CASE("bound assembly: equal inputs give zero total variation") {
  HyperbolicModel& m = default_model();
  CouplingGrid& g = shared_grid();
  CouplingConfig cfg = derive_coupling_config(0.4, 0.5, 3.0, 1.05);
  auto lambda = g.base_density([](double) { return 1.0; });
  std::vector<int> n_values{0, 1, 2, 4, 8, 16};
  StartSampler sampler = base_density_sampler(m, [](double) { return 1.0; }, 1.0);
  PairEnsembleStats stats =
      sample_pair_ensemble(m, sampler, sampler, 4000, 100000, n_values, 6, 1312, 4);
  TvBoundSeries series =
      assemble_tv_bounds(g.matrix(), stats, lambda, lambda, n_values, cfg);
  for (double v : series.direct_tv) CHECK(v <= 1e-12);
  CHECK(series.dominated);
  // at n = 0 the bound is at least 2 P{T > 0} = 2
  CHECK(series.bound[0] >= 2.0 - 1e-9);

  CouplingConfig bad = cfg;
  bad.rho = bad.zeta + 0.5;
  CHECK_THROWS_AS(assemble_tv_bounds(g.matrix(), stats, lambda, lambda, n_values, bad),
                  ConfigError);
}

TEST_CASE("increment domination: self-consistency of the reference ensemble") {
  HyperbolicModel& m = default_model();
  std::vector<int> n_values{1, 2, 4, 8, 16, 32, 64};
  StartSampler leb = lebesgue_tower_sampler(m, 100000);
  PairEnsembleStats ref =
      sample_pair_ensemble(m, leb, leb, 20000, 400000, n_values, 8, 1999, 4);
  IncrementDomination dom = increment_domination_check(ref, ref);
  REQUIRE(!dom.i_values.empty());
  for (double k2 : dom.k2) {
    CHECK(k2 > 0.0);
    CHECK(k2 < 25.0);  // finite and stable across i
  }
}

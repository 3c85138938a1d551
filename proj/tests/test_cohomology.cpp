#include <cmath>

#include "doctest.h"
#include "towerlab/cohomology.hpp"
#include "towerlab/fit.hpp"
#include "towerlab/errors.hpp"
#include "towerlab/quotient.hpp"
#include "towerlab/rng.hpp"

using namespace towerlab;

namespace {

HyperbolicModel& default_model() {
  static HyperbolicModel m = HyperbolicModel::build(ModelConfig{});
  return m;
}

Observable obs_full_2d() {
  Observable o;
  o.eval = [](const Point2& p) { return std::sin(3.0 * p.a) + 0.7 * std::sin(2.0 * p.b + 0.5); };
  o.eta = 1.0;
  o.seminorm_estimate = 3.0;
  o.sup_norm = 1.7;
  o.u_only = false;
  return o;
}

}  // namespace

TEST_CASE("chi: constants telescope to zero and reference points vanish") {
  HyperbolicModel& m = default_model();
  TowerPoint t = make_tower_point(m, Point2{1, 0.42, 0.87});
  for (int n : {1, 8, 64}) {
    ChiResult c = chi(t, obs_constant(4.2), n, m);
    CHECK(c.value == 0.0);
  }
  // a point already on the reference leaf is its own representative
  TowerPoint on_ref = make_tower_point(m, Point2{1, 0.42, 0.5});
  ChiResult c = chi(on_ref, obs_full_2d(), 128, m, 0.5);
  CHECK(c.value == 0.0);
}

TEST_CASE("chi: non-summable regularity raises a warning error") {
  HyperbolicModel& m = default_model();
  TowerPoint t = make_tower_point(m, Point2{1, 0.42, 0.87});
  Observable rough = obs_full_2d();
  rough.eta = 0.3;  // alpha * eta = 0.9 <= 1
  CHECK_THROWS_AS(chi(t, rough, 32, m), ConvergenceWarning);
}

TEST_CASE("psi: decomposition identity and closed-form equivalence") {
  HyperbolicModel& m = default_model();
  Observable phi = obs_full_2d();
  Rng rng(101, 0);
  for (int i = 0; i < 40; ++i) {
    TowerPoint t = make_tower_point(m, Point2{1, rng.uniform(), rng.uniform()});
    if (t.R > 2) t = tower_step(t, m);
    PsiResult r = psi_decomposition(t, phi, 256, m);
    CHECK(r.identity_residual <= 1e-12);
    CHECK(r.value == doctest::Approx(r.closed_form).epsilon(1e-9));
  }
}

TEST_CASE("psi: depends only on future coordinates in the truncation limit") {
  HyperbolicModel& m = default_model();
  Observable phi = obs_full_2d();
  // pairs on one stable leaf: same unstable coordinate, different b
  double prev_gap = -1.0;
  for (int n : {32, 128, 512}) {
    double gap = 0.0;
    Rng local(103, 7);
    for (int i = 0; i < 20; ++i) {
      const double u = local.uniform();
      TowerPoint p = make_tower_point(m, Point2{1, u, 0.2});
      TowerPoint q = make_tower_point(m, Point2{1, u, 0.8});
      const double dp = psi_decomposition(p, phi, n, m).value;
      const double dq = psi_decomposition(q, phi, n, m).value;
      gap = std::max(gap, std::abs(dp - dq));
    }
    if (prev_gap >= 0.0) CHECK(gap <= prev_gap * 1.05);
    prev_gap = gap;
  }
  CHECK(prev_gap < 1e-4);
}

TEST_CASE("same-leaf distances scale with the separation time") {
  // d(f^k x, f^k y) * s(x,y)^{tau+1} stays bounded for 0 <= k < R
  HyperbolicModel& m = default_model();
  Rng rng(107, 0);
  double sup = 0.0;
  int used = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    const double u = rng.uniform();
    const double v = std::min(1.0, u + std::pow(10.0, -(2.0 + 9.0 * rng.uniform())));
    if (u == v) continue;
    SeparationResult s = quotient_separation(m, u, v, 128);
    if (s.at_cap || s.s < 1) continue;
    ReturnResult r = quotient_return(m, u, 100000);
    if (r.capped) continue;
    Point2 x{1, u, 0.5}, y{1, v, 0.5};
    for (int k = 0; k < r.R; ++k) {
      sup = std::max(sup, m.distance(x, y) * std::pow(static_cast<double>(s.s), 3.0));
      x = m.step(x);
      y = m.step(y);
    }
    ++used;
  }
  REQUIRE(used > 200);
  CHECK(sup < 1e3);
}

TEST_CASE("chi truncations are Cauchy at the polynomial rate") {
  HyperbolicModel& m = default_model();
  Observable phi = obs_full_2d();
  // scale-stratified points: orbits entering deep level sets stall the
  // stable contraction and saturate the tail envelope
  const auto& ar = m.boundary_table_right();
  const Branch* into0 = nullptr;
  for (const Branch& br : m.branches()) {
    if (br.source == 1 && br.target == 0) into0 = &br;
  }
  REQUIRE(into0 != nullptr);
  std::vector<int> Ns{16, 24, 32, 48, 64, 96, 128, 192, 256, 384, 512, 768, 1024};
  std::vector<double> sup_gap(Ns.size(), 0.0);
  Rng rng(109, 0);
  // strata deep enough that every window sits inside some stall
  for (int depth : {24, 48, 96, 192, 384, 768, 1536}) {
    for (int rep = 0; rep < 4; ++rep) {
      const double frac = 0.15 + 0.7 * rng.uniform();
      const double target = ar[depth + 1] + frac * (ar[depth] - ar[depth + 1]);
      const double pre = into0->u_lo + (target - m.cell(0).u_lo) / into0->u_slope;
      TowerPoint t = make_tower_point(m, Point2{1, pre, 0.1 + 0.8 * rng.uniform()});
      const ChiResult full = chi(t, phi, 2600, m);
      for (std::size_t i = 0; i < Ns.size(); ++i) {
        const ChiResult part = chi(t, phi, Ns[i], m);
        sup_gap[i] = std::max(sup_gap[i], std::abs(part.value - full.value));
      }
    }
  }
  // fitted decay exponent of the truncation defect is near 1 - alpha*eta = -2
  std::vector<double> xs(Ns.begin(), Ns.end());
  SlopeFit fit = fit_slope(xs, sup_gap, 10, 1100, 0);
  CHECK(fit.slope < -1.6);
  CHECK(fit.slope > -2.45);
}

TEST_CASE("verify_gtheta: constants vanish and estimates stabilize") {
  HyperbolicModel& m = default_model();
  CHECK(verify_gtheta(m, obs_constant(3.0), 64, 2.0, 200, 113) == 0.0);
  Observable phi = obs_full_2d();
  const double d1 = verify_gtheta(m, phi, 256, 2.0, 400, 127);
  const double d2 = verify_gtheta(m, phi, 256, 2.0, 400, 131);
  CHECK(d1 > 0.0);
  CHECK(std::abs(d1 - d2) / std::max(d1, d2) < 0.35);
}

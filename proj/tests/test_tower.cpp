#include <cmath>
#include <cstdio>
#include <sstream>

#include "doctest.h"
#include "towerlab/errors.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/tower.hpp"

using namespace towerlab;

namespace {

HyperbolicModel& default_model() {
  static HyperbolicModel m = HyperbolicModel::build(ModelConfig{});
  return m;
}

TowerOptions small_tower() {
  TowerOptions opts;
  opts.quotient.bins_per_cell = 64;
  opts.quotient.j_max = 512;
  opts.base_bins = 16;
  opts.r_detail = 32;
  opts.max_level = 256;
  opts.tail_extension = 4096;
  return opts;
}

}  // namespace

TEST_CASE("tower_step: the two case branches and their composition") {
  HyperbolicModel& m = default_model();
  Rng rng(61, 0);
  for (int i = 0; i < 200; ++i) {
    Point2 base{1, rng.uniform(), rng.uniform()};
    TowerPoint t = make_tower_point(m, base);
    REQUIRE(t.R >= 1);
    if (t.R > 1) {
      TowerPoint up = tower_step(t, m);
      CHECK(up.level == 1);
      CHECK(up.base.a == t.base.a);
    }
    // composing R steps from level 0 lands at (f^R(base), 0)
    TowerPoint cur = t;
    for (int k = 0; k < t.R; ++k) cur = tower_step(cur, m);
    CHECK(cur.level == 0);
    Point2 img = base;
    for (int k = 0; k < t.R; ++k) img = m.step(img);
    CHECK(cur.base.a == doctest::Approx(img.a).epsilon(1e-12));
    CHECK(cur.base.cell == 1);
  }
}

TEST_CASE("tower_step: invalid levels raise") {
  HyperbolicModel& m = default_model();
  TowerPoint t = make_tower_point(m, Point2{1, 0.37, 0.52});
  t.level = t.R;  // outside [0, R)
  CHECK_THROWS_AS(tower_step(t, m), InvalidLevel);
  CHECK_THROWS_AS(make_tower_point(m, Point2{2, 0.3, 0.3}), DomainError);
}

TEST_CASE("project: semiconjugacy with the base dynamics") {
  HyperbolicModel& m = default_model();
  Rng rng(67, 0);
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    Point2 base{1, rng.uniform(), rng.uniform()};
    TowerPoint t = make_tower_point(m, base);
    CHECK(project(t, m).a == base.a);  // level zero projects to itself
    const Point2 before = project(t, m);
    const TowerPoint ft = tower_step(t, m);
    const Point2 after = project(ft, m);
    const Point2 stepped = m.step(before);
    worst = std::max(worst, m.distance(after, stepped));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("partition_cylinder: labels agree exactly when points do") {
  HyperbolicModel& m = default_model();
  TowerPoint t = make_tower_point(m, Point2{1, 0.4321, 0.55});
  auto l1 = partition_cylinder(t, 12, m);
  auto l2 = partition_cylinder(t, 12, m);
  REQUIRE(l1.size() == 13);
  CHECK(l1 == l2);
  // a far-away point gets a different label already at depth 0
  TowerPoint s = make_tower_point(m, Point2{1, 0.9876, 0.55});
  auto l3 = partition_cylinder(s, 12, m);
  CHECK(l3[0] != l1[0]);
}

TEST_CASE("diameter_check: scaled diameters stay bounded") {
  HyperbolicModel& m = default_model();
  DiameterEnvelope env = diameter_check(m, {2, 4, 8, 16, 32}, 60, 71);
  REQUIRE(env.pairs_used > 10);
  for (double v : env.sup_scaled) CHECK(v < 1e3);
}

TEST_CASE("reference_measure_weight: identically one in the product model") {
  HyperbolicModel& m = default_model();
  Rng rng(73, 0);
  for (int i = 0; i < 100; ++i) {
    WeightResult w = reference_measure_weight(Point2{1, rng.uniform(), rng.uniform()}, 64, m);
    CHECK(std::abs(w.log_weight) <= 1e-12);
  }
  WeightResult none = reference_measure_weight(Point2{1, 0.3, 0.9}, 0, m);
  CHECK(none.log_weight == 0.0);
  CHECK(none.partial_logs.empty());
}

TEST_CASE("reference_measure_weight: synthetic stable dependence converges at the stated rate") {
  // log-ratio terms decaying like n^{-(tau+1)} make the partial products
  // Cauchy at rate N^{-tau}
  const double tau = 2.0;
  auto term = [&](int n) { return 0.3 * std::pow(n + 1.0, -(tau + 1.0)); };
  WeightResult w = reference_measure_weight_custom(4096, term);
  const double full = w.log_weight;
  std::vector<double> defect;
  for (int n : {64, 128, 256, 512, 1024}) {
    defect.push_back(std::abs(full - w.partial_logs[n - 1]));
  }
  for (std::size_t i = 1; i < defect.size(); ++i) {
    CHECK(defect[i - 1] / defect[i] == doctest::Approx(std::pow(2.0, tau)).epsilon(0.2));
  }
}

TEST_CASE("TransferMatrix: structure, stochasticity, and conservation") {
  HyperbolicModel& m = default_model();
  TransferMatrix tm = TransferMatrix::build(m, small_tower());
  CHECK(tm.state_count() > 1000);
  CHECK(tm.max_row_sum_error() <= 1e-10);

  std::vector<double> x(tm.state_count(), 0.0), y;
  Rng rng(79, 0);
  for (int s = 0; s < tm.state_count(); ++s) x[s] = rng.uniform();
  double tot = 0.0;
  for (double v : x) tot += v;
  tm.apply(x, y);
  double tot2 = 0.0;
  for (double v : y) tot2 += v;
  CHECK(tot2 == doctest::Approx(tot).epsilon(1e-12));

  double mass = tm.pooled_deep_fraction();
  for (const auto& g : tm.groups()) mass += g.mass;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));

  const auto& g0 = tm.groups()[0];
  auto info = tm.describe(g0.first_state);
  CHECK(info.group == 0);
  CHECK(info.level == 0);
  CHECK(tm.describe(tm.censor_state()).censor);
}

TEST_CASE("TransferMatrix: invariant density fixed point, floor, mixing proxy") {
  HyperbolicModel& m = default_model();
  TransferMatrix tm = TransferMatrix::build(m, small_tower());
  InvariantDensity rho = tm.invariant_density(1e-10, 400'000);
  CHECK(rho.residual <= 1e-10);
  double tot = 0.0;
  for (double v : rho.rho) tot += v;
  CHECK(tot == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rho.floor_non_censored > 0.0);
  CHECK(rho.lambda2_estimate < 1.0);
  CHECK(rho.lambda2_estimate > 0.0);
}

TEST_CASE("TransferMatrix: equal-slope affine model has uniform invariant density") {
  ModelConfig cfg;
  cfg.affine_w0 = true;
  HyperbolicModel m = HyperbolicModel::build(cfg);
  TowerOptions opts;
  opts.quotient.bins_per_cell = 32;
  opts.base_bins = 16;
  opts.r_detail = 48;
  opts.max_level = 192;
  TransferMatrix tm = TransferMatrix::build(m, opts);
  InvariantDensity rho = tm.invariant_density(1e-12, 400'000);
  const std::vector<double> leb = tm.lebesgue_mass();
  // restrict to states whose mass clears the fixed-point resolution; the
  // deep tail carries ~1e-16 of the measure and only holds fp noise
  double lo = 1e300, hi = 0.0;
  for (int s = 0; s < tm.state_count(); ++s) {
    if (s == tm.censor_state() || leb[s] < 1e-4) continue;
    const double d = rho.rho[s] / leb[s];
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  CHECK(hi - lo <= 1e-8 * hi);
}

TEST_CASE("TransferMatrix: censored mass small at default depth") {
  HyperbolicModel& m = default_model();
  TransferMatrix tm = TransferMatrix::build(m, TowerOptions{});
  CHECK(tm.censored_mass_fraction() < 1e-3);
  CHECK(tm.state_count() >= 20'000);
}

TEST_CASE("TransferMatrix: csv export is well-formed triplets") {
  HyperbolicModel& m = default_model();
  TowerOptions opts = small_tower();
  opts.quotient.bins_per_cell = 32;
  opts.quotient.j_max = 64;
  opts.base_bins = 8;
  opts.r_detail = 12;
  opts.max_level = 32;
  opts.tail_extension = 512;
  TransferMatrix tm = TransferMatrix::build(m, opts);
  std::ostringstream os;
  tm.export_csv(os);
  std::istringstream in(os.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "row,col,prob");
  std::vector<double> sums(tm.state_count(), 0.0);
  std::string line;
  while (std::getline(in, line)) {
    int r, c;
    double p;
    REQUIRE(std::sscanf(line.c_str(), "%d,%d,%lf", &r, &c, &p) == 3);
    REQUIRE(r >= 0);
    REQUIRE(r < tm.state_count());
    REQUIRE(c >= 0);
    REQUIRE(c < tm.state_count());
    sums[r] += p;
  }
  for (int s = 0; s < tm.state_count(); ++s) {
    CHECK(sums[s] == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("jacobian_regularity_fit: geometric regularity with beta below one") {
  HyperbolicModel& m = default_model();
  JacobianRegularity fit = jacobian_regularity_fit(m, 2000, 83);
  CHECK(fit.pairs_used > 200);
  CHECK(fit.beta < 1.0);
  CHECK(fit.beta > 0.0);
  CHECK(fit.c_f > 0.0);
  CHECK(fit.c_f < 1e3);
}

TEST_CASE("modulus_estimate: constants and cross-class jumps") {
  HyperbolicModel& m = default_model();
  auto constant = [](const TowerPoint&) { return 3.25; };
  CHECK(modulus_estimate(m, constant, ModulusFamily::polynomial, 2.0, 400, 89) == 0.0);

  // a function of the return time only jumps across classes; the modulus
  // is attained at separation-0 pairs and equals the largest jump
  auto by_r = [](const TowerPoint& t) { return t.R >= 2 ? 1.0 : 0.0; };
  const double d = modulus_estimate(m, by_r, ModulusFamily::polynomial, 2.0, 2000, 97);
  CHECK(d == doctest::Approx(1.0).epsilon(1e-12));

  // geometric family: separation-zero jumps dominate at beta^0 = 1
  const double g = modulus_estimate(m, by_r, ModulusFamily::geometric, 0.5, 2000, 97);
  CHECK(g >= 1.0);
  CHECK(g < 1e3);
  CHECK(modulus_estimate(m, constant, ModulusFamily::geometric, 0.5, 400, 89) == 0.0);
}

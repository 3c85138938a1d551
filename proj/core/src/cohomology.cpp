#include "towerlab/cohomology.hpp"

#include <algorithm>
#include <cmath>

#include "towerlab/errors.hpp"
#include "towerlab/quotient.hpp"
#include "towerlab/rng.hpp"

namespace towerlab {

namespace {

void check_summable(const HyperbolicModel& m, const Observable& phi) {
  const double alpha = m.intermittent().tau + 1.0;
  if (alpha * phi.eta <= 1.0) {
    throw ConvergenceWarning("chi: alpha*eta <= 1, the telescoping series is not summable");
  }
}

}  // namespace

ChiResult chi(const TowerPoint& t, const Observable& phi, int truncation,
              const HyperbolicModel& m, double reference_leaf_b) {
  check_summable(m, phi);
  if (t.level < 0 || t.level >= t.R) throw InvalidLevel("chi: bad tower point");
  ChiResult out;
  Point2 p = project(t, m);
  Point2 ph = t.base;
  ph.b = reference_leaf_b;
  {
    Point2 hp = ph;
    for (int k = 0; k < t.level; ++k) hp = m.step(hp);
    ph = hp;
  }
  const double alpha = m.intermittent().tau + 1.0;
  double acc = 0.0;
  double env_c = 0.0;  // empirical envelope constant sup_j d_j * j^alpha
  for (int j = 0; j < truncation; ++j) {
    acc += phi.eval(p) - phi.eval(ph);
    const double d = m.distance(p, ph);
    if (j >= 1) env_c = std::max(env_c, d * std::pow(static_cast<double>(j), alpha));
    p = m.step(p);
    ph = m.step(ph);
  }
  out.value = acc;
  // sum_{j>N} (C / j^alpha)^eta <= C^eta * N^{1-alpha eta} / (alpha eta - 1)
  const double ae = alpha * phi.eta;
  const double seminorm = phi.seminorm_estimate > 0.0 ? phi.seminorm_estimate : 1.0;
  out.tail_bound = seminorm * std::pow(env_c, phi.eta) *
                   std::pow(static_cast<double>(std::max(truncation, 1)), 1.0 - ae) / (ae - 1.0);
  return out;
}

PsiResult psi_decomposition(const TowerPoint& t, const Observable& phi, int truncation,
                            const HyperbolicModel& m, double reference_leaf_b) {
  check_summable(m, phi);
  PsiResult out;
  const ChiResult chi_p = chi(t, phi, truncation, m, reference_leaf_b);
  const TowerPoint ft = tower_step(t, m);
  const ChiResult chi_fp = chi(ft, phi, truncation, m, reference_leaf_b);
  const Point2 pi_p = project(t, m);
  out.value = phi.eval(pi_p) - chi_p.value + chi_fp.value;
  out.identity_residual =
      std::abs(phi.eval(pi_p) - (out.value + chi_p.value - chi_fp.value));

  // Closed-form route: sum of (phi pi F^j(hat p) - phi pi F^j(hat Fp)).
  // The truncation at N leaves the boundary term phi(pi F^N p), which we
  // add back so the two routes are algebraically identical.
  Point2 hp = t.base;
  hp.b = reference_leaf_b;
  for (int k = 0; k < t.level; ++k) hp = m.step(hp);
  Point2 hfp = ft.base;
  hfp.b = reference_leaf_b;
  for (int k = 0; k < ft.level; ++k) hfp = m.step(hfp);
  double acc = 0.0;
  Point2 p = pi_p;
  for (int j = 0; j < truncation; ++j) {
    acc += phi.eval(hp) - phi.eval(hfp);
    hp = m.step(hp);
    hfp = m.step(hfp);
    p = m.step(p);
  }
  out.closed_form = acc + phi.eval(p);
  return out;
}

double verify_gtheta(const HyperbolicModel& m, const Observable& phi, int truncation,
                     double theta_prime, int n_pairs, std::uint64_t seed,
                     double reference_leaf_b) {
  check_summable(m, phi);
  const Rect& base = m.cell(1);
  Rng rng(seed, 11);
  double sup = 0.0;
  for (int trial = 0; trial < n_pairs; ++trial) {
    const double u = base.u_lo + base.u_len() * rng.uniform();
    double v;
    if (trial % 4 == 0) {
      v = base.u_lo + base.u_len() * rng.uniform();
    } else {
      const double mag = std::pow(10.0, -(2.0 + 10.0 * rng.uniform()));
      v = std::min(base.u_hi, u + mag);
    }
    if (v == u) continue;
    ReturnResult ru = quotient_return(m, u, 100000);
    ReturnResult rv = quotient_return(m, v, 100000);
    if (ru.capped || rv.capped) continue;
    SeparationResult sep = quotient_separation(m, u, v, 256);
    const int s = sep.at_cap ? 256 : sep.s;
    int level = 0;
    if (s >= 1 && ru.R == rv.R && ru.R > 1) {
      level = static_cast<int>(rng.uniform_index(ru.R));
    } else if (s >= 1 && ru.R != rv.R) {
      continue;  // should not happen: same cylinder forces same return time
    }
    TowerPoint tx{Point2{1, u, reference_leaf_b}, s >= 1 ? level : 0, ru.R};
    TowerPoint ty{Point2{1, v, reference_leaf_b}, s >= 1 ? level : 0, rv.R};
    const double px = psi_decomposition(tx, phi, truncation, m, reference_leaf_b).value;
    const double py = psi_decomposition(ty, phi, truncation, m, reference_leaf_b).value;
    const double df = std::abs(px - py);
    if (df == 0.0) continue;
    sup = std::max(sup, df * std::pow(static_cast<double>(std::max(s, 1)), theta_prime));
  }
  return sup;
}

}  // namespace towerlab

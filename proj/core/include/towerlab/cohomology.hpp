#ifndef TOWERLAB_COHOMOLOGY_HPP
#define TOWERLAB_COHOMOLOGY_HPP

#include <cstdint>

#include "towerlab/stats.hpp"
#include "towerlab/tower.hpp"

namespace towerlab {

// Telescoping coboundary construction: chi compares an orbit with the
// orbit of its representative on the reference unstable leaf; psi is the
// future-coordinate part of the observable, psi = phi o pi - chi + chi o F.

struct ChiResult {
  double value = 0.0;       // truncated series
  double tail_bound = 0.0;  // empirical-envelope estimate of the dropped tail
};

// Truncated chi at a tower point.  Throws ConvergenceWarning when
// alpha * eta <= 1 (the series has no summable majorant).
ChiResult chi(const TowerPoint& t, const Observable& phi, int truncation,
              const HyperbolicModel& m, double reference_leaf_b = 0.5);

struct PsiResult {
  double value = 0.0;        // phi o pi - chi + chi o F at the same truncation
  double closed_form = 0.0;  // future-coordinate series plus its boundary term
  double identity_residual = 0.0;  // phi o pi - (psi + chi - chi o F)
};

PsiResult psi_decomposition(const TowerPoint& t, const Observable& phi, int truncation,
                            const HyperbolicModel& m, double reference_leaf_b = 0.5);

// D_psi estimate for the polynomial modulus max(s,1)^{theta'} over sampled
// same-cylinder pairs (plus unconstrained pairs at separation 0).
double verify_gtheta(const HyperbolicModel& m, const Observable& phi, int truncation,
                     double theta_prime, int n_pairs, std::uint64_t seed,
                     double reference_leaf_b = 0.5);

}  // namespace towerlab

#endif

#ifndef TOWERLAB_INTERMITTENT_HPP
#define TOWERLAB_INTERMITTENT_HPP

#include <cstddef>
#include <vector>

namespace towerlab {

// Parameters of the one-dimensional intermittent map
//   phi(a) = a (1 + |a|^theta),   0 < theta < 1,
// with a neutral fixed point at 0.  tau = 1/theta controls every
// polynomial rate downstream.  The negative branch is the odd
// reflection a -> -phi(-a).
struct IntermittentParams {
  double theta = 0.5;
  double tau = 2.0;  // 1/theta, kept explicit and checked
  double a0 = 0.5;           // right edge of the unstable fiber of W0
  double a0_prime = -0.5;    // left edge
  double newton_tol = 1e-14;
  std::size_t max_seq_len = 2'000'000;

  static IntermittentParams with_theta(double theta);
  void validate() const;  // throws ConfigError on violated invariants
  double domain_radius() const;
};

// Strictly decreasing boundary sequence a_0 > a_1 > ... > 0 with
// phi(a_{n+1}) = a_n, or its mirror image on the negative side.
struct BoundarySequence {
  enum class Side { right, left };
  std::vector<double> values;  // signed; monotone toward 0
  Side side = Side::right;

  std::size_t size() const { return values.size(); }
  double abs_value(std::size_t n) const { return side == Side::right ? values[n] : -values[n]; }
};

double phi(double a, const IntermittentParams& p);
double phi_prime(double a, const IntermittentParams& p);

// Inverse of phi on its image; bracketed Newton with bisection fallback.
// Guaranteed bracket [0, |b|] since phi(x) >= x on [0, 1].
double phi_inverse(double b, const IntermittentParams& p);

BoundarySequence boundary_sequence(const IntermittentParams& p, BoundarySequence::Side side,
                                   std::size_t n_terms);

// (phi^n)'(x) accumulated in log space; returns exp of the sum.
double derivative_product(double x, std::size_t n, const IntermittentParams& p);
double log_derivative_product(double x, std::size_t n, const IntermittentParams& p);

// |log (phi^i)'(a) - log (phi^i)'(b)| for a,b in [a_{n+1}, a_n], i <= n.
double distortion_ratio(double a, double b, std::size_t i, std::size_t n,
                        const IntermittentParams& p, const BoundarySequence& seq);

}  // namespace towerlab

#endif

#include "towerlab/intermittent.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "towerlab/errors.hpp"

namespace towerlab {

IntermittentParams IntermittentParams::with_theta(double theta) {
  IntermittentParams p;
  p.theta = theta;
  p.tau = 1.0 / theta;
  p.validate();
  return p;
}

void IntermittentParams::validate() const {
  if (!(theta > 0.0 && theta < 1.0) && theta != 1.0) {
    // theta = 1 is admitted for the closed-form checks even though the
    // polynomial regime of interest is 0 < theta < 1.
    throw ConfigError("IntermittentParams: theta must lie in (0,1]");
  }
  if (std::abs(tau * theta - 1.0) > 1e-12) {
    throw ConfigError("IntermittentParams: tau must equal 1/theta");
  }
  if (!(a0 > 0.0 && a0 < 1.0) || !(a0_prime < 0.0 && a0_prime > -1.0)) {
    throw ConfigError("IntermittentParams: need a0_prime < 0 < a0 with |a0|,|a0_prime| < 1");
  }
  if (!(newton_tol > 0.0) || newton_tol > 1e-12) {
    throw ConfigError("IntermittentParams: newton_tol must be in (0, 1e-12]");
  }
  if (max_seq_len == 0) {
    throw ConfigError("IntermittentParams: max_seq_len must be positive");
  }
}

double IntermittentParams::domain_radius() const {
  return std::max(a0, -a0_prime);
}

double phi(double a, const IntermittentParams& p) {
  const double r = p.domain_radius();
  if (std::abs(a) > r * (1.0 + 1e-12)) {
    throw DomainError("phi: |a| = " + std::to_string(std::abs(a)) + " exceeds domain radius " +
                      std::to_string(r));
  }
  return a * (1.0 + std::pow(std::abs(a), p.theta));
}

double phi_prime(double a, const IntermittentParams& p) {
  // d/da [a (1 + |a|^theta)] = 1 + (1+theta) |a|^theta, valid on both branches.
  return 1.0 + (1.0 + p.theta) * std::pow(std::abs(a), p.theta);
}

double phi_inverse(double b, const IntermittentParams& p) {
  const double r = p.domain_radius();
  const double image_edge = r * (1.0 + std::pow(r, p.theta));
  if (std::abs(b) > image_edge * (1.0 + 1e-12)) {
    throw DomainError("phi_inverse: value outside the image of phi");
  }
  if (b == 0.0) return 0.0;
  const double sign = b > 0.0 ? 1.0 : -1.0;
  const double target = std::abs(b);

  // phi is strictly increasing with phi(x) >= x, so [lo, hi] = [0, target]
  // brackets the root (clamped to the domain radius).
  double lo = 0.0;
  double hi = std::min(target, r);
  double x = hi * 0.5;
  for (int it = 0; it < 200; ++it) {
    const double f = x * (1.0 + std::pow(x, p.theta)) - target;
    if (f > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    const double dfdx = 1.0 + (1.0 + p.theta) * std::pow(x, p.theta);
    double xn = x - f / dfdx;
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);  // bisection fallback
    const double step = std::abs(xn - x);
    x = xn;
    if (step <= p.newton_tol && std::abs(x * (1.0 + std::pow(x, p.theta)) - target) <= 4.0 * p.newton_tol) {
      return sign * x;
    }
  }
  if (std::abs(x * (1.0 + std::pow(x, p.theta)) - target) <= 16.0 * p.newton_tol) {
    return sign * x;
  }
  throw ConvergenceError("phi_inverse: tolerance not met within iteration cap");
}

BoundarySequence boundary_sequence(const IntermittentParams& p, BoundarySequence::Side side,
                                   std::size_t n_terms) {
  if (n_terms > p.max_seq_len) {
    throw ConfigError("boundary_sequence: n_terms exceeds max_seq_len");
  }
  BoundarySequence seq;
  seq.side = side;
  seq.values.resize(n_terms + 1);
  seq.values[0] = side == BoundarySequence::Side::right ? p.a0 : p.a0_prime;
  for (std::size_t n = 1; n <= n_terms; ++n) {
    seq.values[n] = phi_inverse(seq.values[n - 1], p);
  }
  return seq;
}

double log_derivative_product(double x, std::size_t n, const IntermittentParams& p) {
  const double r = p.domain_radius();
  double acc = 0.0;
  double a = x;
  for (std::size_t j = 0; j < n; ++j) {
    if (std::abs(a) > r * (1.0 + 1e-12)) {
      throw DomainError("derivative_product: orbit escaped the fiber after " + std::to_string(j) +
                        " steps");
    }
    acc += std::log(phi_prime(a, p));
    a = a * (1.0 + std::pow(std::abs(a), p.theta));
  }
  return acc;
}

double derivative_product(double x, std::size_t n, const IntermittentParams& p) {
  return std::exp(log_derivative_product(x, n, p));
}

double distortion_ratio(double a, double b, std::size_t i, std::size_t n,
                        const IntermittentParams& p, const BoundarySequence& seq) {
  if (i > n) throw DomainError("distortion_ratio: need i <= n");
  if (n + 1 >= seq.size()) throw SequenceExhausted("distortion_ratio: sequence table too short");
  const double hi = std::abs(seq.values[n]);
  const double lo = std::abs(seq.values[n + 1]);
  for (double v : {std::abs(a), std::abs(b)}) {
    if (v < lo * (1.0 - 1e-12) || v > hi * (1.0 + 1e-12)) {
      throw DomainError("distortion_ratio: point not in [a_{n+1}, a_n]");
    }
  }
  return std::abs(log_derivative_product(std::abs(a), i, p) -
                  log_derivative_product(std::abs(b), i, p));
}

}  // namespace towerlab

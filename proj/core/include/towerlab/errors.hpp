#ifndef TOWERLAB_ERRORS_HPP
#define TOWERLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace towerlab {

// Base class for all towerlab errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Argument outside the domain of a map or operation.
struct DomainError : Error {
  explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Iterative solver failed to reach the requested tolerance.
struct ConvergenceError : Error {
  explicit ConvergenceError(const std::string& msg) : Error(msg) {}
};

// A truncated series whose tail estimate exceeds tolerance, or a
// summability precondition that fails.
struct ConvergenceWarning : Error {
  explicit ConvergenceWarning(const std::string& msg) : Error(msg) {}
};

// Inconsistent or invalid configuration.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Transition matrix has no all-positive power within the Wielandt cap.
struct NotAperiodic : ConfigError {
  explicit NotAperiodic(const std::string& msg) : ConfigError(msg) {}
};

// Two points were expected on a common stable/unstable leaf but are not.
struct LeafMismatch : Error {
  explicit LeafMismatch(const std::string& msg) : Error(msg) {}
};

// An iteration cap was reached before the event of interest.
struct CapExceeded : Error {
  explicit CapExceeded(const std::string& msg) : Error(msg) {}
};

// Level classification needed a boundary-sequence entry beyond the table.
struct SequenceExhausted : Error {
  explicit SequenceExhausted(const std::string& msg) : Error(msg) {}
};

// A stochastic-matrix row could not be normalized within tolerance.
struct MassLeak : Error {
  explicit MassLeak(const std::string& msg) : Error(msg) {}
};

// Fixed-point iteration did not converge within the iteration cap.
struct NoConvergence : Error {
  explicit NoConvergence(const std::string& msg) : Error(msg) {}
};

struct InsufficientSamples : Error {
  explicit InsufficientSamples(const std::string& msg) : Error(msg) {}
};

struct DegenerateSupport : Error {
  explicit DegenerateSupport(const std::string& msg) : Error(msg) {}
};

struct DegenerateWindow : Error {
  explicit DegenerateWindow(const std::string& msg) : Error(msg) {}
};

// Coupling density subtraction would produce a negative value.
struct NegativeDensity : Error {
  explicit NegativeDensity(const std::string& msg) : Error(msg) {}
};

struct ShapeMismatch : Error {
  explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

// Tower point with level >= return time.
struct InvalidLevel : Error {
  explicit InvalidLevel(const std::string& msg) : Error(msg) {}
};

}  // namespace towerlab

#endif

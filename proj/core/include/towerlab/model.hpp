#ifndef TOWERLAB_MODEL_HPP
#define TOWERLAB_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "towerlab/intermittent.hpp"

namespace towerlab {

// Piecewise-defined invertible torus-like model: product intermittent
// dynamics (phi(a), phi^{-1}(b)) on the neutral cell W0, affine uniformly
// hyperbolic branches on W1..Wd routed by an aperiodic 0/1 transition
// matrix.  Every branch crosses the full unstable extent of its target
// cell, and branch images are disjoint stable slabs, so the map is
// invertible a.e. and Markov.

struct Rect {
  double u_lo, u_hi;  // unstable extent
  double s_lo, s_hi;  // stable extent
  double u_len() const { return u_hi - u_lo; }
  double s_len() const { return s_hi - s_lo; }
};

struct Point2 {
  int cell = 0;
  double a = 0.0;  // unstable coordinate
  double b = 0.0;  // stable coordinate
};

// One monotone full-crossing branch of the map.
struct Branch {
  int source = 0;
  int target = 0;
  bool intermittent = false;  // W0 self branch: u -> phi(u), s -> phi^{-1}(s)
  double u_lo = 0.0, u_hi = 0.0;  // domain in the source fiber
  double u_slope = 1.0;           // affine branches only
  double s_img_lo = 0.0, s_img_hi = 0.0;  // image slab in the target cell
  double s_slope = 1.0;
};

struct ModelConfig {
  double theta = 0.5;
  double lambda = 0.4;
  int cells = 4;  // d+1 with d >= 2
  std::vector<int> transition;  // row-major 0/1, cells x cells; empty = all ones
  double a0 = 0.5;
  double a0_prime = -0.5;
  std::size_t seq_table_len = 300'000;
  bool affine_w0 = false;  // test fixture: replace the intermittent branch by affine
};

class HyperbolicModel {
 public:
  static HyperbolicModel build(const ModelConfig& config);

  const ModelConfig& config() const { return cfg_; }
  const IntermittentParams& intermittent() const { return params_; }
  bool has_neutral_cell() const { return !cfg_.affine_w0; }
  int cell_count() const { return static_cast<int>(cells_.size()); }
  const Rect& cell(int i) const { return cells_[i]; }
  int n0() const { return n0_; }
  double lambda() const { return cfg_.lambda; }
  const std::vector<Branch>& branches() const { return branches_; }
  const std::vector<double>& boundary_table_right() const { return a_right_; }
  const std::vector<double>& boundary_table_left() const { return a_left_; }

  bool contains(const Point2& p) const;
  void require_valid(const Point2& p) const;  // throws DomainError

  Point2 step(const Point2& p) const;
  Point2 step_inverse(const Point2& p) const;

  // 1-D expanding Markov factor of step (stable coordinate dropped).
  // Returns the image cell and unstable coordinate.
  void quotient_step(int cell, double u, int& cell_out, double& u_out) const;
  // Branch selected by (cell, u); index into branches().  Points exactly
  // on an interior branch boundary resolve to the lower branch.
  int branch_at(int cell, double u) const;
  // Flags the measure-zero tie case so callers can log reproducibly.
  bool on_branch_boundary(int cell, double u) const;

  // Depth n of the level set containing u in W0: u in [a_{n+1}, a_n] on the
  // right, mirrored on the left.  Throws SequenceExhausted past the table.
  int level_depth(double u) const;

  // max-of-coordinates distance inside a common cell chart; cross-cell
  // pairs saturate at 1.
  double distance(const Point2& x, const Point2& y) const;

  // Interval-arithmetic check that each branch image crosses the full
  // unstable extent of its target.  Throws ConfigError on failure.
  void verify_markov_crossing() const;

 private:
  ModelConfig cfg_;
  IntermittentParams params_;
  std::vector<Rect> cells_;
  std::vector<Branch> branches_;
  // branch index ranges per source cell, ordered by u_lo
  std::vector<std::vector<int>> branches_by_source_;
  // entering branches per target cell, ordered by s_img_lo
  std::vector<std::vector<int>> branches_by_target_;
  std::vector<double> a_right_;  // a_0 > a_1 > ... > 0
  std::vector<double> a_left_;   // a'_0 < a'_1 < ... < 0
  int n0_ = 1;
};

// Smallest n with A^n entrywise positive, capped at dim^2 (Wielandt).
// Throws NotAperiodic if the cap is exceeded.
int aperiodicity_index(const std::vector<int>& row_major, int dim);

// Contraction envelope report for leaf pairs: r_n = d_n * n^{tau+1} / d_0.
struct EnvelopeReport {
  std::vector<double> ratios;      // r_n for n = 1..N
  double running_sup = 0.0;
  bool degenerate = false;         // x == y
};

// Forward iteration along a common stable leaf (same cell, same a).
EnvelopeReport check_contraction_stable(const Point2& x, const Point2& y, std::size_t n,
                                        const HyperbolicModel& m);
// Backward iteration along a common unstable leaf.  The pair sits at the
// end of the forward orbit of `start`, separated by `delta` in the
// unstable coordinate; the recorded branch history resolves the inverse
// (backward stable coordinates expand, so a float reconstruction of the
// inverse orbit would shadow off the attractor).  Requires n <= prep.
EnvelopeReport check_contraction_unstable(const Point2& start, double delta, int prep,
                                          std::size_t n, const HyperbolicModel& m,
                                          std::uint64_t dither_seed = 0);

}  // namespace towerlab

#endif

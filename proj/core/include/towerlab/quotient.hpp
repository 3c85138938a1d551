#ifndef TOWERLAB_QUOTIENT_HPP
#define TOWERLAB_QUOTIENT_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "towerlab/model.hpp"

namespace towerlab {

// Machinery for the 1-D expanding factor of the model: the checkpoint
// recursion defining the return time to the reference cell, direct
// symbolic walks, and an exact one-step Ulam discretization over the
// partition adapted to the neutral-cell level sets.

// -------- checkpoint recursion ------------------------------------------

struct CheckpointWalk {
  int R = 0;                          // return time; 0 if capped
  std::vector<int> checkpoint_times;  // increasing checkpoint sequence
  std::vector<int> visited_cells;     // cell at each checkpoint
  bool capped = false;
};

// Runs the checkpoint recursion for a point on the base fiber (the
// unstable fiber of cell 1).  The first checkpoint sits n0 steps out; a
// checkpoint inside the neutral cell at depth k pushes the next one k+n0
// steps ahead; the walk returns at the first checkpoint landing in cell 1.
CheckpointWalk run_checkpoints(const HyperbolicModel& m, double u, int cap);

// Return time only; cap <= 0 means no cap.  Throws CapExceeded never;
// returns cap+ as `capped`.
struct ReturnResult {
  int R = 0;
  double u_image = 0.0;  // f^R(u) on the base fiber
  double log_deriv = 0.0;
  bool capped = false;
};
ReturnResult quotient_return(const HyperbolicModel& m, double u, int cap);

// Number of synchronized return iterations until the two base points
// first follow distinct return cylinders (distinct branch itineraries or
// distinct return times).  `at_cap` set when they never separate within cap.
struct SeparationResult {
  int s = 0;
  bool at_cap = false;
};
SeparationResult quotient_separation(const HyperbolicModel& m, double u, double v, int cap);

// -------- one-step Ulam chain -------------------------------------------

struct QuotientUlamOptions {
  int bins_per_cell = 512;  // uniform bins on each affine cell fiber
  int j_max = 4000;         // level sets resolved individually inside W0
};

// Exact Ulam discretization of the one-step factor map.  Bins: uniform on
// the affine fibers, the level sets J_n / J'_n individually inside the
// neutral cell (the neutral dynamics maps level bin onto level bin, so
// those rows are deterministic), exit strips aligned with the exit
// branches, and one pooled deep bin per side.  All weights come from
// single-step branch endpoint inversion.
class QuotientUlam {
 public:
  struct Bin {
    int cell;
    double lo, hi;
    int depth;  // level-set index inside the neutral cell, -1 elsewhere, -2 pooled deep
  };

  static QuotientUlam build(const HyperbolicModel& m, const QuotientUlamOptions& opts = {});

  const HyperbolicModel& model() const { return *model_; }
  int state_count() const { return static_cast<int>(bins_.size()); }
  const std::vector<Bin>& bins() const { return bins_; }
  int bin_at(int cell, double u) const;
  double bin_length(int s) const { return bins_[s].hi - bins_[s].lo; }
  double bin_mid(int s) const { return 0.5 * (bins_[s].lo + bins_[s].hi); }

  // Mass pushforward y = x P (row-stochastic kernel).
  void apply(const std::vector<double>& x, std::vector<double>& y) const;
  // Same, but transitions into cell-1 bins are diverted to `hit` (taboo
  // iteration against the reference cell).
  void apply_taboo(const std::vector<double>& x, std::vector<double>& y,
                   std::vector<double>& hit) const;

  const std::vector<std::pair<std::int32_t, double>>& row(int s) const { return rows_[s]; }
  double max_row_sum_error() const;

  // Lebesgue mass of each bin, normalized over the whole state space.
  std::vector<double> lebesgue_mass() const;
  // Indices of the cell-1 bins in fiber order.
  const std::vector<int>& base_bins() const { return base_bins_; }

  // Stationary density (mass per bin) by power iteration from the
  // uniform density; l1 residual target `tol`.
  std::vector<double> stationary(double tol, int max_iter, double* residual_out) const;

 private:
  const HyperbolicModel* model_ = nullptr;
  std::vector<Bin> bins_;
  std::vector<std::vector<std::pair<std::int32_t, double>>> rows_;
  std::vector<int> base_bins_;
  // per-cell lookup: bin index ranges
  std::vector<int> cell_first_bin_;
  QuotientUlamOptions opts_;
};

}  // namespace towerlab

#endif

#ifndef TOWERLAB_COUPLING_HPP
#define TOWERLAB_COUPLING_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "towerlab/model.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/tower.hpp"

namespace towerlab {

// Coupling scheme on the discretized quotient tower: alternating stopping
// times and the simultaneous return T sampled on pair orbits, and the
// density-subtraction recursion run on the product grid with fixed-horizon
// return blocks.

struct CouplingConfig {
  double K = 2.0;         // per-cell ratio bound exponent
  double rho = 4.5;       // schedule exponent, in (zeta+1, theta_reg / e^K)
  double beta = 0.5;      // geometric regularity base
  double theta_reg = 0.0; // density regularity exponent, > 2 e^K
  int i0 = 1;             // first subtraction step
  double zeta = 3.0;      // tail exponent target
  double c_f_hat = 0.0;   // 2 * fitted one-return regularity constant

  void validate() const;  // throws ConfigError when the constraint chain fails
};

// K from the fitted regularity constant with a multiplicative margin, the
// schedule exponent between its bounds, and the smallest i0 with eps < 1.
CouplingConfig derive_coupling_config(double c_f, double beta, double zeta, double k_margin);

double epsilon_schedule(const CouplingConfig& cfg, int i);
int first_index_with_eps_below_one(const CouplingConfig& cfg);

// -------- stopping times on pair orbits -----------------------------------

struct PairWalk {
  std::vector<long long> taus;  // alternating stopping times
  long long T = 0;              // first tau_i, i >= 2, with both at the base
  bool capped = false;
};

// Alternating recursion: each stopping time advances one side to its next
// base visit at least n0 steps past the previous one; T is the first such
// time that is a base visit of both sides.  Starts are tower points given
// by base coordinate and level.
//
// Long compositions of expanding branches exhaust the 53-bit mantissa
// after a few dozen returns and the float orbit degenerates onto branch
// endpoints.  The samplers therefore re-dither each return by one part in
// 2^48; pass dither = nullptr for the exact deterministic walk.
PairWalk stopping_times(const HyperbolicModel& m, double u, int level_u, double v, int level_v,
                        long long cap, Rng* dither = nullptr);

// T_1 = T, T_k = T_{k-1} + T o (pair shift); returns absolute times.
std::vector<long long> simultaneous_return_sequence(const HyperbolicModel& m, double u, double v,
                                                    int max_terms, long long cap, bool& capped,
                                                    Rng* dither = nullptr);

struct PairEnsembleStats {
  std::vector<long long> t_samples;  // uncapped T values
  std::int64_t censored = 0;
  // counts[i][j] = #samples with T_{i+1} <= n_j < T_{i+2} (i.e. between
  // consecutive simultaneous returns), i = 0 .. max_i-1
  std::vector<std::vector<std::int64_t>> interval_counts;
  std::vector<int> n_grid;
  // increments T_{i+1} - T_i per i for the domination check
  std::vector<std::vector<long long>> increments;
  std::int64_t samples = 0;
};

using StartSampler = std::function<void(Rng&, double&, int&)>;  // (u, level)

StartSampler lebesgue_tower_sampler(const HyperbolicModel& m, int cap);
// level-0 supported density with weight w(u) on the base fiber
StartSampler base_density_sampler(const HyperbolicModel& m,
                                  const std::function<double(double)>& w, double w_max);

PairEnsembleStats sample_pair_ensemble(const HyperbolicModel& m, const StartSampler& sx,
                                       const StartSampler& sy, std::int64_t n_pairs,
                                       long long cap, const std::vector<int>& n_grid, int max_i,
                                       std::uint64_t seed, int workers);

// -------- density recursion on the product grid ---------------------------

struct CouplingStepReport {
  int i = 0;
  double eps_i = 0.0;
  double ratio_bound = 0.0;        // max over admissible cells of the max/min ratio
  double ratio_bound_all = 0.0;    // including inadmissible (carried) cells
  double admissible_fraction = 0.0;  // landed mass covered by admissible cells
  double decrease_margin = 0.0;    // max over grid of remaining/incoming (landed part)
  double marginal_residual = 0.0;
  double coupled_mass = 0.0;
  double remaining_mass = 0.0;
  bool decrease_ok = false;
};

class CouplingGrid {
 public:
  // horizon: steps per block; must exceed max_level so every state can
  // land on the base at exactly the horizon
  static CouplingGrid build(const HyperbolicModel& m, const TowerOptions& tower_opts,
                            int horizon);

  const TransferMatrix& matrix() const { return tm_; }
  int horizon() const { return horizon_; }
  int state_count() const { return S_; }
  const std::vector<int>& level0_states() const { return level0_; }

  // grid density (mass per state) of a base-supported weight
  std::vector<double> base_density(const std::function<double(double)>& w) const;

  // initialize the pair density from two marginal mass vectors
  void start(const std::vector<double>& lambda, const std::vector<double>& lambda_prime);

  // one block step: push by the horizon kernel, then subtract the matched
  // product component on admissible cells when i >= i0
  CouplingStepReport density_step(const CouplingConfig& cfg);

  int iteration() const { return iter_; }
  double remaining_mass() const;

  // Read-only per-cell ratio report for the current pair density: the
  // worst landing max/min ratio over admissible cells, the worst overall,
  // and the number of cells beyond the e^K bound (reported, not thrown;
  // violations indicate the first subtraction step is still too early).
  struct RatioReport {
    double worst_admissible = 0.0;
    double worst_overall = 0.0;
    std::int64_t violations = 0;
    double admissible_mass_fraction = 1.0;
  };
  RatioReport ratio_bound_check(const CouplingConfig& cfg) const;
  const std::vector<double>& pair_mass() const { return pair_; }  // row-major S x S

  // per-state ratio data for the cell admissibility check
  double state_ratio(int s) const { return ratio_[s]; }

 private:
  TransferMatrix tm_{};
  int horizon_ = 0;
  int S_ = 0;
  std::vector<double> ph_;      // dense P^horizon, row-major
  std::vector<int> level0_;
  std::vector<double> m0_;      // normalized reference mass of level-0 states
  std::vector<double> w0_;      // S x B landing kernel (P^H restricted to level 0)
  std::vector<double> gmin_, gmax_, ratio_;
  std::vector<double> pair_;    // S x S pair mass
  int iter_ = 0;
};

// -------- assembly ---------------------------------------------------------

struct TvBoundSeries {
  std::vector<int> n_values;
  std::vector<double> direct_tv;
  std::vector<double> bound;
  std::vector<double> p_t_gt_n;
  double k1 = 0.0;
  bool dominated = true;  // direct <= bound (1 + tol) everywhere
};

TvBoundSeries assemble_tv_bounds(const TransferMatrix& tm, const PairEnsembleStats& stats,
                                     const std::vector<double>& lambda,
                                     const std::vector<double>& lambda_prime,
                                     const std::vector<int>& n_values, const CouplingConfig& cfg,
                                     double tolerance = 0.05);

struct IncrementDomination {
  std::vector<int> i_values;
  std::vector<double> k2;          // fitted constants per i
  std::vector<std::int64_t> samples;
};

IncrementDomination increment_domination_check(const PairEnsembleStats& stats,
                                               const PairEnsembleStats& reference);

}  // namespace towerlab

#endif

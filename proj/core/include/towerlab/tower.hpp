#ifndef TOWERLAB_TOWER_HPP
#define TOWERLAB_TOWER_HPP

#include <cstdint>
#include <iosfwd>
#include <functional>
#include <vector>

#include "towerlab/model.hpp"
#include "towerlab/quotient.hpp"

namespace towerlab {

// -------- continuous tower points -----------------------------------------

struct TowerPoint {
  Point2 base;    // point of the reference cell
  int level = 0;  // 0 <= level < R(base)
  int R = 0;      // cached return time of the base
};

TowerPoint make_tower_point(const HyperbolicModel& m, const Point2& base, int cap = 1'000'000);
TowerPoint tower_step(const TowerPoint& t, const HyperbolicModel& m, int cap = 1'000'000);
Point2 project(const TowerPoint& t, const HyperbolicModel& m);

// Label sequence of the partition elements visited by t, F t, ..., F^n t.
// Two points lie in the same depth-n cylinder iff their label sequences
// agree.  A label packs (level, return-cylinder id) where the cylinder id
// hashes the branch itinerary of the base's return block.
std::vector<std::uint64_t> partition_cylinder(const TowerPoint& t, int n,
                                              const HyperbolicModel& m, int cap = 1'000'000);

// sup over sampled same-cylinder pairs of d(pi F^k x, pi F^k y) * k^{tau+1},
// one value per requested k.
struct DiameterEnvelope {
  std::vector<int> k_values;
  std::vector<double> sup_scaled;  // sup of d * k^{tau+1}
  int pairs_used = 0;
};
DiameterEnvelope diameter_check(const HyperbolicModel& m, const std::vector<int>& k_values,
                                int n_pairs, std::uint64_t seed);

// Truncated product defining the reference-measure weight along a stable
// leaf.  In this model the unstable derivative is independent of the
// stable coordinate, so the weight is exactly 1; the functional overload
// exists for the synthetic self-test.
struct WeightResult {
  double log_weight = 0.0;
  std::vector<double> partial_logs;  // after 1, 2, ..., N factors
};
WeightResult reference_measure_weight(const Point2& x, int n_factors, const HyperbolicModel& m,
                                      double reference_leaf_b = 0.5);
WeightResult reference_measure_weight_custom(
    int n_factors, const std::function<double(int)>& log_ratio_term);

// -------- discretized quotient tower --------------------------------------

struct TowerOptions {
  QuotientUlamOptions quotient;  // resolution of the one-step factor chain
  int base_bins = 32;            // tower base resolution on the reference fiber
  int r_detail = 64;             // (bin, R) groups resolved individually up to here
  int max_level = 2048;          // levels above are pooled into the censor state
  int tail_extension = 16384;    // extended taboo horizon for the censor row
  int jacobian_samples = 8;      // per-group metadata samples
};

struct JacStats {
  double log_mean = 0.0, log_min = 0.0, log_max = 0.0;
  int count = 0;
};

struct InvariantDensity {
  std::vector<double> rho;  // mass per state, sums to 1
  double residual = 0.0;
  double floor_non_censored = 0.0;
  double lambda2_estimate = 0.0;
  int iterations = 0;
};

// Row-stochastic Ulam discretization of the quotient tower.  States:
//   - resolved groups g = (base bin, return time r <= r_detail), carrying
//     levels 0..r-1 (climb is deterministic, the roof returns to base),
//   - one pooled deep column per level for returns beyond r_detail,
//   - a censor state for levels >= max_level.
// Everything is computed from the exact one-step factor chain by taboo
// iteration against the reference cell.
class TransferMatrix {
 public:
  static TransferMatrix build(const HyperbolicModel& m, const TowerOptions& opts = {});

  struct Group {
    int base_bin = 0;
    int r = 0;
    double mass = 0.0;     // Lebesgue mass of the group within the base fiber
    int first_state = 0;   // its level-0 state
  };

  struct StateInfo {
    bool censor = false;
    bool deep = false;
    int group = -1;  // resolved group index, -1 otherwise
    int level = 0;
  };

  int state_count() const { return n_states_; }
  StateInfo describe(int state) const;
  int censor_state() const { return censor_state_; }
  int deep_first_state() const { return deep_first_state_; }
  const std::vector<Group>& groups() const { return groups_; }
  int base_bins() const { return opts_.base_bins; }
  int max_level() const { return opts_.max_level; }
  const TowerOptions& options() const { return opts_; }

  const std::vector<std::vector<std::pair<int, double>>>& roof_rows() const { return roof_rows_; }
  const JacStats& roof_jacobian(int group) const { return roof_jac_[group]; }

  // mass pushforward y = x P
  void apply(const std::vector<double>& x, std::vector<double>& y) const;
  double max_row_sum_error() const;

  // Lebesgue (reference) mass per state, normalized; censored share folded
  // into the censor state.
  std::vector<double> lebesgue_mass() const;
  // censored share of the normalized tower measure
  double censored_mass_fraction() const;
  double pooled_deep_fraction() const { return deep_total_; }

  InvariantDensity invariant_density(double tol = 1e-10, int max_iter = 200'000) const;

  // CSV triplets (row, col, prob), one line per nonzero entry.
  void export_csv(std::ostream& os) const;

  const QuotientUlam& chain() const { return chain_; }
  const HyperbolicModel& model() const { return *model_; }

 private:
  const HyperbolicModel* model_ = nullptr;
  QuotientUlam chain_;
  TowerOptions opts_;
  std::vector<Group> groups_;
  std::vector<std::vector<std::pair<int, double>>> roof_rows_;  // over base bins
  std::vector<JacStats> roof_jac_;
  // allocation of inflow at a base bin over (group level-0 states | deep)
  std::vector<std::vector<std::pair<int, double>>> base_alloc_;  // per base bin
  std::vector<double> base_deep_frac_;                           // share entering the deep column
  std::vector<double> deep_climb_;  // per level l >= r_detail: P(level up)
  std::vector<std::vector<std::pair<int, double>>> deep_exit_rows_;  // over base bins
  std::vector<double> deep_level_mass_;  // Lebesgue mass per deep level
  double deep_total_ = 0.0;
  double censored_leb_ = 0.0;
  double censor_self_ = 0.0;
  std::vector<std::pair<int, double>> censor_exit_row_;  // over base bins
  int deep_first_state_ = 0;
  int censor_state_ = 0;
  int n_states_ = 0;
  int deep_levels_ = 0;

  void distribute_to_base(double inflow, int base_bin, std::vector<double>& y) const;
};

// Fit of the one-return Jacobian regularity: over sampled same-cylinder
// pairs, |J(x)/J(y) - 1| <= C_F * beta^{s(images)}.  Returns the fitted
// beta (log-regression) and the resulting constant C_F.
struct JacobianRegularity {
  double c_f = 0.0;
  double beta = 0.5;
  int pairs_used = 0;
};
JacobianRegularity jacobian_regularity_fit(const HyperbolicModel& m, int n_pairs,
                                           std::uint64_t seed);

// Modulus-of-continuity estimate over sampled same-class pairs of tower
// points: geometric family sup |df| / beta^s, polynomial family
// sup |df| * max(s,1)^theta.
enum class ModulusFamily { geometric, polynomial };
double modulus_estimate(const HyperbolicModel& m,
                        const std::function<double(const TowerPoint&)>& f, ModulusFamily family,
                        double exponent, int n_pairs, std::uint64_t seed);

}  // namespace towerlab

#endif

#include "towerlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "towerlab/errors.hpp"
#include "towerlab/rng.hpp"

namespace towerlab {

int aperiodicity_index(const std::vector<int>& row_major, int dim) {
  if (dim <= 0 || static_cast<int>(row_major.size()) != dim * dim) {
    throw ConfigError("aperiodicity_index: matrix must be dim x dim");
  }
  for (int i = 0; i < dim; ++i) {
    bool any = false;
    for (int j = 0; j < dim; ++j) any = any || row_major[i * dim + j] != 0;
    if (!any) throw ConfigError("aperiodicity_index: row " + std::to_string(i) + " is empty");
  }
  // Boolean matrix powers; saturating to {0,1} keeps values bounded.
  std::vector<int> pow = row_major;
  for (int& v : pow) v = v != 0 ? 1 : 0;
  const int cap = dim * dim;
  std::vector<int> next(dim * dim);
  for (int n = 1; n <= cap; ++n) {
    bool all_positive = true;
    for (int v : pow) all_positive = all_positive && v > 0;
    if (all_positive) return n;
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) {
        int acc = 0;
        for (int k = 0; k < dim; ++k) acc |= pow[i * dim + k] & (row_major[k * dim + j] != 0);
        next[i * dim + j] = acc;
      }
    }
    pow.swap(next);
  }
  throw NotAperiodic("aperiodicity_index: no all-positive power within the Wielandt cap");
}

namespace {

double odd_phi(double a, const IntermittentParams& p) {
  return a * (1.0 + std::pow(std::abs(a), p.theta));
}

}  // namespace

HyperbolicModel HyperbolicModel::build(const ModelConfig& config) {
  HyperbolicModel m;
  m.cfg_ = config;
  if (config.cells < 3) throw ConfigError("build_model: need at least 3 cells (d >= 2)");
  if (!(config.lambda > 0.0 && config.lambda < 1.0)) {
    throw ConfigError("build_model: lambda must lie in (0,1)");
  }
  const int nc = config.cells;
  std::vector<int> transition = config.transition;
  if (transition.empty()) transition.assign(static_cast<std::size_t>(nc) * nc, 1);
  if (static_cast<int>(transition.size()) != nc * nc) {
    throw ConfigError("build_model: transition matrix size mismatch");
  }
  m.n0_ = aperiodicity_index(transition, nc);

  m.params_ = IntermittentParams::with_theta(config.theta);
  m.params_.a0 = config.a0;
  m.params_.a0_prime = config.a0_prime;
  m.params_.validate();

  // Cell geometry: W0 centered at the neutral fixed point, unit charts elsewhere.
  m.cells_.resize(nc);
  m.cells_[0] = Rect{config.a0_prime, config.a0, config.a0_prime, config.a0};
  for (int i = 1; i < nc; ++i) m.cells_[i] = Rect{0.0, 1.0, 0.0, 1.0};

  // Boundary tables.
  const std::size_t tab = std::min(config.seq_table_len, m.params_.max_seq_len);
  auto right = boundary_sequence(m.params_, BoundarySequence::Side::right, tab);
  auto left = boundary_sequence(m.params_, BoundarySequence::Side::left, tab);
  m.a_right_ = std::move(right.values);
  m.a_left_ = std::move(left.values);

  const double a1 = m.a_right_[1];
  const double a1p = m.a_left_[1];

  // Enumerate branches per source, left to right in the unstable coordinate.
  if (!transition[0]) {
    throw ConfigError("build_model: the neutral cell requires its self transition");
  }
  std::vector<int> exit_targets;
  for (int j = 1; j < nc; ++j) {
    if (transition[j]) exit_targets.push_back(j);
  }
  if (exit_targets.empty()) {
    throw ConfigError("build_model: the neutral cell needs at least one exit target");
  }

  auto add_affine_run = [&](int source, double lo, double hi, const std::vector<int>& targets) {
    const double w = (hi - lo) / static_cast<double>(targets.size());
    for (std::size_t k = 0; k < targets.size(); ++k) {
      Branch br;
      br.source = source;
      br.target = targets[k];
      br.u_lo = lo + w * static_cast<double>(k);
      br.u_hi = lo + w * static_cast<double>(k + 1);
      br.u_slope = m.cells_[br.target].u_len() / w;
      m.branches_.push_back(br);
    }
  };

  if (config.affine_w0) {
    // test fixture: the neutral cell becomes a plain affine cell with an
    // equal branch split over all its targets
    std::vector<int> all_targets{0};
    all_targets.insert(all_targets.end(), exit_targets.begin(), exit_targets.end());
    add_affine_run(0, config.a0_prime, config.a0, all_targets);
  } else {
    // left exit strip, intermittent stay branch, right exit strip
    add_affine_run(0, config.a0_prime, a1p, exit_targets);
    Branch stay;
    stay.source = 0;
    stay.target = 0;
    stay.intermittent = true;
    stay.u_lo = a1p;
    stay.u_hi = a1;
    m.branches_.push_back(stay);
    add_affine_run(0, a1, config.a0, exit_targets);
  }

  // Affine sources W1..Wd.
  for (int i = 1; i < nc; ++i) {
    std::vector<int> targets;
    for (int j = 0; j < nc; ++j) {
      if (transition[i * nc + j]) targets.push_back(j);
    }
    add_affine_run(i, m.cells_[i].u_lo, m.cells_[i].u_hi, targets);
  }

  // Stable slab allocation per target cell.  The intermittent branch has
  // the fixed image [phi^{-1}(s_lo), phi^{-1}(s_hi)]; other branches into
  // W0 pack the strip above it.  Unit cells pack the full stable extent.
  std::vector<std::vector<int>> entering(nc);
  for (std::size_t bi = 0; bi < m.branches_.size(); ++bi) {
    entering[m.branches_[bi].target].push_back(static_cast<int>(bi));
  }
  for (int j = 0; j < nc; ++j) {
    double strip_lo = m.cells_[j].s_lo;
    const double strip_hi = m.cells_[j].s_hi;
    std::vector<int> affine_in;
    for (int bi : entering[j]) {
      Branch& br = m.branches_[bi];
      if (br.intermittent) {
        br.s_img_lo = phi_inverse(m.cells_[0].s_lo, m.params_);
        br.s_img_hi = phi_inverse(m.cells_[0].s_hi, m.params_);
        strip_lo = br.s_img_hi;  // pack the others above the neutral image
      } else {
        affine_in.push_back(bi);
      }
    }
    if (affine_in.empty()) continue;
    const double h = (strip_hi - strip_lo) / static_cast<double>(affine_in.size());
    for (std::size_t k = 0; k < affine_in.size(); ++k) {
      Branch& br = m.branches_[affine_in[k]];
      br.s_img_lo = strip_lo + h * static_cast<double>(k);
      br.s_img_hi = strip_lo + h * static_cast<double>(k + 1);
      br.s_slope = h / m.cells_[br.source].s_len();
    }
  }

  // Uniform hyperbolicity outside W0.
  for (const Branch& br : m.branches_) {
    if (br.intermittent) continue;
    if (br.source != 0 && br.u_slope < 1.0 / config.lambda - 1e-9) {
      throw ConfigError("build_model: branch expansion below 1/lambda");
    }
    if (br.s_slope > config.lambda + 1e-9) {
      throw ConfigError("build_model: branch contraction above lambda");
    }
  }

  m.branches_by_source_.assign(nc, {});
  m.branches_by_target_.assign(nc, {});
  for (std::size_t bi = 0; bi < m.branches_.size(); ++bi) {
    m.branches_by_source_[m.branches_[bi].source].push_back(static_cast<int>(bi));
    m.branches_by_target_[m.branches_[bi].target].push_back(static_cast<int>(bi));
  }
  for (auto& v : m.branches_by_source_) {
    std::sort(v.begin(), v.end(),
              [&](int x, int y) { return m.branches_[x].u_lo < m.branches_[y].u_lo; });
  }
  for (auto& v : m.branches_by_target_) {
    std::sort(v.begin(), v.end(),
              [&](int x, int y) { return m.branches_[x].s_img_lo < m.branches_[y].s_img_lo; });
  }

  m.verify_markov_crossing();
  return m;
}

bool HyperbolicModel::contains(const Point2& p) const {
  if (p.cell < 0 || p.cell >= cell_count()) return false;
  const Rect& r = cells_[p.cell];
  return p.a >= r.u_lo - 1e-12 && p.a <= r.u_hi + 1e-12 && p.b >= r.s_lo - 1e-12 &&
         p.b <= r.s_hi + 1e-12;
}

void HyperbolicModel::require_valid(const Point2& p) const {
  if (!contains(p)) throw DomainError("point outside its cell rectangle");
}

int HyperbolicModel::branch_at(int cell, double u) const {
  const auto& idx = branches_by_source_[cell];
  // Ties on internal boundaries resolve to the lower branch, which is the
  // branch with the lower target index within each run; deterministic.
  int lo = 0;
  int hi = static_cast<int>(idx.size()) - 1;
  while (lo < hi) {
    const int mid = (lo + hi) / 2;
    if (u <= branches_[idx[mid]].u_hi) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return idx[lo];
}

bool HyperbolicModel::on_branch_boundary(int cell, double u) const {
  const auto& idx = branches_by_source_[cell];
  for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
    if (u == branches_[idx[k]].u_hi) return true;
  }
  return false;
}

Point2 HyperbolicModel::step(const Point2& p) const {
  require_valid(p);
  const Branch& br = branches_[branch_at(p.cell, p.a)];
  Point2 q;
  q.cell = br.target;
  if (br.intermittent) {
    q.a = odd_phi(p.a, params_);
    q.b = phi_inverse(p.b, params_);
  } else {
    q.a = cells_[br.target].u_lo + (p.a - br.u_lo) * br.u_slope;
    q.b = br.s_img_lo + (p.b - cells_[p.cell].s_lo) * br.s_slope;
  }
  return q;
}

Point2 HyperbolicModel::step_inverse(const Point2& p) const {
  require_valid(p);
  const auto& idx = branches_by_target_[p.cell];
  const Branch* found = nullptr;
  for (int bi : idx) {
    const Branch& br = branches_[bi];
    if (p.b > br.s_img_lo && p.b < br.s_img_hi) {
      found = &br;
      break;
    }
    if (p.b == br.s_img_lo || p.b == br.s_img_hi) {
      throw DomainError("step_inverse: point on a stable slab boundary");
    }
  }
  if (found == nullptr) {
    throw DomainError("step_inverse: stable coordinate outside every branch image");
  }
  Point2 q;
  q.cell = found->source;
  if (found->intermittent) {
    q.a = phi_inverse(p.a, params_);
    q.b = odd_phi(p.b, params_);
  } else {
    q.a = found->u_lo + (p.a - cells_[p.cell].u_lo) / found->u_slope;
    q.b = cells_[found->source].s_lo + (p.b - found->s_img_lo) / found->s_slope;
  }
  return q;
}

void HyperbolicModel::quotient_step(int cell, double u, int& cell_out, double& u_out) const {
  const Branch& br = branches_[branch_at(cell, u)];
  cell_out = br.target;
  if (br.intermittent) {
    u_out = odd_phi(u, params_);
  } else {
    u_out = cells_[br.target].u_lo + (u - br.u_lo) * br.u_slope;
  }
}

int HyperbolicModel::level_depth(double u) const {
  if (!has_neutral_cell()) return 0;
  const std::vector<double>& tab = u >= 0.0 ? a_right_ : a_left_;
  const double v = std::abs(u);
  // tab holds |a_0| > |a_1| > ... in absolute value on both sides.
  if (v > std::abs(tab[0]) * (1.0 + 1e-12)) {
    throw DomainError("level_depth: point outside the neutral fiber");
  }
  if (v >= std::abs(tab[1])) return 0;
  // binary search for n with |a_{n+1}| <= v < |a_n|
  std::size_t lo = 1, hi = tab.size() - 1;
  if (v < std::abs(tab[hi])) {
    throw SequenceExhausted("level_depth: deeper than the boundary table");
  }
  while (lo < hi) {
    const std::size_t mid = (lo + hi + 1) / 2;
    if (v < std::abs(tab[mid])) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return static_cast<int>(lo);
}

double HyperbolicModel::distance(const Point2& x, const Point2& y) const {
  if (x.cell != y.cell) return 1.0;
  return std::max(std::abs(x.a - y.a), std::abs(x.b - y.b));
}

void HyperbolicModel::verify_markov_crossing() const {
  for (const Branch& br : branches_) {
    const Rect& tgt = cells_[br.target];
    double img_lo, img_hi;
    if (br.intermittent) {
      img_lo = odd_phi(br.u_lo, params_);
      img_hi = odd_phi(br.u_hi, params_);
    } else {
      img_lo = tgt.u_lo;
      img_hi = tgt.u_lo + (br.u_hi - br.u_lo) * br.u_slope;
    }
    if (std::abs(img_lo - tgt.u_lo) > 1e-9 || std::abs(img_hi - tgt.u_hi) > 1e-9) {
      throw ConfigError("verify_markov_crossing: branch image does not cover its target fiber");
    }
  }
}

EnvelopeReport check_contraction_stable(const Point2& x, const Point2& y, std::size_t n,
                                        const HyperbolicModel& m) {
  if (x.cell != y.cell || x.a != y.a) {
    throw LeafMismatch("check_contraction_stable: points must share a stable leaf");
  }
  EnvelopeReport rep;
  const double d0 = m.distance(x, y);
  if (d0 == 0.0) {
    rep.degenerate = true;
    rep.ratios.assign(n, 0.0);
    return rep;
  }
  const double rate = m.intermittent().tau + 1.0;
  Point2 px = x, py = y;
  rep.ratios.reserve(n);
  for (std::size_t k = 1; k <= n; ++k) {
    px = m.step(px);
    py = m.step(py);
    const double r = m.distance(px, py) * std::pow(static_cast<double>(k), rate) / d0;
    rep.ratios.push_back(r);
    rep.running_sup = std::max(rep.running_sup, r);
  }
  return rep;
}

EnvelopeReport check_contraction_unstable(const Point2& start, double delta, int prep,
                                          std::size_t n, const HyperbolicModel& m,
                                          std::uint64_t dither_seed) {
  m.require_valid(start);
  if (n > static_cast<std::size_t>(prep)) {
    throw ConfigError("check_contraction_unstable: need n <= prep");
  }
  // forward run recording the branch history; extend until the orbit sits
  // in the reference cell, whose fibers carry the unstable leaves (pairs
  // formed mid-sojourn see only a partial block and stall backward).
  // A nonzero dither seed keeps the long prep orbit off the degenerate
  // dyadic boundary cycles.
  Rng rng(dither_seed, 400);
  std::vector<int> history;
  history.reserve(prep + 64);
  Point2 p = start;
  auto advance = [&]() {
    history.push_back(m.branch_at(p.cell, p.a));
    p = m.step(p);
    if (dither_seed != 0) {
      const Rect& r = m.cell(p.cell);
      p.a += (rng.uniform() - 0.5) * 0x1.0p-48 * r.u_len();
      p.a = std::min(std::max(p.a, r.u_lo), r.u_hi);
    }
  };
  for (int k = 0; k < prep; ++k) advance();
  for (int guard = 0; p.cell != 1 && guard < 1'000'000; ++guard) advance();
  if (p.cell != 1) throw CapExceeded("check_contraction_unstable: orbit never re-enters the base");
  const int prep_total = static_cast<int>(history.size());
  EnvelopeReport rep;
  double ax = p.a;
  double ay = std::min(m.cell(p.cell).u_hi, p.a + delta);
  const double d0 = std::abs(ay - ax);
  if (d0 == 0.0) {
    rep.degenerate = true;
    rep.ratios.assign(n, 0.0);
    return rep;
  }
  const double rate = m.intermittent().tau + 1.0;
  const IntermittentParams& ip = m.intermittent();
  rep.ratios.reserve(n);
  for (std::size_t k = 1; k <= n; ++k) {
    const Branch& br = m.branches()[history[prep_total - static_cast<int>(k)]];
    if (br.intermittent) {
      ax = phi_inverse(ax, ip);
      ay = phi_inverse(ay, ip);
    } else {
      ax = br.u_lo + (ax - m.cell(br.target).u_lo) / br.u_slope;
      ay = br.u_lo + (ay - m.cell(br.target).u_lo) / br.u_slope;
    }
    const double r = std::abs(ay - ax) * std::pow(static_cast<double>(k), rate) / d0;
    rep.ratios.push_back(r);
    rep.running_sup = std::max(rep.running_sup, r);
  }
  return rep;
}

}  // namespace towerlab

#include "towerlab/tower.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "towerlab/errors.hpp"
#include "towerlab/rng.hpp"

namespace towerlab {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t v) {
  h ^= v;
  return h * kFnvPrime;
}

// Hash of the branch itinerary over one return block of the base point.
std::uint64_t base_cylinder_hash(const HyperbolicModel& m, double u, int cap) {
  const int n0 = m.n0();
  const IntermittentParams& ip = m.intermittent();
  std::uint64_t h = kFnvOffset;
  int cell = 1;
  int t = 0;
  long long checkpoint = n0;
  while (true) {
    while (t < checkpoint) {
      if (t >= cap) return fnv_mix(h, 0xDEADull);
      const int bi = m.branch_at(cell, u);
      h = fnv_mix(h, static_cast<std::uint64_t>(bi));
      const Branch& br = m.branches()[bi];
      if (br.intermittent) {
        u = u * (1.0 + std::pow(std::abs(u), ip.theta));
      } else {
        u = m.cell(br.target).u_lo + (u - br.u_lo) * br.u_slope;
      }
      cell = br.target;
      ++t;
    }
    if (cell == 1) return fnv_mix(h, static_cast<std::uint64_t>(t));
    int extra = 0;
    if (cell == 0) {
      try {
        extra = m.level_depth(u);
      } catch (const SequenceExhausted&) {
        return fnv_mix(h, 0xBEEFull);
      }
    }
    checkpoint = static_cast<long long>(t) + extra + n0;
    if (checkpoint > cap) return fnv_mix(h, 0xDEADull);
  }
}

}  // namespace

TowerPoint make_tower_point(const HyperbolicModel& m, const Point2& base, int cap) {
  m.require_valid(base);
  if (base.cell != 1) throw DomainError("make_tower_point: base must lie in the reference cell");
  ReturnResult r = quotient_return(m, base.a, cap);
  if (r.capped) throw CapExceeded("make_tower_point: return time exceeds cap");
  return TowerPoint{base, 0, r.R};
}

TowerPoint tower_step(const TowerPoint& t, const HyperbolicModel& m, int cap) {
  if (t.level < 0 || t.level >= t.R) {
    throw InvalidLevel("tower_step: level outside [0, R)");
  }
  if (t.level + 1 < t.R) return TowerPoint{t.base, t.level + 1, t.R};
  Point2 p = t.base;
  for (int k = 0; k < t.R; ++k) p = m.step(p);
  return make_tower_point(m, p, cap);
}

Point2 project(const TowerPoint& t, const HyperbolicModel& m) {
  Point2 p = t.base;
  for (int k = 0; k < t.level; ++k) p = m.step(p);
  return p;
}

std::vector<std::uint64_t> partition_cylinder(const TowerPoint& t, int n,
                                              const HyperbolicModel& m, int cap) {
  std::vector<std::uint64_t> labels;
  labels.reserve(n + 1);
  TowerPoint cur = t;
  std::uint64_t base_hash = base_cylinder_hash(m, cur.base.a, cap);
  for (int k = 0; k <= n; ++k) {
    labels.push_back(fnv_mix(base_hash, static_cast<std::uint64_t>(cur.level)));
    if (k == n) break;
    const int old_level = cur.level;
    cur = tower_step(cur, m, cap);
    if (cur.level <= old_level) base_hash = base_cylinder_hash(m, cur.base.a, cap);
  }
  return labels;
}

DiameterEnvelope diameter_check(const HyperbolicModel& m, const std::vector<int>& k_values,
                                int n_pairs, std::uint64_t seed) {
  DiameterEnvelope env;
  env.k_values = k_values;
  env.sup_scaled.assign(k_values.size(), 0.0);
  if (k_values.empty()) return env;
  const double rate = m.intermittent().tau + 1.0;
  const Rect& base = m.cell(1);
  Rng rng(seed, 0);
  for (int trial = 0; trial < n_pairs; ++trial) {
    const double u = base.u_lo + base.u_len() * rng.uniform();
    const double b = base.s_lo + base.s_len() * rng.uniform();
    Point2 x{1, u, b};
    Point2 y = x;
    // Cylinder partners.  The labels of the partition only read the
    // unstable coordinate, so a stable-direction companion shares every
    // cylinder at every depth.  An unstable perturbation is admissible
    // when the two base points stay in a common return cylinder long
    // enough; the float lattice resolves that only at small depth, so
    // most trials use the stable companion.
    if (trial % 4 == 0) {
      double delta = 1e-6;
      bool found = false;
      for (int shrink = 0; shrink < 24 && !found; ++shrink, delta *= 0.5) {
        const double v = std::min(base.u_hi, u + delta);
        if (v == u) break;
        SeparationResult sep = quotient_separation(m, u, v, 64);
        if (sep.at_cap || sep.s >= 48) {
          y.a = v;
          found = true;
        }
      }
      if (!found) continue;
      y.b = std::min(base.s_hi, b + 1e-5);
    } else {
      y.b = b >= 0.5 * (base.s_lo + base.s_hi) ? base.s_lo + 0.2 * base.s_len()
                                               : base.s_hi - 0.2 * base.s_len();
    }
    ++env.pairs_used;
    Point2 px = x, py = y;
    int step = 0;
    for (std::size_t i = 0; i < k_values.size(); ++i) {
      while (step < k_values[i]) {
        px = m.step(px);
        py = m.step(py);
        ++step;
      }
      const double d = m.distance(px, py);
      env.sup_scaled[i] =
          std::max(env.sup_scaled[i], d * std::pow(static_cast<double>(k_values[i]), rate));
    }
  }
  return env;
}

WeightResult reference_measure_weight(const Point2& x, int n_factors, const HyperbolicModel& m,
                                      double reference_leaf_b) {
  m.require_valid(x);
  if (x.cell != 1) {
    throw DomainError("reference_measure_weight: point must lie in the reference cell");
  }
  WeightResult out;
  out.partial_logs.reserve(n_factors);
  Point2 p = x;
  Point2 ph{x.cell, x.a, reference_leaf_b};
  double acc = 0.0;
  const IntermittentParams& ip = m.intermittent();
  for (int n = 0; n < n_factors; ++n) {
    const Branch& bp = m.branches()[m.branch_at(p.cell, p.a)];
    const Branch& bh = m.branches()[m.branch_at(ph.cell, ph.a)];
    const double dp = bp.intermittent ? phi_prime(p.a, ip) : bp.u_slope;
    const double dh = bh.intermittent ? phi_prime(ph.a, ip) : bh.u_slope;
    acc += std::log(dp) - std::log(dh);
    out.partial_logs.push_back(acc);
    p = m.step(p);
    ph = m.step(ph);
  }
  out.log_weight = acc;
  return out;
}

WeightResult reference_measure_weight_custom(
    int n_factors, const std::function<double(int)>& log_ratio_term) {
  WeightResult out;
  double acc = 0.0;
  out.partial_logs.reserve(n_factors);
  for (int n = 0; n < n_factors; ++n) {
    acc += log_ratio_term(n);
    out.partial_logs.push_back(acc);
  }
  out.log_weight = acc;
  return out;
}

// -------- TransferMatrix ---------------------------------------------------

TransferMatrix TransferMatrix::build(const HyperbolicModel& m, const TowerOptions& opts) {
  TransferMatrix tm;
  tm.model_ = &m;
  tm.opts_ = opts;
  tm.chain_ = QuotientUlam::build(m, opts.quotient);
  const QuotientUlam& q = tm.chain_;
  const std::vector<int>& fine_bins = q.base_bins();
  const int fine = static_cast<int>(fine_bins.size());
  if (opts.base_bins < 2 || fine % opts.base_bins != 0) {
    throw ConfigError("TransferMatrix: base_bins must divide the chain's cell-1 bin count");
  }
  if (opts.r_detail < 4 || opts.max_level <= opts.r_detail) {
    throw ConfigError("TransferMatrix: need r_detail >= 4 and max_level > r_detail");
  }
  const int per = fine / opts.base_bins;
  const int S = q.state_count();

  // map chain state -> tower base bin (or -1)
  std::vector<int> chain_to_base(S, -1);
  for (int i = 0; i < fine; ++i) chain_to_base[fine_bins[i]] = i / per;

  std::vector<double> deep_seed(S, 0.0);
  std::vector<double> x(S), y(S), hit(S);
  std::vector<double> hb(opts.base_bins);
  std::vector<std::vector<double>> alloc_mass(opts.base_bins);
  for (auto& v : alloc_mass) v.assign(opts.r_detail + 1, 0.0);  // [r]=mass, [r_detail+? ] deep handled apart
  tm.base_deep_frac_.assign(opts.base_bins, 0.0);

  for (int b = 0; b < opts.base_bins; ++b) {
    std::fill(x.begin(), x.end(), 0.0);
    for (int j = 0; j < per; ++j) x[fine_bins[b * per + j]] = 1.0 / per;
    for (int r = 1; r <= opts.r_detail; ++r) {
      std::fill(hit.begin(), hit.end(), 0.0);
      q.apply_taboo(x, y, hit);
      std::fill(hb.begin(), hb.end(), 0.0);
      double mass = 0.0;
      for (int s : fine_bins) {
        if (hit[s] != 0.0) {
          hb[chain_to_base[s]] += hit[s];
          mass += hit[s];
        }
      }
      if (mass > 0.0) {
        Group g;
        g.base_bin = b;
        g.r = r;
        g.mass = mass / opts.base_bins;  // fraction of the whole fiber
        tm.groups_.push_back(g);
        std::vector<std::pair<int, double>> row;
        for (int tb = 0; tb < opts.base_bins; ++tb) {
          if (hb[tb] > 0.0) row.emplace_back(tb, hb[tb] / mass);
        }
        tm.roof_rows_.push_back(std::move(row));
        alloc_mass[b][r] = mass;  // per-b normalized
      }
      x.swap(y);
    }
    double leftover = 0.0;
    for (int s = 0; s < S; ++s) {
      leftover += x[s];
      deep_seed[s] += x[s] / opts.base_bins;
    }
    tm.base_deep_frac_[b] = leftover;
  }

  // deep aggregate chain
  x = deep_seed;
  double s_cur = 0.0;
  for (double v : x) s_cur += v;
  tm.deep_total_ = s_cur;
  tm.deep_levels_ = opts.max_level;
  tm.deep_level_mass_.assign(opts.max_level, 0.0);
  for (int l = 0; l < std::min(opts.r_detail, opts.max_level); ++l) {
    tm.deep_level_mass_[l] = tm.deep_total_;
  }
  const int deep_dyn = opts.max_level - opts.r_detail;  // levels with exits
  tm.deep_climb_.assign(deep_dyn, 1.0);
  tm.deep_exit_rows_.resize(deep_dyn);
  for (int l = opts.r_detail; l < opts.max_level && s_cur > 0.0; ++l) {
    tm.deep_level_mass_[l] = s_cur;
    std::fill(hit.begin(), hit.end(), 0.0);
    q.apply_taboo(x, y, hit);
    std::fill(hb.begin(), hb.end(), 0.0);
    double exit_mass = 0.0;
    for (int s : fine_bins) {
      if (hit[s] != 0.0) {
        hb[chain_to_base[s]] += hit[s];
        exit_mass += hit[s];
      }
    }
    double s_next = 0.0;
    for (int s = 0; s < S; ++s) s_next += y[s];
    tm.deep_climb_[l - opts.r_detail] = s_cur > 0.0 ? s_next / s_cur : 1.0;
    if (exit_mass > 0.0) {
      auto& row = tm.deep_exit_rows_[l - opts.r_detail];
      for (int tb = 0; tb < opts.base_bins; ++tb) {
        if (hb[tb] > 0.0) row.emplace_back(tb, hb[tb] / exit_mass);
      }
    }
    x.swap(y);
    s_cur = s_next;
  }

  // censor: extended taboo sweep past max_level; the self-loop weight makes
  // the expected holding time match the residual sojourn above max_level
  const double surv_at_cap = s_cur;
  std::vector<double> censor_exits(opts.base_bins, 0.0);
  double censor_leb = 0.0;
  double s_last = s_cur;
  for (int l = opts.max_level; l < opts.tail_extension && s_cur > 1e-300; ++l) {
    censor_leb += s_cur;
    std::fill(hit.begin(), hit.end(), 0.0);
    q.apply_taboo(x, y, hit);
    for (int s : fine_bins) {
      if (hit[s] != 0.0) censor_exits[chain_to_base[s]] += hit[s];
    }
    s_last = s_cur;
    s_cur = 0.0;
    for (int s = 0; s < S; ++s) s_cur += y[s];
    x.swap(y);
  }
  if (s_cur > 0.0 && s_cur < s_last) {
    const double rho_loc = s_cur / s_last;
    censor_leb += s_cur / (1.0 - rho_loc);  // geometric tail extrapolation
  }
  tm.censored_leb_ = censor_leb;
  tm.censor_self_ = censor_leb > 0.0 && surv_at_cap > 0.0 ? 1.0 - surv_at_cap / censor_leb : 0.0;
  tm.censor_self_ = std::min(std::max(tm.censor_self_, 0.0), 1.0 - 1e-12);
  double ce_sum = 0.0;
  for (double v : censor_exits) ce_sum += v;
  if (ce_sum > 0.0) {
    for (int tb = 0; tb < opts.base_bins; ++tb) {
      if (censor_exits[tb] > 0.0) tm.censor_exit_row_.emplace_back(tb, censor_exits[tb] / ce_sum);
    }
  } else {
    // nothing observed leaving: recycle uniformly
    for (int tb = 0; tb < opts.base_bins; ++tb) {
      tm.censor_exit_row_.emplace_back(tb, 1.0 / opts.base_bins);
    }
  }

  // state layout
  int next = 0;
  for (Group& g : tm.groups_) {
    g.first_state = next;
    next += g.r;
  }
  tm.deep_first_state_ = next;
  next += tm.deep_levels_;
  tm.censor_state_ = next;
  tm.n_states_ = next + 1;

  // inflow allocation per base bin
  tm.base_alloc_.resize(opts.base_bins);
  for (std::size_t gi = 0; gi < tm.groups_.size(); ++gi) {
    const Group& g = tm.groups_[gi];
    tm.base_alloc_[g.base_bin].emplace_back(g.first_state, alloc_mass[g.base_bin][g.r]);
  }
  for (int b = 0; b < opts.base_bins; ++b) {
    if (tm.base_deep_frac_[b] > 0.0) {
      tm.base_alloc_[b].emplace_back(tm.deep_first_state_, tm.base_deep_frac_[b]);
    }
    double sum = 0.0;
    for (auto& [st, f] : tm.base_alloc_[b]) sum += f;
    if (std::abs(sum - 1.0) > 1e-8) {
      throw MassLeak("TransferMatrix: base allocation for bin " + std::to_string(b) +
                     " sums to " + std::to_string(sum));
    }
    for (auto& [st, f] : tm.base_alloc_[b]) f /= sum;
  }

  // roof jacobian metadata by rejection sampling within each group
  tm.roof_jac_.assign(tm.groups_.size(), JacStats{});
  const Rect& base = m.cell(1);
  const double bw = base.u_len() / opts.base_bins;
  Rng rng(20240901ULL, 1);
  for (std::size_t gi = 0; gi < tm.groups_.size(); ++gi) {
    const Group& g = tm.groups_[gi];
    JacStats& js = tm.roof_jac_[gi];
    js.log_min = 1e300;
    js.log_max = -1e300;
    double acc = 0.0;
    const double lo = base.u_lo + g.base_bin * bw;
    for (int trial = 0; trial < 64 * opts.jacobian_samples && js.count < opts.jacobian_samples;
         ++trial) {
      const double u = lo + bw * rng.uniform();
      ReturnResult r = quotient_return(m, u, opts.max_level);
      if (r.capped || r.R != g.r) continue;
      acc += r.log_deriv;
      js.log_min = std::min(js.log_min, r.log_deriv);
      js.log_max = std::max(js.log_max, r.log_deriv);
      ++js.count;
    }
    if (js.count > 0) {
      js.log_mean = acc / js.count;
    } else {
      js.log_min = js.log_max = 0.0;
    }
  }
  return tm;
}

TransferMatrix::StateInfo TransferMatrix::describe(int state) const {
  StateInfo info;
  if (state == censor_state_) {
    info.censor = true;
    return info;
  }
  if (state >= deep_first_state_) {
    info.deep = true;
    info.level = state - deep_first_state_;
    return info;
  }
  // binary search over groups by first_state
  int lo = 0, hi = static_cast<int>(groups_.size()) - 1;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (groups_[mid].first_state <= state) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  info.group = lo;
  info.level = state - groups_[lo].first_state;
  return info;
}

void TransferMatrix::distribute_to_base(double inflow, int base_bin,
                                        std::vector<double>& y) const {
  for (const auto& [st, f] : base_alloc_[base_bin]) y[st] += inflow * f;
}

void TransferMatrix::apply(const std::vector<double>& x, std::vector<double>& y) const {
  if (static_cast<int>(x.size()) != n_states_) throw ShapeMismatch("TransferMatrix::apply");
  y.assign(n_states_, 0.0);
  std::vector<double> base_inflow(opts_.base_bins, 0.0);
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const Group& g = groups_[gi];
    const int fs = g.first_state;
    for (int l = 0; l + 1 < g.r; ++l) y[fs + l + 1] += x[fs + l];
    const double roof = x[fs + g.r - 1];
    if (roof != 0.0) {
      for (const auto& [tb, w] : roof_rows_[gi]) base_inflow[tb] += roof * w;
    }
  }
  for (int l = 0; l < deep_levels_; ++l) {
    const double mass = x[deep_first_state_ + l];
    if (mass == 0.0) continue;
    if (l < opts_.r_detail) {
      y[deep_first_state_ + l + 1] += mass;
      continue;
    }
    const double climb = deep_climb_[l - opts_.r_detail];
    const double up = mass * climb;
    if (l + 1 < deep_levels_) {
      y[deep_first_state_ + l + 1] += up;
    } else {
      y[censor_state_] += up;
    }
    const double exits = mass - up;
    if (exits != 0.0) {
      for (const auto& [tb, w] : deep_exit_rows_[l - opts_.r_detail]) {
        base_inflow[tb] += exits * w;
      }
    }
  }
  const double cm = x[censor_state_];
  if (cm != 0.0) {
    y[censor_state_] += cm * censor_self_;
    const double exits = cm * (1.0 - censor_self_);
    for (const auto& [tb, w] : censor_exit_row_) base_inflow[tb] += exits * w;
  }
  for (int tb = 0; tb < opts_.base_bins; ++tb) {
    if (base_inflow[tb] != 0.0) distribute_to_base(base_inflow[tb], tb, y);
  }
}

double TransferMatrix::max_row_sum_error() const {
  // push the uniform mass through and compare totals, then check each row
  // family analytically
  double worst = 0.0;
  for (const auto& row : roof_rows_) {
    double s = 0.0;
    for (auto& [t, w] : row) s += w;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  for (const auto& row : deep_exit_rows_) {
    if (row.empty()) continue;
    double s = 0.0;
    for (auto& [t, w] : row) s += w;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  for (int tb = 0; tb < opts_.base_bins; ++tb) {
    double s = 0.0;
    for (auto& [st, f] : base_alloc_[tb]) s += f;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  double s = 0.0;
  for (auto& [tb, w] : censor_exit_row_) s += w;
  worst = std::max(worst, std::abs(s - 1.0));
  return worst;
}

std::vector<double> TransferMatrix::lebesgue_mass() const {
  std::vector<double> leb(n_states_, 0.0);
  double total = 0.0;
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const Group& g = groups_[gi];
    for (int l = 0; l < g.r; ++l) {
      leb[g.first_state + l] = g.mass;
      total += g.mass;
    }
  }
  for (int l = 0; l < deep_levels_; ++l) {
    leb[deep_first_state_ + l] = deep_level_mass_[l];
    total += deep_level_mass_[l];
  }
  leb[censor_state_] = censored_leb_;
  total += censored_leb_;
  for (double& v : leb) v /= total;
  return leb;
}

double TransferMatrix::censored_mass_fraction() const {
  double total = censored_leb_;
  for (const Group& g : groups_) total += g.mass * g.r;
  for (int l = 0; l < deep_levels_; ++l) total += deep_level_mass_[l];
  return total > 0.0 ? censored_leb_ / total : 0.0;
}

InvariantDensity TransferMatrix::invariant_density(double tol, int max_iter) const {
  InvariantDensity out;
  std::vector<double> x(n_states_, 1.0 / n_states_);
  std::vector<double> y;
  double res = 1.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    apply(x, y);
    res = 0.0;
    for (int s = 0; s < n_states_; ++s) res += std::abs(y[s] - x[s]);
    x.swap(y);
    if (res <= tol) break;
  }
  if (res > tol) {
    throw NoConvergence("invariant_density: residual " + std::to_string(res) + " after " +
                        std::to_string(max_iter) + " iterations");
  }
  out.rho = x;
  out.residual = res;
  out.iterations = it + 1;

  const std::vector<double> leb = lebesgue_mass();
  double floor = 1e300;
  for (int s = 0; s < n_states_; ++s) {
    if (s == censor_state_ || leb[s] <= 0.0) continue;
    floor = std::min(floor, out.rho[s] / leb[s]);
  }
  out.floor_non_censored = floor == 1e300 ? 0.0 : floor;

  // second-eigenvalue proxy by deflated power iteration
  std::vector<double> v(n_states_, 0.0), w;
  for (int s = 0; s < n_states_; ++s) v[s] = leb[s] - out.rho[s];
  double prev_norm = 0.0;
  for (double z : v) prev_norm += std::abs(z);
  if (prev_norm > 0.0) {
    double ratio = 0.0;
    double last_ratio = -1.0;
    for (int k = 0; k < 4000; ++k) {
      apply(v, w);
      double total = 0.0;
      for (double z : w) total += z;
      double norm = 0.0;
      for (int s = 0; s < n_states_; ++s) {
        w[s] -= total * out.rho[s];
        norm += std::abs(w[s]);
      }
      if (norm == 0.0 || prev_norm == 0.0) break;
      ratio = norm / prev_norm;
      // rescale to avoid underflow
      for (double& z : w) z /= norm;
      prev_norm = 1.0;
      v.swap(w);
      if (k > 32 && std::abs(ratio - last_ratio) < 1e-6) break;
      last_ratio = ratio;
    }
    out.lambda2_estimate = ratio;
  }
  return out;
}

void TransferMatrix::export_csv(std::ostream& os) const {
  os.precision(17);
  os << "row,col,prob\n";
  auto emit_base = [&](int row, int tb, double w) {
    for (const auto& [st, f] : base_alloc_[tb]) {
      os << row << ',' << st << ',' << w * f << '\n';
    }
  };
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const Group& g = groups_[gi];
    for (int l = 0; l + 1 < g.r; ++l) {
      os << g.first_state + l << ',' << g.first_state + l + 1 << ",1\n";
    }
    for (const auto& [tb, w] : roof_rows_[gi]) emit_base(g.first_state + g.r - 1, tb, w);
  }
  for (int l = 0; l < deep_levels_; ++l) {
    const int st = deep_first_state_ + l;
    if (l < opts_.r_detail) {
      os << st << ',' << st + 1 << ",1\n";
      continue;
    }
    const double climb = deep_climb_[l - opts_.r_detail];
    if (l + 1 < deep_levels_) {
      os << st << ',' << st + 1 << ',' << climb << '\n';
    } else {
      os << st << ',' << censor_state_ << ',' << climb << '\n';
    }
    for (const auto& [tb, w] : deep_exit_rows_[l - opts_.r_detail]) {
      emit_base(st, tb, (1.0 - climb) * w);
    }
  }
  os << censor_state_ << ',' << censor_state_ << ',' << censor_self_ << '\n';
  for (const auto& [tb, w] : censor_exit_row_) {
    emit_base(censor_state_, tb, (1.0 - censor_self_) * w);
  }
}

// -------- regularity fits --------------------------------------------------

JacobianRegularity jacobian_regularity_fit(const HyperbolicModel& m, int n_pairs,
                                           std::uint64_t seed) {
  const Rect& base = m.cell(1);
  Rng rng(seed, 2);
  std::vector<double> vals;
  std::vector<int> seps;
  for (int trial = 0; trial < n_pairs; ++trial) {
    const double u = base.u_lo + base.u_len() * rng.uniform();
    const double mag = std::pow(10.0, -(3.0 + 9.0 * rng.uniform()));
    const double v = std::min(base.u_hi, u + mag);
    if (v == u) continue;
    double xu = u, xv = v;
    double lx = 0.0, ly = 0.0;
    for (int k = 0; k < 40; ++k) {
      if (quotient_separation(m, xu, xv, 1).s < 1) break;  // cylinders differ now
      ReturnResult ru = quotient_return(m, xu, 100000);
      ReturnResult rv = quotient_return(m, xv, 100000);
      if (ru.capped || rv.capped || ru.R != rv.R) break;
      lx += ru.log_deriv;
      ly += rv.log_deriv;
      xu = ru.u_image;
      xv = rv.u_image;
      const double val = std::abs(std::exp(lx - ly) - 1.0);
      SeparationResult sep = quotient_separation(m, xu, xv, 400);
      const int s = sep.at_cap ? 400 : sep.s;
      if (val > 0.0) {
        vals.push_back(val);
        seps.push_back(s);
      }
    }
  }
  JacobianRegularity out;
  out.pairs_used = static_cast<int>(vals.size());
  if (vals.size() < 16) {
    out.c_f = 1.0;
    out.beta = 0.5;
    return out;
  }
  // log-linear regression log(val) = log(C) + s log(beta)
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double X = seps[i];
    const double Y = std::log(vals[i]);
    sx += X;
    sy += Y;
    sxx += X * X;
    sxy += X * Y;
  }
  const double n = static_cast<double>(vals.size());
  const double denom = n * sxx - sx * sx;
  double slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : std::log(0.5);
  double beta = std::exp(slope);
  beta = std::min(std::max(beta, 0.05), 0.95);
  double cf = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    cf = std::max(cf, vals[i] / std::pow(beta, seps[i]));
  }
  out.beta = beta;
  out.c_f = cf;
  return out;
}

double modulus_estimate(const HyperbolicModel& m,
                        const std::function<double(const TowerPoint&)>& f, ModulusFamily family,
                        double exponent, int n_pairs, std::uint64_t seed) {
  const Rect& base = m.cell(1);
  const double b_ref = base.s_lo + 0.5 * base.s_len();
  Rng rng(seed, 3);
  double sup = 0.0;
  for (int trial = 0; trial < n_pairs; ++trial) {
    const double u = base.u_lo + base.u_len() * rng.uniform();
    double v;
    if (trial % 3 == 0) {
      v = base.u_lo + base.u_len() * rng.uniform();  // unconstrained pair, usually s = 0
    } else {
      const double mag = std::pow(10.0, -(2.0 + 10.0 * rng.uniform()));
      v = std::min(base.u_hi, u + mag);
    }
    if (v == u) continue;
    ReturnResult ru = quotient_return(m, u, 100000);
    ReturnResult rv = quotient_return(m, v, 100000);
    if (ru.capped || rv.capped) continue;
    SeparationResult sep = quotient_separation(m, u, v, 400);
    const int s = sep.at_cap ? 400 : sep.s;
    int level = 0;
    if (s >= 1 && ru.R == rv.R && ru.R > 1) {
      level = static_cast<int>(rng.uniform_index(ru.R));
    }
    TowerPoint tx{Point2{1, u, b_ref}, level, ru.R};
    TowerPoint ty{Point2{1, v, b_ref}, s >= 1 ? level : 0, rv.R};
    const double df = std::abs(f(tx) - f(ty));
    if (df == 0.0) continue;
    double val;
    if (family == ModulusFamily::geometric) {
      val = df / std::pow(exponent, s);
    } else {
      val = df * std::pow(std::max(s, 1), exponent);
    }
    sup = std::max(sup, val);
  }
  return sup;
}

}  // namespace towerlab

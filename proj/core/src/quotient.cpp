#include "towerlab/quotient.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "towerlab/errors.hpp"

namespace towerlab {

namespace {

// Depth of the level set containing u, deep points reported as marker.
int safe_depth(const HyperbolicModel& m, double u, int deep_marker) {
  try {
    return m.level_depth(u);
  } catch (const SequenceExhausted&) {
    return deep_marker;
  }
}

}  // namespace

CheckpointWalk run_checkpoints(const HyperbolicModel& m, double u, int cap) {
  CheckpointWalk w;
  const int n0 = m.n0();
  int cell = 1;
  int t = 0;
  long long checkpoint = n0;
  while (true) {
    while (t < checkpoint) {
      if (t >= cap) {
        w.capped = true;
        return w;
      }
      int nc;
      double nu;
      m.quotient_step(cell, u, nc, nu);
      cell = nc;
      u = nu;
      ++t;
    }
    w.checkpoint_times.push_back(t);
    w.visited_cells.push_back(cell);
    if (cell == 1) {
      w.R = t;
      return w;
    }
    int extra = 0;
    if (cell == 0) {
      const int depth = safe_depth(m, u, -1);
      if (depth < 0) {
        // deeper than the boundary table: the sojourn alone exceeds any
        // practical cap
        w.capped = true;
        return w;
      }
      extra = depth;
    }
    checkpoint = static_cast<long long>(t) + extra + n0;
    if (checkpoint > cap) {
      w.capped = true;
      return w;
    }
  }
}

ReturnResult quotient_return(const HyperbolicModel& m, double u, int cap) {
  ReturnResult res;
  const int n0 = m.n0();
  const IntermittentParams& ip = m.intermittent();
  int cell = 1;
  int t = 0;
  long long checkpoint = n0;
  double logd = 0.0;
  while (true) {
    while (t < checkpoint) {
      if (cap > 0 && t >= cap) {
        res.capped = true;
        res.R = t;
        return res;
      }
      const Branch& br = m.branches()[m.branch_at(cell, u)];
      if (br.intermittent) {
        logd += std::log(phi_prime(u, ip));
        u = u * (1.0 + std::pow(std::abs(u), ip.theta));
      } else {
        logd += std::log(br.u_slope);
        u = m.cell(br.target).u_lo + (u - br.u_lo) * br.u_slope;
      }
      cell = br.target;
      ++t;
    }
    if (cell == 1) {
      res.R = t;
      res.u_image = u;
      res.log_deriv = logd;
      return res;
    }
    int extra = 0;
    if (cell == 0) {
      const int depth = safe_depth(m, u, -1);
      if (depth < 0) {
        res.capped = true;
        res.R = t;
        return res;
      }
      extra = depth;
    }
    checkpoint = static_cast<long long>(t) + extra + n0;
    if (cap > 0 && checkpoint > cap) {
      res.capped = true;
      res.R = t;
      return res;
    }
  }
}

SeparationResult quotient_separation(const HyperbolicModel& m, double u, double v, int cap) {
  SeparationResult out;
  const int n0 = m.n0();
  const IntermittentParams& ip = m.intermittent();
  double x = u, y = v;
  for (int n = 0; n < cap; ++n) {
    int cx = 1;
    int t = 0;
    long long checkpoint = n0;
    bool same = true;
    long long guard = 0;
    while (true) {
      while (t < checkpoint) {
        const int bx = m.branch_at(cx, x);
        const int by = m.branch_at(cx, y);
        if (bx != by) {
          same = false;
          break;
        }
        const Branch& br = m.branches()[bx];
        if (br.intermittent) {
          x = x * (1.0 + std::pow(std::abs(x), ip.theta));
          y = y * (1.0 + std::pow(std::abs(y), ip.theta));
        } else {
          x = m.cell(br.target).u_lo + (x - br.u_lo) * br.u_slope;
          y = m.cell(br.target).u_lo + (y - br.u_lo) * br.u_slope;
        }
        cx = br.target;
        ++t;
      }
      if (!same) break;
      if (cx == 1) break;  // block complete, itineraries agreed
      int extra = 0;
      if (cx == 0) {
        const int dx = safe_depth(m, x, -1);
        const int dy = safe_depth(m, y, -1);
        if (dx != dy) {
          same = false;
          break;
        }
        if (dx < 0) {
          out.s = n;
          out.at_cap = true;  // both vanish into the deep tail together
          return out;
        }
        extra = dx;
      }
      checkpoint = static_cast<long long>(t) + extra + n0;
      if (++guard > 1'000'000) {
        out.s = n;
        out.at_cap = true;
        return out;
      }
    }
    if (!same) {
      out.s = n;
      return out;
    }
  }
  out.s = cap;
  out.at_cap = true;
  return out;
}

// -------- one-step Ulam chain -------------------------------------------

QuotientUlam QuotientUlam::build(const HyperbolicModel& m, const QuotientUlamOptions& opts) {
  QuotientUlam q;
  q.model_ = &m;
  q.opts_ = opts;
  if (opts.bins_per_cell < 8) throw ConfigError("QuotientUlam: need at least 8 bins per cell");
  const auto& ar = m.boundary_table_right();
  const auto& al = m.boundary_table_left();
  const int jmax = std::min<int>(opts.j_max, static_cast<int>(ar.size()) - 2);
  if (jmax < 4) throw ConfigError("QuotientUlam: boundary table too short");

  q.cell_first_bin_.assign(m.cell_count() + 1, 0);

  auto push_bin = [&](int cell, double lo, double hi, int depth) {
    if (hi <= lo) return;
    q.bins_.push_back(Bin{cell, lo, hi, depth});
  };

  // exit-strip subdivision at branch boundaries keeps those rows Markov
  auto push_exit_bins = [&](double lo, double hi) {
    std::vector<double> cuts;
    for (const Branch& br : m.branches()) {
      if (br.source != 0) continue;
      if (br.u_lo > lo + 1e-15 && br.u_lo < hi - 1e-15) cuts.push_back(br.u_lo);
    }
    std::sort(cuts.begin(), cuts.end());
    double prev = lo;
    for (double c : cuts) {
      push_bin(0, prev, c, 0);
      prev = c;
    }
    push_bin(0, prev, hi, 0);
  };

  // Neutral cell in fiber order: J'_0 exit strip, J'_n levels, pooled deep
  // on both sides of 0, J_n levels, J_0 exit strip.  Without a neutral
  // cell the fiber is binned uniformly like any other cell.
  q.cell_first_bin_[0] = 0;
  if (m.has_neutral_cell()) {
    push_exit_bins(al[0], al[1]);
    for (int n = 1; n <= jmax; ++n) push_bin(0, al[n], al[n + 1], n);
    push_bin(0, al[jmax + 1], 0.0, -2);
    push_bin(0, 0.0, ar[jmax + 1], -2);
    for (int n = jmax; n >= 1; --n) push_bin(0, ar[n + 1], ar[n], n);
    push_exit_bins(ar[1], ar[0]);
    std::sort(q.bins_.begin(), q.bins_.end(),
              [](const Bin& a, const Bin& b) { return a.lo < b.lo; });
  } else {
    const Rect& r0 = m.cell(0);
    const double w0 = r0.u_len() / opts.bins_per_cell;
    for (int k = 0; k < opts.bins_per_cell; ++k) {
      push_bin(0, r0.u_lo + k * w0, k + 1 == opts.bins_per_cell ? r0.u_hi : r0.u_lo + (k + 1) * w0,
               -1);
    }
  }

  for (int c = 1; c < m.cell_count(); ++c) {
    q.cell_first_bin_[c] = static_cast<int>(q.bins_.size());
    const Rect& r = m.cell(c);
    const double w = r.u_len() / opts.bins_per_cell;
    for (int k = 0; k < opts.bins_per_cell; ++k) {
      push_bin(c, r.u_lo + k * w,
               k + 1 == opts.bins_per_cell ? r.u_hi : r.u_lo + (k + 1) * w, -1);
    }
  }
  q.cell_first_bin_[m.cell_count()] = static_cast<int>(q.bins_.size());

  for (int s = 0; s < q.state_count(); ++s) {
    if (q.bins_[s].cell == 1) q.base_bins_.push_back(s);
  }

  const IntermittentParams& ip = m.intermittent();
  q.rows_.resize(q.state_count());
  for (int s = 0; s < q.state_count(); ++s) {
    const Bin& bin = q.bins_[s];
    const double len = bin.hi - bin.lo;
    auto& row = q.rows_[s];
    for (const Branch& br : m.branches()) {
      if (br.source != bin.cell) continue;
      const double x0 = std::max(bin.lo, br.u_lo);
      const double x1 = std::min(bin.hi, br.u_hi);
      if (x1 <= x0) continue;
      double y0, y1;
      if (br.intermittent) {
        y0 = x0 * (1.0 + std::pow(std::abs(x0), ip.theta));
        y1 = x1 * (1.0 + std::pow(std::abs(x1), ip.theta));
      } else {
        y0 = m.cell(br.target).u_lo + (x0 - br.u_lo) * br.u_slope;
        y1 = m.cell(br.target).u_lo + (x1 - br.u_lo) * br.u_slope;
      }
      const double inset = 1e-15 * (y1 - y0);
      const int t0 = q.bin_at(br.target, y0 + inset);
      const int t1 = q.bin_at(br.target, y1 - inset);
      for (int t = t0; t <= t1; ++t) {
        const Bin& tb = q.bins_[t];
        const double z0 = std::max(y0, tb.lo);
        const double z1 = std::min(y1, tb.hi);
        if (z1 <= z0) continue;
        double p0, p1;  // preimage of [z0, z1] inside [x0, x1]
        if (br.intermittent) {
          p0 = z0 == y0 ? x0 : phi_inverse(z0, ip);
          p1 = z1 == y1 ? x1 : phi_inverse(z1, ip);
        } else {
          p0 = z0 == y0 ? x0 : br.u_lo + (z0 - m.cell(br.target).u_lo) / br.u_slope;
          p1 = z1 == y1 ? x1 : br.u_lo + (z1 - m.cell(br.target).u_lo) / br.u_slope;
        }
        const double w = (p1 - p0) / len;
        if (w > 0.0) row.emplace_back(static_cast<std::int32_t>(t), w);
      }
    }
    double sum = 0.0;
    for (auto& [t, w] : row) sum += w;
    if (std::abs(sum - 1.0) > 1e-8) {
      throw MassLeak("QuotientUlam: row " + std::to_string(s) + " sums to " +
                     std::to_string(sum));
    }
    for (auto& [t, w] : row) w /= sum;
  }
  return q;
}

int QuotientUlam::bin_at(int cell, double u) const {
  const int first = cell_first_bin_[cell];
  const Rect& r = model_->cell(cell);
  u = std::min(std::max(u, r.u_lo), r.u_hi);
  if (cell != 0 || !model_->has_neutral_cell()) {
    const double w = r.u_len() / opts_.bins_per_cell;
    int k = static_cast<int>((u - r.u_lo) / w);
    k = std::min(std::max(k, 0), opts_.bins_per_cell - 1);
    return first + k;
  }
  int lo = first;
  int hi = cell_first_bin_[1] - 1;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (bins_[mid].lo <= u) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

void QuotientUlam::apply(const std::vector<double>& x, std::vector<double>& y) const {
  y.assign(state_count(), 0.0);
  for (int s = 0; s < state_count(); ++s) {
    const double mass = x[s];
    if (mass == 0.0) continue;
    for (const auto& [t, w] : rows_[s]) y[t] += mass * w;
  }
}

void QuotientUlam::apply_taboo(const std::vector<double>& x, std::vector<double>& y,
                               std::vector<double>& hit) const {
  y.assign(state_count(), 0.0);
  for (int s = 0; s < state_count(); ++s) {
    const double mass = x[s];
    if (mass == 0.0) continue;
    for (const auto& [t, w] : rows_[s]) {
      if (bins_[t].cell == 1) {
        hit[t] += mass * w;
      } else {
        y[t] += mass * w;
      }
    }
  }
}

double QuotientUlam::max_row_sum_error() const {
  double worst = 0.0;
  for (const auto& row : rows_) {
    double sum = 0.0;
    for (const auto& [t, w] : row) sum += w;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

std::vector<double> QuotientUlam::lebesgue_mass() const {
  std::vector<double> m(state_count());
  double total = 0.0;
  for (int s = 0; s < state_count(); ++s) {
    m[s] = bins_[s].hi - bins_[s].lo;
    total += m[s];
  }
  for (double& v : m) v /= total;
  return m;
}

std::vector<double> QuotientUlam::stationary(double tol, int max_iter,
                                             double* residual_out) const {
  std::vector<double> x(state_count(), 1.0 / state_count());
  std::vector<double> y;
  double res = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    apply(x, y);
    res = 0.0;
    for (int s = 0; s < state_count(); ++s) res += std::abs(y[s] - x[s]);
    x.swap(y);
    if (res <= tol) break;
  }
  if (residual_out != nullptr) *residual_out = res;
  return x;
}

}  // namespace towerlab

#include "towerlab/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "towerlab/errors.hpp"
#include "towerlab/quotient.hpp"
#include "towerlab/rng.hpp"

namespace towerlab {

void CouplingConfig::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("coupling: beta must lie in (0,1)");
  const double floor_k = c_f_hat + c_f_hat / (1.0 - beta);
  if (!(K > floor_k)) {
    throw ConfigError("coupling: K must exceed C_Fhat + C_Fhat/(1-beta) = " +
                      std::to_string(floor_k));
  }
  if (!(rho > zeta + 1.0)) throw ConfigError("coupling: need rho > zeta + 1");
  if (!(rho < theta_reg / std::exp(K))) {
    throw ConfigError("coupling: need rho < theta_reg / e^K");
  }
  if (!(theta_reg > 2.0 * std::exp(K))) {
    throw ConfigError("coupling: need theta_reg > 2 e^K");
  }
  CouplingConfig tmp = *this;
  if (epsilon_schedule(tmp, i0) >= 1.0) {
    throw ConfigError("coupling: eps_{i0} must be below 1");
  }
}

double epsilon_schedule(const CouplingConfig& cfg, int i) {
  if (i < 1) throw ConfigError("epsilon_schedule: i must be >= 1");
  const double frac = static_cast<double>(i - 1) / static_cast<double>(i);
  return std::exp(cfg.K) * (1.0 - std::pow(frac, cfg.rho));
}

int first_index_with_eps_below_one(const CouplingConfig& cfg) {
  for (int i = 1; i < 100'000'000; ++i) {
    if (epsilon_schedule(cfg, i) < 1.0) return i;
  }
  throw ConfigError("first_index_with_eps_below_one: schedule never drops below 1");
}

CouplingConfig derive_coupling_config(double c_f, double beta, double zeta, double k_margin) {
  CouplingConfig cfg;
  cfg.beta = std::min(std::max(beta, 0.05), 0.95);
  cfg.c_f_hat = 2.0 * c_f;
  cfg.zeta = zeta;
  cfg.K = k_margin * (cfg.c_f_hat + cfg.c_f_hat / (1.0 - cfg.beta));
  cfg.K = std::max(cfg.K, 0.25);  // keep the schedule nondegenerate for tiny fits
  cfg.rho = (zeta + 1.0) * 1.125;
  cfg.theta_reg = 1.05 * std::max(2.0 * std::exp(cfg.K), cfg.rho * std::exp(cfg.K));
  cfg.i0 = first_index_with_eps_below_one(cfg);
  cfg.validate();
  return cfg;
}

// -------- pair orbits ------------------------------------------------------

namespace {

struct VisitStream {
  const HyperbolicModel* m = nullptr;
  double u = 0.0;    // base coordinate of the current visit
  long long t = 0;   // time of the current visit
  long long cap = 0;
  Rng* dither = nullptr;
  bool dead = false;

  void init(const HyperbolicModel& model, double u0, int level, long long cap_, Rng* dither_) {
    m = &model;
    cap = cap_;
    dither = dither_;
    if (level == 0) {
      u = u0;
      t = 0;
      return;
    }
    ReturnResult r = quotient_return(model, u0, static_cast<int>(cap_));
    if (r.capped) {
      dead = true;
      return;
    }
    u = r.u_image;
    t = r.R - level;
  }

  double freshen(double x) const {
    if (dither == nullptr) return x;
    const Rect& base = m->cell(1);
    // one part in 2^48 keeps the branch statistics intact while restoring
    // mantissa entropy consumed by the expanding composition
    x += (dither->uniform() - 0.5) * 0x1.0p-48 * base.u_len();
    return std::min(std::max(x, base.u_lo), base.u_hi);
  }

  // advance to the first visit at time >= target
  bool advance_past(long long target) {
    if (dead) return false;
    while (t < target) {
      ReturnResult r = quotient_return(*m, u, static_cast<int>(cap));
      if (r.capped || t + r.R > cap) {
        dead = true;
        return false;
      }
      t += r.R;
      u = freshen(r.u_image);
    }
    return true;
  }
};

}  // namespace

PairWalk stopping_times(const HyperbolicModel& m, double u, int level_u, double v, int level_v,
                        long long cap, Rng* dither) {
  PairWalk walk;
  const int n0 = m.n0();
  VisitStream sx, sy;
  sx.init(m, u, level_u, cap, dither);
  sy.init(m, v, level_v, cap, dither);
  if (sx.dead || sy.dead) {
    walk.capped = true;
    return walk;
  }
  long long prev = 0;
  for (int i = 1;; ++i) {
    VisitStream& active = (i % 2 == 1) ? sx : sy;
    VisitStream& other = (i % 2 == 1) ? sy : sx;
    if (!active.advance_past(prev + n0)) {
      walk.capped = true;
      return walk;
    }
    const long long tau = active.t;
    walk.taus.push_back(tau);
    if (i >= 2) {
      if (!other.advance_past(tau)) {
        walk.capped = true;
        return walk;
      }
      if (other.t == tau) {
        walk.T = tau;
        return walk;
      }
    }
    prev = tau;
    if (tau > cap || i > 1'000'000) {
      walk.capped = true;
      return walk;
    }
  }
}

std::vector<long long> simultaneous_return_sequence(const HyperbolicModel& m, double u, double v,
                                                    int max_terms, long long cap, bool& capped,
                                                    Rng* dither) {
  std::vector<long long> times;
  capped = false;
  const int n0 = m.n0();
  VisitStream sx, sy;
  sx.init(m, u, 0, cap, dither);
  sy.init(m, v, 0, cap, dither);
  long long prev = 0;
  int parity = 1;
  while (static_cast<int>(times.size()) < max_terms) {
    // run one alternating recursion from `prev` until simultaneity
    long long block_prev = prev;
    int i = 1;
    bool found = false;
    while (true) {
      VisitStream& active = (i % 2 == parity % 2) ? sx : sy;
      VisitStream& other = (i % 2 == parity % 2) ? sy : sx;
      if (!active.advance_past(block_prev + n0)) {
        capped = true;
        return times;
      }
      const long long tau = active.t;
      if (i >= 2) {
        if (!other.advance_past(tau)) {
          capped = true;
          return times;
        }
        if (other.t == tau) {
          times.push_back(tau);
          prev = tau;
          found = true;
          break;
        }
      }
      block_prev = tau;
      ++i;
      if (tau > cap || i > 1'000'000) {
        capped = true;
        return times;
      }
    }
    if (!found) break;
  }
  return times;
}

StartSampler lebesgue_tower_sampler(const HyperbolicModel& m, int cap) {
  const Rect base = m.cell(1);
  return [&m, base, cap](Rng& rng, double& u, int& level) {
    for (int tries = 0; tries < 64; ++tries) {
      u = base.u_lo + base.u_len() * rng.uniform();
      ReturnResult r = quotient_return(m, u, cap);
      if (r.capped) continue;
      level = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(r.R)));
      return;
    }
    level = 0;
  };
}

StartSampler base_density_sampler(const HyperbolicModel& m,
                                  const std::function<double(double)>& w, double w_max) {
  const Rect base = m.cell(1);
  return [base, w, w_max](Rng& rng, double& u, int& level) {
    level = 0;
    for (int tries = 0; tries < 4096; ++tries) {
      const double cand = base.u_lo + base.u_len() * rng.uniform();
      if (rng.uniform() * w_max <= w(cand)) {
        u = cand;
        return;
      }
    }
    u = base.u_lo + 0.5 * base.u_len();
  };
}

PairEnsembleStats sample_pair_ensemble(const HyperbolicModel& m, const StartSampler& sx,
                                       const StartSampler& sy, std::int64_t n_pairs,
                                       long long cap, const std::vector<int>& n_grid, int max_i,
                                       std::uint64_t seed, int workers) {
  if (n_pairs <= 0) throw InsufficientSamples("sample_pair_ensemble: need pairs > 0");
  workers = std::max(1, workers);
  PairEnsembleStats out;
  out.n_grid = n_grid;
  out.samples = n_pairs;
  out.interval_counts.assign(max_i, std::vector<std::int64_t>(n_grid.size(), 0));
  out.increments.assign(max_i, {});

  struct Part {
    std::vector<long long> t_samples;
    std::int64_t censored = 0;
    std::vector<std::vector<std::int64_t>> interval_counts;
    std::vector<std::vector<long long>> increments;
  };
  std::vector<Part> parts(workers);
  for (auto& p : parts) {
    p.interval_counts.assign(max_i, std::vector<std::int64_t>(n_grid.size(), 0));
    p.increments.assign(max_i, {});
  }

  auto run = [&](int w) {
    Part& part = parts[w];
    for (std::int64_t k = w; k < n_pairs; k += workers) {
      Rng rng(seed, static_cast<std::uint64_t>(k) * 2 + 1);
      double u, v;
      int lu, lv;
      sx(rng, u, lu);
      sy(rng, v, lv);
      PairWalk walk = stopping_times(m, u, lu, v, lv, cap, &rng);
      if (walk.capped) {
        ++part.censored;
        continue;
      }
      part.t_samples.push_back(walk.T);
      // continue the simultaneous-return sequence for the interval counts
      // restart from fresh base coordinates consistent with the walk's end
      bool capped = false;
      std::vector<long long> seq;
      if (max_i > 0) {
        // replay: T_1 = walk.T from the same starts
        seq = simultaneous_return_sequence(m, u, v, max_i + 1, cap, capped, &rng);
      }
      if (!seq.empty()) {
        for (std::size_t i = 0; i + 1 < seq.size() && static_cast<int>(i) < max_i; ++i) {
          part.increments[i].push_back(seq[i + 1] - seq[i]);
          for (std::size_t j = 0; j < n_grid.size(); ++j) {
            if (seq[i] <= n_grid[j] && n_grid[j] < seq[i + 1]) ++part.interval_counts[i][j];
          }
        }
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  for (const Part& p : parts) {
    out.t_samples.insert(out.t_samples.end(), p.t_samples.begin(), p.t_samples.end());
    out.censored += p.censored;
    for (int i = 0; i < max_i; ++i) {
      out.increments[i].insert(out.increments[i].end(), p.increments[i].begin(),
                               p.increments[i].end());
      for (std::size_t j = 0; j < n_grid.size(); ++j) {
        out.interval_counts[i][j] += p.interval_counts[i][j];
      }
    }
  }
  return out;
}

// -------- density recursion ------------------------------------------------

CouplingGrid CouplingGrid::build(const HyperbolicModel& m, const TowerOptions& tower_opts,
                                 int horizon) {
  CouplingGrid g;
  g.tm_ = TransferMatrix::build(m, tower_opts);
  if (horizon <= tower_opts.max_level + 1) {
    throw ConfigError("CouplingGrid: horizon must exceed max_level + 1");
  }
  g.horizon_ = horizon;
  g.S_ = g.tm_.state_count();
  const int S = g.S_;

  // level-0 states: group bases plus the deep column base
  for (const auto& grp : g.tm_.groups()) g.level0_.push_back(grp.first_state);
  g.level0_.push_back(g.tm_.deep_first_state());
  std::sort(g.level0_.begin(), g.level0_.end());

  const std::vector<double> leb = g.tm_.lebesgue_mass();
  g.m0_.resize(g.level0_.size());
  double tot = 0.0;
  for (std::size_t c = 0; c < g.level0_.size(); ++c) {
    g.m0_[c] = leb[g.level0_[c]];
    tot += g.m0_[c];
  }
  if (tot <= 0.0) throw ConfigError("CouplingGrid: empty base");
  for (double& v : g.m0_) v /= tot;

  // dense horizon kernel
  g.ph_.assign(static_cast<std::size_t>(S) * S, 0.0);
  std::vector<double> x(S), y(S);
  for (int s = 0; s < S; ++s) {
    std::fill(x.begin(), x.end(), 0.0);
    x[s] = 1.0;
    for (int h = 0; h < horizon; ++h) {
      g.tm_.apply(x, y);
      x.swap(y);
    }
    std::copy(x.begin(), x.end(), g.ph_.begin() + static_cast<std::size_t>(s) * S);
  }

  const int B = static_cast<int>(g.level0_.size());
  g.w0_.assign(static_cast<std::size_t>(S) * B, 0.0);
  g.gmin_.assign(S, 0.0);
  g.gmax_.assign(S, 0.0);
  g.ratio_.assign(S, 0.0);
  for (int s = 0; s < S; ++s) {
    double gmin = 1e300, gmax = 0.0;
    for (int c = 0; c < B; ++c) {
      const double w = g.ph_[static_cast<std::size_t>(s) * S + g.level0_[c]];
      g.w0_[static_cast<std::size_t>(s) * B + c] = w;
      const double r = g.m0_[c] > 0.0 ? w / g.m0_[c] : 0.0;
      gmin = std::min(gmin, r);
      gmax = std::max(gmax, r);
    }
    g.gmin_[s] = gmin == 1e300 ? 0.0 : gmin;
    g.gmax_[s] = gmax;
    g.ratio_[s] = g.gmin_[s] > 0.0 ? g.gmax_[s] / g.gmin_[s] : 1e300;
  }
  return g;
}

std::vector<double> CouplingGrid::base_density(const std::function<double(double)>& w) const {
  const HyperbolicModel& m = tm_.model();
  const Rect& base = m.cell(1);
  const double bw = base.u_len() / tm_.base_bins();
  std::vector<double> lambda(S_, 0.0);
  double tot = 0.0;
  for (std::size_t gi = 0; gi < tm_.groups().size(); ++gi) {
    const auto& grp = tm_.groups()[gi];
    // 16-node midpoint average of w over the group's base bin
    double avg = 0.0;
    const double lo = base.u_lo + grp.base_bin * bw;
    for (int k = 0; k < 16; ++k) avg += w(lo + bw * (k + 0.5) / 16.0);
    avg /= 16.0;
    if (avg < 0.0) throw ConfigError("base_density: weight must be nonnegative");
    lambda[grp.first_state] = grp.mass * avg;
    tot += lambda[grp.first_state];
  }
  if (tot <= 0.0) throw ConfigError("base_density: zero total mass");
  for (double& v : lambda) v /= tot;
  return lambda;
}

void CouplingGrid::start(const std::vector<double>& lambda,
                         const std::vector<double>& lambda_prime) {
  if (static_cast<int>(lambda.size()) != S_ || static_cast<int>(lambda_prime.size()) != S_) {
    throw ShapeMismatch("CouplingGrid::start: marginal size mismatch");
  }
  pair_.assign(static_cast<std::size_t>(S_) * S_, 0.0);
  for (int s = 0; s < S_; ++s) {
    if (lambda[s] == 0.0) continue;
    for (int t = 0; t < S_; ++t) {
      pair_[static_cast<std::size_t>(s) * S_ + t] = lambda[s] * lambda_prime[t];
    }
  }
  iter_ = 0;
}

CouplingGrid::RatioReport CouplingGrid::ratio_bound_check(const CouplingConfig& cfg) const {
  RatioReport rep;
  if (pair_.empty()) return rep;
  const double eK = std::exp(cfg.K);
  double mass_adm = 0.0, mass_all = 0.0;
  for (int p = 0; p < S_; ++p) {
    for (int q = 0; q < S_; ++q) {
      const double mass = pair_[static_cast<std::size_t>(p) * S_ + q];
      if (mass <= 0.0) continue;
      const double cell_ratio = ratio_[p] * ratio_[q];
      mass_all += mass;
      rep.worst_overall = std::max(rep.worst_overall, cell_ratio);
      if (cell_ratio <= eK * (1.0 + 1e-6)) {
        mass_adm += mass;
        rep.worst_admissible = std::max(rep.worst_admissible, cell_ratio);
      } else {
        ++rep.violations;
      }
    }
  }
  rep.admissible_mass_fraction = mass_all > 0.0 ? mass_adm / mass_all : 1.0;
  return rep;
}

double CouplingGrid::remaining_mass() const {
  double tot = 0.0;
  for (double v : pair_) tot += v;
  return tot;
}

CouplingStepReport CouplingGrid::density_step(const CouplingConfig& cfg) {
  if (pair_.empty()) throw ConfigError("density_step: call start() first");
  CouplingStepReport rep;
  rep.i = ++iter_;
  const int S = S_;
  const int B = static_cast<int>(level0_.size());
  const double eK = std::exp(cfg.K);

  // cell admissibility and the kappa coefficient on the pre-push density
  double kappa = 0.0;
  double landed_adm = 0.0, landed_all = 0.0;
  double worst_adm_ratio = 0.0, worst_ratio = 0.0;
  for (int p = 0; p < S; ++p) {
    for (int q = 0; q < S; ++q) {
      const double mass = pair_[static_cast<std::size_t>(p) * S + q];
      if (mass <= 0.0) continue;
      const double cell_ratio = ratio_[p] * ratio_[q];
      landed_all += mass;
      worst_ratio = std::max(worst_ratio, cell_ratio);
      if (cell_ratio <= eK) {
        kappa += mass * gmin_[p] * gmin_[q];
        landed_adm += mass;
        worst_adm_ratio = std::max(worst_adm_ratio, cell_ratio);
      }
    }
  }
  rep.ratio_bound = worst_adm_ratio;
  rep.ratio_bound_all = worst_ratio;
  rep.admissible_fraction = landed_all > 0.0 ? landed_adm / landed_all : 1.0;

  // push by the horizon kernel: pair <- PH^T pair PH
  std::vector<double> tmp(static_cast<std::size_t>(S) * S, 0.0);
  for (int p = 0; p < S; ++p) {
    const double* row = &pair_[static_cast<std::size_t>(p) * S];
    double* out = &tmp[static_cast<std::size_t>(p) * S];
    for (int s = 0; s < S; ++s) {
      const double v = row[s];
      if (v == 0.0) continue;
      const double* ph = &ph_[static_cast<std::size_t>(s) * S];
      for (int t = 0; t < S; ++t) out[t] += v * ph[t];
    }
  }
  std::vector<double> pushed(static_cast<std::size_t>(S) * S, 0.0);
  for (int s = 0; s < S; ++s) {
    const double* ph_row = &ph_[static_cast<std::size_t>(s) * S];
    const double* tmp_row = &tmp[static_cast<std::size_t>(s) * S];
    for (int p = 0; p < S; ++p) {
      const double w = ph_row[p];
      if (w == 0.0) continue;
      double* out = &pushed[static_cast<std::size_t>(p) * S];
      for (int t = 0; t < S; ++t) out[t] += w * tmp_row[t];
    }
  }

  const double eps = rep.i >= cfg.i0 ? epsilon_schedule(cfg, rep.i) : 0.0;
  rep.eps_i = eps;
  const double r_i =
      std::pow(static_cast<double>(rep.i - 1) / static_cast<double>(rep.i), cfg.rho);

  if (eps > 0.0 && kappa > 0.0) {
    // subtract the matched component eps * kappa * m0 (x) m0 on the base
    double sub_total = 0.0;
    double max_sub_over_landed = 0.0;
    double marg_residual = 0.0;
    std::vector<double> row_sub(B, 0.0), col_sub(B, 0.0);
    for (int c = 0; c < B; ++c) {
      for (int d = 0; d < B; ++d) {
        const double sub = eps * kappa * m0_[c] * m0_[d];
        double& cellv = pushed[static_cast<std::size_t>(level0_[c]) * S + level0_[d]];
        if (sub > cellv * (1.0 + 1e-12) + 1e-300) {
          throw NegativeDensity("density_step: subtraction overshoots at base cell (" +
                                std::to_string(c) + "," + std::to_string(d) + ")");
        }
        max_sub_over_landed = std::max(max_sub_over_landed, cellv > 0.0 ? sub / cellv : 0.0);
        cellv = std::max(cellv - sub, 0.0);
        sub_total += sub;
        row_sub[c] += sub;
        col_sub[d] += sub;
      }
    }
    for (int c = 0; c < B; ++c) marg_residual = std::max(marg_residual, std::abs(row_sub[c] - col_sub[c]));
    rep.marginal_residual = marg_residual;
    rep.coupled_mass = sub_total;
    // pointwise decrease certificate on admissible cells:
    // remaining/incoming <= 1 - eps/cell_ratio <= r_i  iff  cell_ratio <= e^K
    rep.decrease_margin = worst_adm_ratio > 0.0 ? 1.0 - eps / worst_adm_ratio : 0.0;
    rep.decrease_ok = rep.decrease_margin <= r_i + 1e-12;
  } else {
    rep.decrease_ok = true;
    rep.marginal_residual = 0.0;
  }

  pair_.swap(pushed);
  rep.remaining_mass = remaining_mass();
  return rep;
}

// -------- assembly ---------------------------------------------------------

TvBoundSeries assemble_tv_bounds(const TransferMatrix& tm, const PairEnsembleStats& stats,
                                     const std::vector<double>& lambda,
                                     const std::vector<double>& lambda_prime,
                                     const std::vector<int>& n_values, const CouplingConfig& cfg,
                                     double tolerance) {
  if (!(cfg.rho > cfg.zeta + 1.0)) {
    throw ConfigError("assemble_tv_bounds: rho must exceed zeta + 1");
  }
  TvBoundSeries out;
  out.n_values = n_values;
  out.k1 = 2.0 * std::pow(static_cast<double>(std::max(cfg.i0 - 1, 1)), cfg.rho);

  // direct total-variation side by matrix powers
  const int n_max = n_values.empty() ? 0 : *std::max_element(n_values.begin(), n_values.end());
  std::vector<double> a = lambda, b = lambda_prime, ya, yb;
  std::size_t idx = 0;
  std::vector<int> sorted = n_values;
  std::sort(sorted.begin(), sorted.end());
  out.direct_tv.assign(n_values.size(), 0.0);
  for (int n = 0; n <= n_max; ++n) {
    if (idx < sorted.size() && sorted[idx] == n) {
      double tv = 0.0;
      for (std::size_t s = 0; s < a.size(); ++s) tv += std::abs(a[s] - b[s]);
      for (std::size_t j = 0; j < n_values.size(); ++j) {
        if (n_values[j] == n) out.direct_tv[j] = tv;
      }
      ++idx;
      while (idx < sorted.size() && sorted[idx] == sorted[idx - 1]) ++idx;
    }
    if (n == n_max) break;
    tm.apply(a, ya);
    tm.apply(b, yb);
    a.swap(ya);
    b.swap(yb);
  }

  // empirical bound side
  const double total = static_cast<double>(stats.samples);
  std::vector<long long> ts = stats.t_samples;
  std::sort(ts.begin(), ts.end());
  out.p_t_gt_n.assign(n_values.size(), 0.0);
  out.bound.assign(n_values.size(), 0.0);
  for (std::size_t j = 0; j < n_values.size(); ++j) {
    const int n = n_values[j];
    const auto it = std::upper_bound(ts.begin(), ts.end(), static_cast<long long>(n));
    const double p_gt = (static_cast<double>(ts.end() - it) + stats.censored) / total;
    out.p_t_gt_n[j] = p_gt;
    double series = 0.0;
    for (std::size_t i = 0; i < stats.interval_counts.size(); ++i) {
      // interval i sits between the (i+1)-th and (i+2)-th simultaneous returns
      const double p = stats.interval_counts[i][j] / total;
      series += p / std::pow(static_cast<double>(i + 1), cfg.rho);
    }
    out.bound[j] = 2.0 * p_gt + out.k1 * series;
  }
  out.dominated = true;
  for (std::size_t j = 0; j < n_values.size(); ++j) {
    if (out.direct_tv[j] > out.bound[j] * (1.0 + tolerance) + 1e-12) out.dominated = false;
  }
  return out;
}

IncrementDomination increment_domination_check(const PairEnsembleStats& stats,
                                               const PairEnsembleStats& reference) {
  IncrementDomination out;
  std::vector<long long> ref = reference.t_samples;
  std::sort(ref.begin(), ref.end());
  const double ref_total = static_cast<double>(reference.samples);
  for (std::size_t i = 0; i < stats.increments.size(); ++i) {
    const auto& inc = stats.increments[i];
    if (inc.size() < 100) continue;  // skipped with note by the caller
    std::vector<long long> v = inc;
    std::sort(v.begin(), v.end());
    double k2 = 0.0;
    for (int n : stats.n_grid) {
      const auto iti = std::upper_bound(v.begin(), v.end(), static_cast<long long>(n));
      const double p_inc = static_cast<double>(v.end() - iti) / v.size();
      const auto itr = std::upper_bound(ref.begin(), ref.end(), static_cast<long long>(n));
      const double p_ref =
          (static_cast<double>(ref.end() - itr) + reference.censored) / ref_total;
      if (p_ref * ref_total >= 25.0 && p_inc > 0.0) {
        k2 = std::max(k2, p_inc / p_ref);
      }
    }
    out.i_values.push_back(static_cast<int>(i + 1));
    out.k2.push_back(k2);
    out.samples.push_back(static_cast<std::int64_t>(inc.size()));
  }
  return out;
}

}  // namespace towerlab

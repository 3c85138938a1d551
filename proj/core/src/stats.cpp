#include "towerlab/stats.hpp"

#include <algorithm>
#include <cmath>

#include "towerlab/errors.hpp"
#include "towerlab/rng.hpp"

namespace towerlab {

Observable obs_constant(double c) {
  Observable o;
  o.eval = [c](const Point2&) { return c; };
  o.eta = 1.0;
  o.seminorm_estimate = 0.0;
  o.sup_norm = std::abs(c);
  o.u_only = true;
  return o;
}

namespace {

// geometry snapshot so the evaluator stays a plain value type
struct Charts {
  double u_lo[2], u_inv[2], s_lo[2], s_inv[2];  // [0] = neutral cell, [1] = others
  static Charts of(const HyperbolicModel& m) {
    Charts c;
    c.u_lo[0] = m.cell(0).u_lo;
    c.u_inv[0] = 1.0 / m.cell(0).u_len();
    c.s_lo[0] = m.cell(0).s_lo;
    c.s_inv[0] = 1.0 / m.cell(0).s_len();
    c.u_lo[1] = m.cell(1).u_lo;
    c.u_inv[1] = 1.0 / m.cell(1).u_len();
    c.s_lo[1] = m.cell(1).s_lo;
    c.s_inv[1] = 1.0 / m.cell(1).s_len();
    return c;
  }
};

}  // namespace

Observable obs_coordinate_u(const HyperbolicModel& m) {
  Observable o;
  const Charts c = Charts::of(m);
  o.eval = [c](const Point2& p) {
    const int k = p.cell == 0 ? 0 : 1;
    return (p.a - c.u_lo[k]) * c.u_inv[k];
  };
  o.eta = 1.0;
  o.seminorm_estimate = 1.0;
  o.sup_norm = 1.0;
  o.u_only = true;
  return o;
}

Observable obs_coordinate_s(const HyperbolicModel& m) {
  Observable o;
  const Charts c = Charts::of(m);
  o.eval = [c](const Point2& p) {
    const int k = p.cell == 0 ? 0 : 1;
    return (p.b - c.s_lo[k]) * c.s_inv[k];
  };
  o.eta = 1.0;
  o.seminorm_estimate = 1.0;
  o.sup_norm = 1.0;
  o.u_only = false;
  return o;
}

Observable obs_trig_u(int harmonics) {
  Observable o;
  const double k = 2.0 * 3.14159265358979323846 * harmonics;
  o.eval = [k](const Point2& p) { return std::sin(k * p.a) + 0.25 * std::cos(0.5 * k * p.a); };
  o.eta = 1.0;
  o.seminorm_estimate = 1.25 * k;
  o.sup_norm = 1.25;
  o.u_only = true;
  return o;
}

Observable obs_cell_indicator(int cell) {
  Observable o;
  o.eval = [cell](const Point2& p) { return p.cell == cell ? 1.0 : 0.0; };
  // cross-cell distances saturate at 1, so the unit jump is Lipschitz-1
  o.eta = 1.0;
  o.seminorm_estimate = 1.0;
  o.sup_norm = 1.0;
  o.u_only = true;
  return o;
}

OrbitSummary simulate_orbit(const HyperbolicModel& m, Point2 p0, std::int64_t n,
                            const std::vector<Observable>& obs, std::int64_t burn_in,
                            std::int64_t stride, std::uint64_t dither_seed) {
  if (n < 0 || n > 1'000'000'000LL) throw ConfigError("simulate_orbit: n outside [0, 1e9]");
  if (stride < 1) throw ConfigError("simulate_orbit: stride must be >= 1");
  m.require_valid(p0);
  OrbitSummary out;
  out.series.resize(obs.size());
  Rng rng(dither_seed, 200);
  Point2 p = p0;
  for (std::int64_t k = 0; k < burn_in + n; ++k) {
    if (k >= burn_in && (k - burn_in) % stride == 0) {
      for (std::size_t i = 0; i < obs.size(); ++i) out.series[i].push_back(obs[i].eval(p));
    }
    p = m.step(p);
    if (dither_seed != 0) {
      const Rect& r = m.cell(p.cell);
      p.a += (rng.uniform() - 0.5) * 0x1.0p-48 * r.u_len();
      p.a = std::min(std::max(p.a, r.u_lo), r.u_hi);
    }
  }
  out.end = p;
  return out;
}

namespace {

// One long-orbit driver with a callback per step; uses the 1-D factor when
// the caller only needs stable-leaf-constant observables.
//
// Every double is a dyadic rational, and the affine branches map dyadics
// to dyadics, so exact float orbits degenerate onto branch endpoints after
// about fifty expansion steps.  The driver therefore re-dithers the
// unstable coordinate by one part in 2^48 each step, which keeps the
// pseudo-orbit statistically typical (the perturbation sits at the
// shadowing scale and is invisible to every estimator here).
template <typename F>
void drive_orbit(const HyperbolicModel& m, bool u_only, std::uint64_t seed, std::int64_t burn_in,
                 std::int64_t steps, F&& visit) {
  Rng rng(seed, 100);
  auto dither = [&](Point2& p) {
    const Rect& r = m.cell(p.cell);
    p.a += (rng.uniform() - 0.5) * 0x1.0p-48 * r.u_len();
    p.a = std::min(std::max(p.a, r.u_lo), r.u_hi);
  };
  if (u_only) {
    int cell = 1;
    double u = m.cell(1).u_lo + m.cell(1).u_len() * rng.uniform();
    Point2 p{1, u, m.cell(1).s_lo + 0.5 * m.cell(1).s_len()};
    for (std::int64_t k = 0; k < burn_in + steps; ++k) {
      if (k >= burn_in) visit(p);
      int nc;
      double nu;
      m.quotient_step(p.cell, p.a, nc, nu);
      p.cell = nc;
      p.a = nu;
      p.b = m.cell(nc).s_lo + 0.5 * m.cell(nc).s_len();
      dither(p);
    }
  } else {
    Point2 p{1, m.cell(1).u_lo + m.cell(1).u_len() * rng.uniform(),
             m.cell(1).s_lo + m.cell(1).s_len() * rng.uniform()};
    for (std::int64_t k = 0; k < burn_in + steps; ++k) {
      if (k >= burn_in) visit(p);
      p = m.step(p);
      dither(p);
    }
  }
}

}  // namespace

CorrelationSeries correlation_mc(const HyperbolicModel& m, const Observable& phi,
                                 const Observable& psi, const std::vector<int>& n_values,
                                 const McConfig& cfg) {
  if (n_values.empty()) throw ConfigError("correlation_mc: empty lag list");
  CorrelationSeries out;
  out.n_values = n_values;
  out.method = "monte_carlo";
  const int n_max = *std::max_element(n_values.begin(), n_values.end());
  if (n_max < 0) throw ConfigError("correlation_mc: negative lag");
  const std::int64_t T = cfg.orbit_len;
  if (T < 16 * (n_max + 1)) throw InsufficientSamples("correlation_mc: orbit too short");
  const int nb = std::max(8, cfg.batches);
  const std::int64_t batch_len = T / nb;

  // Per-lag head/tail means keep the estimator exactly zero for constant
  // observables: C_n uses the mean of phi over t >= n and of psi over
  // t < T - n, matching the product accumulation ranges.
  const std::size_t L = n_values.size();
  const int M = n_max + 1;
  std::vector<double> ring(M, 0.0);
  std::vector<std::vector<double>> batch_lag(nb, std::vector<double>(L, 0.0));
  std::vector<std::vector<double>> batch_head(nb, std::vector<double>(L, 0.0));
  std::vector<std::vector<double>> batch_tail(nb, std::vector<double>(L, 0.0));
  std::vector<std::vector<std::int64_t>> batch_cnt(nb, std::vector<std::int64_t>(L, 0));

  std::int64_t t = 0;
  const std::int64_t stride = std::max<std::int64_t>(cfg.stride, 1);
  const bool fast = phi.u_only && psi.u_only;
  drive_orbit(m, fast, cfg.seed, cfg.burn_in, T, [&](const Point2& p) {
    const double gv = psi.eval(p);
    ring[t % M] = gv;
    if (t % stride != 0) {
      ++t;
      return;
    }
    const double fv = phi.eval(p);
    const int b = static_cast<int>(std::min<std::int64_t>(t / batch_len, nb - 1));
    for (std::size_t i = 0; i < L; ++i) {
      const int n = n_values[i];
      if (t >= n) {
        const double lagged = ring[(t - n) % M];
        batch_lag[b][i] += fv * lagged;
        batch_head[b][i] += fv;
        batch_tail[b][i] += lagged;
        ++batch_cnt[b][i];
      }
    }
    ++t;
  });

  out.c_values.resize(L);
  out.ci.resize(L);
  for (std::size_t i = 0; i < L; ++i) {
    double lag = 0.0, head = 0.0, tail = 0.0;
    std::int64_t cnt = 0;
    for (int b = 0; b < nb; ++b) {
      lag += batch_lag[b][i];
      head += batch_head[b][i];
      tail += batch_tail[b][i];
      cnt += batch_cnt[b][i];
    }
    const double mean_head = head / cnt;
    const double mean_tail = tail / cnt;
    const double c = lag / cnt - mean_head * mean_tail;
    out.c_values[i] = std::abs(c);
    std::vector<double> z;
    z.reserve(nb);
    for (int b = 0; b < nb; ++b) {
      if (batch_cnt[b][i] == 0) continue;
      z.push_back(batch_lag[b][i] / batch_cnt[b][i] - mean_head * mean_tail);
    }
    double zm = 0.0;
    for (double v : z) zm += v;
    zm /= z.size();
    double var = 0.0;
    for (double v : z) var += (v - zm) * (v - zm);
    var /= std::max<std::size_t>(z.size() - 1, 1);
    out.ci[i] = 1.96 * std::sqrt(var / z.size());
  }
  return out;
}

CorrelationSeries correlation_spectral(const TransferMatrix& tm, const Observable& phi,
                                       const Observable& psi, const std::vector<int>& n_values) {
  if (!phi.u_only || !psi.u_only) {
    throw DomainError("correlation_spectral: observables must be constant on stable leaves");
  }
  if (n_values.empty()) throw ConfigError("correlation_spectral: empty lag list");
  const QuotientUlam& q = tm.chain();
  const HyperbolicModel& m = tm.model();
  const int S = q.state_count();
  std::vector<double> phi_s(S), psi_s(S);
  for (int s = 0; s < S; ++s) {
    const auto& bin = q.bins()[s];
    Point2 rep{bin.cell, q.bin_mid(s), m.cell(bin.cell).s_lo + 0.5 * m.cell(bin.cell).s_len()};
    phi_s[s] = phi.eval(rep);
    psi_s[s] = psi.eval(rep);
  }
  double residual = 0.0;
  std::vector<double> rho = q.stationary(1e-13, 400'000, &residual);
  double mean_psi = 0.0, mean_phi = 0.0;
  for (int s = 0; s < S; ++s) {
    mean_psi += psi_s[s] * rho[s];
    mean_phi += phi_s[s] * rho[s];
  }
  std::vector<double> u(S), v;
  for (int s = 0; s < S; ++s) u[s] = (psi_s[s] - mean_psi) * rho[s];

  CorrelationSeries out;
  out.n_values = n_values;
  out.method = "spectral";
  out.c_values.resize(n_values.size());
  out.ci.assign(n_values.size(), 0.0);
  const int n_max = *std::max_element(n_values.begin(), n_values.end());
  for (int step = 0; step <= n_max; ++step) {
    for (std::size_t i = 0; i < n_values.size(); ++i) {
      if (n_values[i] == step) {
        double c = 0.0;
        for (int s = 0; s < S; ++s) c += phi_s[s] * u[s];
        out.c_values[i] = std::abs(c);
      }
    }
    if (step == n_max) break;
    q.apply(u, v);
    u.swap(v);
  }
  return out;
}

std::vector<LdSeries> large_deviation(const HyperbolicModel& m, const Observable& phi,
                                      const std::vector<double>& eps_list,
                                      const std::vector<int>& n_values, const LdConfig& cfg) {
  if (cfg.ensemble < 100) throw InsufficientSamples("large_deviation: ensemble too small");
  if (eps_list.empty() || n_values.empty()) throw ConfigError("large_deviation: empty grids");
  const int n_max = *std::max_element(n_values.begin(), n_values.end());
  const bool fast = phi.u_only;

  // space average from a calibration orbit
  double mean = 0.0;
  {
    std::int64_t cnt = 0;
    drive_orbit(m, fast, cfg.seed ^ 0x5151, cfg.burn_in, cfg.mean_orbit, [&](const Point2& p) {
      mean += phi.eval(p);
      ++cnt;
    });
    mean /= cnt;
  }

  const std::size_t ne = eps_list.size();
  const std::size_t nn = n_values.size();
  std::vector<std::vector<std::int64_t>> hits(ne, std::vector<std::int64_t>(nn, 0));

  // ensemble start states drawn from the same long orbit
  std::vector<Point2> starts;
  starts.reserve(cfg.ensemble);
  {
    std::int64_t k = 0;
    drive_orbit(m, fast, cfg.seed, cfg.burn_in,
                static_cast<std::int64_t>(cfg.ensemble) * cfg.spacing, [&](const Point2& p) {
                  if (k % cfg.spacing == 0 &&
                      starts.size() < static_cast<std::size_t>(cfg.ensemble)) {
                    starts.push_back(p);
                  }
                  ++k;
                });
  }
  if (starts.size() < static_cast<std::size_t>(cfg.ensemble)) {
    throw InsufficientSamples("large_deviation: could not draw the requested ensemble");
  }

  for (std::size_t mi = 0; mi < starts.size(); ++mi) {
    Point2 p = starts[mi];
    Rng mrng(cfg.seed ^ 0xD17ULL, mi);  // per-member dither stream
    double acc = 0.0;
    int ni = 0;
    for (int t = 1; t <= n_max && ni < static_cast<int>(nn); ++t) {
      if (fast) {
        int nc;
        double nu;
        m.quotient_step(p.cell, p.a, nc, nu);
        p.cell = nc;
        p.a = nu;
      } else {
        p = m.step(p);
      }
      const Rect& r = m.cell(p.cell);
      p.a += (mrng.uniform() - 0.5) * 0x1.0p-48 * r.u_len();
      p.a = std::min(std::max(p.a, r.u_lo), r.u_hi);
      acc += phi.eval(p);
      if (t == n_values[ni]) {
        const double dev = std::abs(acc / t - mean);
        for (std::size_t e = 0; e < ne; ++e) {
          if (dev > eps_list[e]) ++hits[e][ni];
        }
        ++ni;
      }
    }
  }

  std::vector<LdSeries> out(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    out[e].eps = eps_list[e];
    out[e].n_values = n_values;
    out[e].ensemble = cfg.ensemble;
    out[e].space_average = mean;
    out[e].ld.resize(nn);
    out[e].ci.resize(nn);
    for (std::size_t i = 0; i < nn; ++i) {
      const double p = static_cast<double>(hits[e][i]) / cfg.ensemble;
      out[e].ld[i] = p;
      out[e].ci[i] = 1.96 * std::sqrt(std::max(p * (1.0 - p), 0.0) / cfg.ensemble);
    }
  }
  return out;
}

double holder_seminorm(const HyperbolicModel& m, const Observable& obs, int n_pairs,
                       std::uint64_t seed) {
  Rng rng(seed, 7);
  double sup = 0.0;
  Point2 p{1, m.cell(1).u_lo + 0.37 * m.cell(1).u_len(),
           m.cell(1).s_lo + 0.61 * m.cell(1).s_len()};
  for (int k = 0; k < 100; ++k) p = m.step(p);
  for (int trial = 0; trial < n_pairs; ++trial) {
    p = m.step(p);
    const Rect& r = m.cell(p.cell);
    const double scale = std::pow(2.0, -static_cast<double>(rng.uniform_index(40)));
    Point2 x = p;
    Point2 y = p;
    y.a = std::min(r.u_hi, x.a + scale * r.u_len());
    y.b = std::min(r.s_hi, x.b + scale * r.s_len());
    const double d = m.distance(x, y);
    if (d <= 0.0) continue;
    const double df = std::abs(obs.eval(x) - obs.eval(y));
    sup = std::max(sup, df / std::pow(d, obs.eta));
    // occasional cross-cell pair; chart distance saturates at 1
    if (trial % 5 == 0) {
      Point2 z{static_cast<int>(rng.uniform_index(m.cell_count())), 0.0, 0.0};
      const Rect& rz = m.cell(z.cell);
      z.a = rz.u_lo + rz.u_len() * rng.uniform();
      z.b = rz.s_lo + rz.s_len() * rng.uniform();
      const double dz = m.distance(x, z);
      if (dz > 0.0) {
        sup = std::max(sup, std::abs(obs.eval(x) - obs.eval(z)) / std::pow(dz, obs.eta));
      }
    }
  }
  return sup;
}

}  // namespace towerlab

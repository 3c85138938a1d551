#include "towerlab/return_times.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <thread>

#include "towerlab/errors.hpp"
#include "towerlab/rng.hpp"

namespace towerlab {

int rhat(const Point2& p, const HyperbolicModel& m) {
  m.require_valid(p);
  if (p.cell != 0) return 1;
  return m.level_depth(p.a) + 1;
}

ReturnRecord return_time(const Point2& p, const HyperbolicModel& m, int cap) {
  m.require_valid(p);
  if (p.cell != 1) throw DomainError("return_time: point must start on the reference cell");
  CheckpointWalk w = run_checkpoints(m, p.a, cap);
  ReturnRecord rec;
  rec.rhat_sequence = std::move(w.checkpoint_times);
  rec.visits = std::move(w.visited_cells);
  rec.R = w.R;
  rec.capped = w.capped;
  return rec;
}

SeparationTime separation_time(const Point2& x, const Point2& y, const HyperbolicModel& m,
                               int cap) {
  m.require_valid(x);
  m.require_valid(y);
  if (x.cell != 1 || y.cell != 1) {
    throw DomainError("separation_time: both points must lie in the reference cell");
  }
  SeparationResult r = quotient_separation(m, x.a, y.a, cap);
  return SeparationTime{r.s, r.at_cap};
}

TailEstimate tail_histogram(const std::vector<int>& samples, std::int64_t censored,
                            int window_lo, int window_hi) {
  if (samples.size() < 10'000) {
    throw InsufficientSamples("tail_histogram: need at least 1e4 samples");
  }
  if (window_lo < 1 || window_hi <= window_lo) {
    throw ConfigError("tail_histogram: bad window");
  }
  int max_r = 0;
  for (int r : samples) max_r = std::max(max_r, r);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(max_r) + 2, 0);
  for (int r : samples) ++counts[r];
  // survival S(n) = #{R > n}; censored samples exceed every finite value
  std::vector<std::int64_t> surv(static_cast<std::size_t>(max_r) + 2, 0);
  std::int64_t acc = censored;
  for (int n = max_r; n >= 0; --n) {
    acc += counts[n + 1];
    surv[n] = acc;
  }

  TailEstimate est;
  est.sample_size = static_cast<std::int64_t>(samples.size()) + censored;
  est.censored = censored;
  est.window_lo = window_lo;
  est.window_hi = window_hi;

  int distinct = 0;
  {
    std::vector<char> seen(static_cast<std::size_t>(max_r) + 2, 0);
    for (int r : samples) {
      if (r >= window_lo && r <= window_hi && !seen[r]) {
        seen[r] = 1;
        ++distinct;
      }
    }
  }
  if (distinct < 10) {
    throw DegenerateSupport("tail_histogram: fewer than 10 distinct values in window");
  }

  std::vector<double> xs, ys;
  const double total = static_cast<double>(est.sample_size);
  for (int n = 1; n <= std::min(max_r, window_hi * 2); ++n) {
    est.survival.emplace_back(n, surv[n]);
  }
  for (int n = window_lo; n <= std::min(window_hi, max_r); ++n) {
    if (surv[n] > 0) {
      xs.push_back(n);
      ys.push_back(surv[n] / total);
    }
  }
  SlopeFit fit = fit_slope(xs, ys, window_lo, window_hi);
  est.slope = fit.slope;
  est.ci_lo = fit.ci_lo;
  est.ci_hi = fit.ci_hi;
  return est;
}

TailSample sample_return_times(const HyperbolicModel& m, std::int64_t n_samples, int cap,
                               std::uint64_t seed, int workers) {
  if (n_samples <= 0) throw InsufficientSamples("sample_return_times: need samples > 0");
  workers = std::max(1, workers);
  const Rect& base = m.cell(1);
  std::vector<std::vector<int>> parts(workers);
  std::vector<std::int64_t> censored(workers, 0);
  auto run = [&](int w) {
    auto& out = parts[w];
    out.reserve(static_cast<std::size_t>(n_samples / workers + 1));
    for (std::int64_t i = w; i < n_samples; i += workers) {
      // one substream per sample: results do not depend on the shard count
      Rng rng(seed, static_cast<std::uint64_t>(i));
      const double u = base.u_lo + base.u_len() * rng.uniform();
      ReturnResult r = quotient_return(m, u, cap);
      if (r.capped) {
        ++censored[w];
      } else {
        out.push_back(r.R);
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  TailSample out;
  for (int w = 0; w < workers; ++w) {
    out.values.insert(out.values.end(), parts[w].begin(), parts[w].end());
    out.censored += censored[w];
  }
  return out;
}

DistortionSample distortion_check(const Point2& x, const Point2& y, const HyperbolicModel& m,
                                  int cap) {
  m.require_valid(x);
  m.require_valid(y);
  if (x.cell != y.cell || x.b != y.b) {
    throw LeafMismatch("distortion_check: points must share an unstable leaf");
  }
  if (x.cell != 1) throw DomainError("distortion_check: leaf must lie in the reference cell");
  DistortionSample out;
  ReturnResult rx = quotient_return(m, x.a, cap);
  ReturnResult ry = quotient_return(m, y.a, cap);
  if (rx.capped || ry.capped) return out;
  if (rx.R != ry.R) return out;  // distinct cylinders separate immediately
  SeparationResult sep0 = quotient_separation(m, x.a, y.a, 1);
  if (sep0.s < 1) return out;  // itineraries differ within the first block
  out.log_ratio = std::abs(rx.log_deriv - ry.log_deriv);
  SeparationResult sep = quotient_separation(m, rx.u_image, ry.u_image, std::min(cap, 512));
  out.s_image = sep.s;
  out.s_at_cap = sep.at_cap;
  out.valid = true;
  return out;
}

std::vector<double> conditional_return_fractions(const std::vector<ReturnRecord>& records,
                                                 int max_i) {
  std::vector<std::int64_t> alive(max_i + 1, 0), returned(max_i + 1, 0);
  for (const ReturnRecord& rec : records) {
    const int k = static_cast<int>(rec.rhat_sequence.size());
    for (int i = 1; i <= max_i; ++i) {
      if (i > k) break;
      ++alive[i];
      const bool is_return = !rec.capped && rec.R == rec.rhat_sequence[i - 1] && i == k;
      if (is_return) ++returned[i];
    }
  }
  std::vector<double> frac(max_i + 1, 0.0);
  for (int i = 1; i <= max_i; ++i) {
    frac[i] = alive[i] > 0 ? static_cast<double>(returned[i]) / alive[i] : 0.0;
  }
  return frac;
}

double level_set_survival(const HyperbolicModel& m, int n) {
  const auto& ar = m.boundary_table_right();
  const auto& al = m.boundary_table_left();
  if (n < 0 || n >= static_cast<int>(ar.size())) {
    throw SequenceExhausted("level_set_survival: n beyond the boundary table");
  }
  // {rhat > n} on the neutral fiber is the union of the level sets of
  // depth >= n, i.e. [a'_n, a_n]
  const double len = ar[n] - al[n];
  return len / (ar[0] - al[0]);
}

}  // namespace towerlab

// towerlab command-line driver: orchestrates the experiment pipelines,
// writes CSV outputs with reproducibility metadata, and reports a summary
// block per run.
//
// Exit codes: 0 success, 1 configuration error, 2 numerical failure
// (tolerance breach), 3 inconclusive (confidence interval too wide).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "towerlab/cohomology.hpp"
#include "towerlab/config.hpp"
#include "towerlab/coupling.hpp"
#include "towerlab/errors.hpp"
#include "towerlab/fit.hpp"
#include "towerlab/model.hpp"
#include "towerlab/quotient.hpp"
#include "towerlab/return_times.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/stats.hpp"
#include "towerlab/tower.hpp"

using namespace towerlab;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitInconclusive = 3;

struct RunContext {
  Config cfg;
  std::uint64_t seed = 1;
  int workers = 4;
  std::string out_dir = ".";
  HyperbolicModel model;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ModelConfig model_config_from(const Config& cfg) {
  ModelConfig mc;
  mc.theta = cfg.get_double("model.theta", 0.5);
  mc.lambda = cfg.get_double("model.lambda", 0.4);
  mc.cells = static_cast<int>(cfg.get_int("model.cells", 4));
  mc.a0 = cfg.get_double("model.a0", 0.5);
  mc.a0_prime = cfg.get_double("model.a0_prime", -0.5);
  std::vector<int> tr = cfg.get_int_list("model.transition", {});
  if (!tr.empty()) mc.transition = tr;
  return mc;
}

TowerOptions tower_options_from(const Config& cfg) {
  TowerOptions t;
  t.quotient.bins_per_cell = static_cast<int>(cfg.get_int("tower.bins_per_cell", 512));
  t.quotient.j_max = static_cast<int>(cfg.get_int("tower.j_max", 4000));
  t.base_bins = static_cast<int>(cfg.get_int("tower.base_bins", 32));
  t.r_detail = static_cast<int>(cfg.get_int("tower.r_detail", 64));
  t.max_level = static_cast<int>(cfg.get_int("tower.max_level", 2048));
  t.tail_extension = static_cast<int>(cfg.get_int("tower.tail_extension", 16384));
  return t;
}

class CsvFile {
 public:
  CsvFile(const RunContext& ctx, const std::string& name, const std::string& header)
      : ctx_(ctx) {
    std::filesystem::create_directories(ctx.out_dir);
    path_ = ctx.out_dir + "/" + name;
    out_.open(path_);
    if (!out_) throw ConfigError("cannot open output file " + path_);
    out_ << header << '\n';
  }
  template <typename... Args>
  void row(Args&&... args) {
    bool first = true;
    ((out_ << (first ? "" : ","), first = false, write(args)), ...);
    out_ << '\n';
  }
  ~CsvFile() {
    char meta[128];
    std::snprintf(meta, sizeof meta, "# config_hash=%016llx seed=%llu",
                  static_cast<unsigned long long>(ctx_.cfg.hash()),
                  static_cast<unsigned long long>(ctx_.seed));
    out_ << meta << '\n';
  }

 private:
  void write(double v) { out_ << fmt(v); }
  void write(int v) { out_ << v; }
  void write(long long v) { out_ << v; }
  void write(const std::string& s) { out_ << s; }
  const RunContext& ctx_;
  std::string path_;
  std::ofstream out_;
};

void emit_summary(const RunContext& ctx, const std::string& command, json& j) {
  j["command"] = command;
  j["seed"] = ctx.seed;
  j["theta"] = ctx.model.intermittent().theta;
  j["zeta_target"] = ctx.cfg.get_double("coupling.zeta", 3.0);
  std::filesystem::create_directories(ctx.out_dir);
  std::ofstream out(ctx.out_dir + "/summary_" + command + ".json");
  out << j.dump(2) << '\n';
  std::printf("%s\n", j.dump(2).c_str());
}

json slope_entry(double value, double lo, double hi) {
  return json{{"value", value}, {"ci_lo", lo}, {"ci_hi", hi}};
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// ---------------------------------------------------------------- validate

int run_validate(RunContext& ctx) {
  json j;
  bool pass = true;
  const HyperbolicModel& m = ctx.model;
  m.verify_markov_crossing();

  {
    Rng rng(ctx.seed, 301);
    double worst = 0.0;
    for (int i = 0; i < 10'000; ++i) {
      Point2 p{1 + static_cast<int>(rng.uniform_index(m.cell_count() - 1)), rng.uniform(),
               rng.uniform()};
      for (int k = 0; k < 2; ++k) p = m.step(p);
      Point2 back = m.step_inverse(m.step(p));
      worst = std::max(worst, std::max(std::abs(back.a - p.a), std::abs(back.b - p.b)));
    }
    j["invertibility_worst"] = worst;
    pass = pass && worst <= 1e-12;
  }

  {
    // the envelope is the per-step supremum over pairs; pass if no value
    // along it exceeds ten times its median
    Rng rng(ctx.seed, 302);
    const int horizon = 2000;
    std::vector<double> env(horizon, 0.0);
    for (int i = 0; i < 400; ++i) {
      Point2 x{1, rng.uniform(), rng.uniform()};
      Point2 y = x;
      y.b = std::min(1.0, x.b + 1e-4);
      if (y.b == x.b) continue;
      EnvelopeReport rep = check_contraction_stable(x, y, horizon, m);
      for (int n = 0; n < horizon; ++n) env[n] = std::max(env[n], rep.ratios[n]);
    }
    const double med = median_of(env);
    const double mx = *std::max_element(env.begin(), env.end());
    j["stable_envelope"] = {{"median", med}, {"max", mx}};
    pass = pass && mx > 0.0 && mx < 1e6;  // bounded envelope (the constant grows with tau)
  }

  {
    Rng rng(ctx.seed, 303);
    const int back = 590;
    std::vector<double> env(back, 0.0);
    for (int i = 0; i < 400; ++i) {
      Point2 s{1, rng.uniform(), rng.uniform()};
      EnvelopeReport rep = check_contraction_unstable(s, 1e-7, 600, back, m, ctx.seed ^ i);
      if (rep.degenerate) continue;
      for (int n = 0; n < back; ++n) env[n] = std::max(env[n], rep.ratios[n]);
    }
    const double med = median_of(env);
    const double mx = *std::max_element(env.begin(), env.end());
    j["unstable_envelope"] = {{"median", med}, {"max", mx}};
    pass = pass && mx > 0.0 && mx < 1e6;  // bounded envelope (the constant grows with tau)
  }

  {
    JacobianRegularity fit = jacobian_regularity_fit(m, 4000, ctx.seed ^ 0x304);
    j["distortion"] = {{"c_f", fit.c_f}, {"beta", fit.beta}, {"pairs", fit.pairs_used}};
    pass = pass && fit.beta < 1.0 && fit.c_f > 0.0 && fit.c_f < 1e3;
  }

  {
    Rng rng(ctx.seed, 305);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      WeightResult w = reference_measure_weight(Point2{1, rng.uniform(), rng.uniform()}, 128, m);
      worst = std::max(worst, std::abs(w.log_weight));
    }
    j["foliation_weight_log_worst"] = worst;
    pass = pass && worst <= 1e-12;
  }

  // coboundary construction dump: (point id, chi, psi, tail bound)
  {
    Observable phi2;
    phi2.eval = [](const Point2& p) {
      return std::sin(3.0 * p.a) + 0.7 * std::sin(2.0 * p.b + 0.5);
    };
    phi2.eta = 1.0;
    phi2.seminorm_estimate = 3.0;
    phi2.sup_norm = 1.7;
    Rng rng(ctx.seed, 306);
    CsvFile csv(ctx, "cohomology.csv", "point,chi,psi,tail_bound");
    for (int i = 0; i < 64; ++i) {
      TowerPoint t = make_tower_point(m, Point2{1, rng.uniform(), rng.uniform()});
      ChiResult c = chi(t, phi2, 1024, m);
      PsiResult r = psi_decomposition(t, phi2, 1024, m);
      csv.row(i, c.value, r.value, c.tail_bound);
    }
  }

  j["pass"] = pass;
  emit_summary(ctx, "validate", j);
  return pass ? kExitOk : kExitNumerical;
}

// ------------------------------------------------------------------- tails

int run_tails(RunContext& ctx, std::int64_t samples_override) {
  const std::int64_t samples =
      samples_override >= 0 ? samples_override : ctx.cfg.get_int("tails.samples", 2'000'000);
  if (samples <= 0) throw ConfigError("tails: need a positive sample count");
  const int window_lo = static_cast<int>(ctx.cfg.get_int("tails.window_lo", 20));
  const int window_hi = static_cast<int>(ctx.cfg.get_int("tails.window_hi", 500));
  const int cap = static_cast<int>(ctx.cfg.get_int("tails.cap", 1'000'000));
  const double slope_target = ctx.cfg.get_double("tails.slope_target", -3.0);
  const double slope_tol = ctx.cfg.get_double("tails.slope_tol", 0.35);

  TailSample ts = sample_return_times(ctx.model, samples, cap, ctx.seed, ctx.workers);
  TailEstimate est = tail_histogram(ts.values, ts.censored, window_lo, window_hi);

  {
    CsvFile csv(ctx, "tails.csv", "n,survival,count");
    const double total = static_cast<double>(est.sample_size);
    for (const auto& [n, count] : est.survival) {
      csv.row(n, count / total, static_cast<long long>(count));
    }
  }

  std::int64_t g = 0;
  for (int r : ts.values) g = std::gcd(g, static_cast<std::int64_t>(r));

  json j;
  j["samples"] = est.sample_size;
  j["censored_count"] = est.censored;
  j["window"] = {window_lo, window_hi};
  j["slopes"] = {{"return_tail", slope_entry(est.slope, est.ci_lo, est.ci_hi)}};
  j["gcd_of_observed_R"] = g;
  const bool in_window = std::abs(est.slope - slope_target) <= slope_tol;
  const bool ci_ok = est.ci_hi - est.ci_lo <= 0.5;
  j["pass"] = {{"slope_in_window", in_window}, {"ci_narrow", ci_ok}};
  emit_summary(ctx, "tails", j);
  if (!ci_ok) return kExitInconclusive;
  return in_window ? kExitOk : kExitNumerical;
}

// ------------------------------------------------------------ correlations

int run_correlations(RunContext& ctx) {
  std::vector<int> n_list = ctx.cfg.get_int_list(
      "correlations.n_list",
      {1, 2, 3, 4, 6, 8, 10, 13, 16, 20, 25, 32, 40, 50, 64, 80, 100, 126, 159, 200});
  McConfig mc;
  mc.orbit_len = ctx.cfg.get_int("correlations.orbit_len", 40'000'000);
  mc.burn_in = ctx.cfg.get_int("correlations.burn_in", 100'000);
  mc.stride = ctx.cfg.get_int("correlations.stride", 1);
  mc.seed = ctx.seed;
  const double slope_max = ctx.cfg.get_double("correlations.slope_max", -1.6);

  Observable phi = obs_trig_u(1);
  Observable psi = obs_trig_u(2);

  TransferMatrix tm = TransferMatrix::build(ctx.model, tower_options_from(ctx.cfg));
  CorrelationSeries sp = correlation_spectral(tm, phi, psi, n_list);
  CorrelationSeries mcs = correlation_mc(ctx.model, phi, psi, n_list, mc);

  {
    CsvFile csv(ctx, "correlations.csv", "n,C_n,ci");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
      csv.row(n_list[i], mcs.c_values[i], mcs.ci[i]);
    }
  }
  {
    CsvFile csv(ctx, "correlations_spectral.csv", "n,C_n,ci");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
      csv.row(n_list[i], sp.c_values[i], 0.0);
    }
  }

  std::vector<double> xs(n_list.begin(), n_list.end());
  SlopeFit spectral_fit = fit_slope(xs, sp.c_values, 10, 200);

  int agree = 0, tested = 0;
  for (std::size_t i = 0; i < n_list.size() && tested < 10; i += 2, ++tested) {
    const double tol = 3.0 * mcs.ci[i] + 0.25 * std::abs(sp.c_values[i]) + 1e-4;
    if (std::abs(mcs.c_values[i] - sp.c_values[i]) <= tol) ++agree;
  }

  json j;
  j["tower_states"] = tm.state_count();
  j["slopes"] = {{"spectral_correlation",
                  slope_entry(spectral_fit.slope, spectral_fit.ci_lo, spectral_fit.ci_hi)}};
  j["agreement"] = {{"tested", tested}, {"within_ci", agree}};
  const bool slope_ok = spectral_fit.slope <= slope_max;
  const bool agree_ok = agree >= tested - 1;
  j["pass"] = {{"spectral_slope", slope_ok}, {"mc_agreement", agree_ok}};
  emit_summary(ctx, "correlations", j);
  if (!agree_ok) return kExitInconclusive;
  return slope_ok ? kExitOk : kExitNumerical;
}

// ---------------------------------------------------------------------- ld

int run_ld(RunContext& ctx) {
  LdConfig lc;
  lc.ensemble = ctx.cfg.get_int("ld.ensemble", 1'000'000);
  lc.burn_in = ctx.cfg.get_int("ld.burn_in", 100'000);
  lc.spacing = ctx.cfg.get_int("ld.stride", 37);
  lc.seed = ctx.seed;
  std::vector<double> eps_list = ctx.cfg.get_double_list("ld.eps_list", {0.05, 0.1});
  std::vector<int> n_list = ctx.cfg.get_int_list(
      "ld.n_list", {4, 6, 8, 11, 16, 22, 32, 45, 64, 91, 128, 181, 256, 362, 512, 724, 1024});
  const double slope_max = ctx.cfg.get_double("ld.slope_max", -1.5);
  const double floor = ctx.cfg.get_double("ld.noise_floor", 1e-4);

  Observable phi = obs_trig_u(1);
  auto series = large_deviation(ctx.model, phi, eps_list, n_list, lc);

  {
    CsvFile csv(ctx, "ld.csv", "n,eps,LD,ci");
    for (const LdSeries& s : series) {
      for (std::size_t i = 0; i < s.n_values.size(); ++i) {
        csv.row(s.n_values[i], s.eps, s.ld[i], s.ci[i]);
      }
    }
  }

  json j;
  j["ensemble"] = lc.ensemble;
  j["noise_floor"] = floor;
  bool any_fit = false;
  bool slope_ok = false;
  json slopes;
  for (const LdSeries& s : series) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < s.n_values.size(); ++i) {
      if (s.ld[i] >= floor) {
        xs.push_back(s.n_values[i]);
        ys.push_back(s.ld[i]);
      }
    }
    try {
      SlopeFit fit = fit_slope(xs, ys, 1, 1e9);
      slopes["ld_eps_" + fmt(s.eps)] = slope_entry(fit.slope, fit.ci_lo, fit.ci_hi);
      any_fit = true;
      slope_ok = slope_ok || fit.slope <= slope_max;
    } catch (const DegenerateWindow&) {
      slopes["ld_eps_" + fmt(s.eps)] = "insufficient points above the noise floor";
    }
  }
  j["slopes"] = slopes;
  j["pass"] = {{"ld_slope", slope_ok}};
  emit_summary(ctx, "ld", j);
  if (!any_fit) return kExitInconclusive;
  return slope_ok ? kExitOk : kExitNumerical;
}

// ----------------------------------------------------------------- spectra

int run_spectra(RunContext& ctx) {
  TransferMatrix tm = TransferMatrix::build(ctx.model, tower_options_from(ctx.cfg));
  InvariantDensity rho = tm.invariant_density(1e-10, 400'000);

  const bool export_matrix = ctx.cfg.get_int("tower.export_matrix", 0) != 0;
  if (export_matrix) {
    std::filesystem::create_directories(ctx.out_dir);
    std::ofstream out(ctx.out_dir + "/matrix.csv");
    tm.export_csv(out);
    char meta[128];
    std::snprintf(meta, sizeof meta, "# config_hash=%016llx seed=%llu",
                  static_cast<unsigned long long>(ctx.cfg.hash()),
                  static_cast<unsigned long long>(ctx.seed));
    out << meta << '\n';
  }
  {
    CsvFile csv(ctx, "density.csv", "state,kind,base_bin,r,level,mass");
    for (int s = 0; s < tm.state_count(); ++s) {
      auto info = tm.describe(s);
      std::string kind = info.censor ? "censor" : info.deep ? "deep" : "group";
      const int bb = info.group >= 0 ? tm.groups()[info.group].base_bin : -1;
      const int r = info.group >= 0 ? tm.groups()[info.group].r : -1;
      csv.row(s, kind, bb, r, info.level, rho.rho[s]);
    }
  }

  json j;
  j["states"] = tm.state_count();
  j["row_sum_error"] = tm.max_row_sum_error();
  j["residual"] = rho.residual;
  j["iterations"] = rho.iterations;
  j["density_floor"] = rho.floor_non_censored;
  j["lambda2_proxy"] = rho.lambda2_estimate;
  j["censored_mass"] = tm.censored_mass_fraction();
  j["pooled_deep_mass"] = tm.pooled_deep_fraction();
  const bool ok = tm.max_row_sum_error() <= 1e-10 && rho.residual <= 1e-10 &&
                  rho.floor_non_censored > 0.0;
  j["pass"] = {{"row_stochastic", tm.max_row_sum_error() <= 1e-10},
               {"fixed_point", rho.residual <= 1e-10},
               {"density_floor", rho.floor_non_censored > 0.0}};
  emit_summary(ctx, "spectra", j);
  return ok ? kExitOk : kExitNumerical;
}

// ------------------------------------------------------------------ couple

int run_couple(RunContext& ctx) {
  const double zeta = ctx.cfg.get_double("coupling.zeta", 3.0);
  const double k_margin = ctx.cfg.get_double("coupling.K_margin", 1.05);
  const double beta_override = ctx.cfg.get_double("coupling.beta", -1.0);
  const bool i0_auto = ctx.cfg.get_int("coupling.i0_auto", 1) != 0;
  const double rho_override = ctx.cfg.get_double("coupling.rho", -1.0);

  JacobianRegularity reg = jacobian_regularity_fit(ctx.model, 4000, ctx.seed ^ 0x600);
  const double beta = beta_override > 0.0 ? beta_override : reg.beta;
  CouplingConfig cc = derive_coupling_config(reg.c_f, beta, zeta, k_margin);
  if (rho_override > 0.0) {
    cc.rho = rho_override;
    cc.theta_reg = 1.05 * std::max(2.0 * std::exp(cc.K), cc.rho * std::exp(cc.K));
    cc.i0 = first_index_with_eps_below_one(cc);
    cc.validate();
  }

  TowerOptions copts;
  copts.quotient.bins_per_cell = static_cast<int>(ctx.cfg.get_int("coupling.bins_per_cell", 64));
  copts.quotient.j_max = static_cast<int>(ctx.cfg.get_int("coupling.j_max", 400));
  copts.base_bins = static_cast<int>(ctx.cfg.get_int("coupling.base_bins", 8));
  copts.r_detail = static_cast<int>(ctx.cfg.get_int("coupling.r_detail", 12));
  copts.max_level = static_cast<int>(ctx.cfg.get_int("coupling.max_level", 24));
  copts.tail_extension = 4096;
  const int horizon = static_cast<int>(ctx.cfg.get_int("coupling.horizon", copts.max_level + 4));
  CouplingGrid grid = CouplingGrid::build(ctx.model, copts, horizon);

  auto lam = grid.base_density([](double u) { return 1.0 + 0.5 * std::sin(6.2831853 * u); });
  auto lam2 = grid.base_density([](double u) { return 1.0 + 0.5 * std::cos(6.2831853 * u); });

  if (i0_auto) cc.i0 = std::max(cc.i0, first_index_with_eps_below_one(cc));

  grid.start(lam, lam2);
  const int extra_steps = static_cast<int>(ctx.cfg.get_int("coupling.steps", 12));
  json steps = json::array();
  bool decrease_ok = true, marginal_ok = true, monotone_ok = true;
  double prev_mass = grid.remaining_mass();
  for (int i = 0; i < cc.i0 + extra_steps; ++i) {
    CouplingStepReport rep = grid.density_step(cc);
    monotone_ok = monotone_ok && rep.remaining_mass <= prev_mass + 1e-12;
    prev_mass = rep.remaining_mass;
    if (rep.i >= cc.i0) {
      decrease_ok = decrease_ok && rep.decrease_ok;
      marginal_ok = marginal_ok && rep.marginal_residual <= 1e-10;
      steps.push_back({{"i", rep.i},
                       {"eps", rep.eps_i},
                       {"ratio_bound", rep.ratio_bound},
                       {"admissible_fraction", rep.admissible_fraction},
                       {"marginal_residual", rep.marginal_residual},
                       {"coupled_mass", rep.coupled_mass},
                       {"remaining_mass", rep.remaining_mass}});
    }
  }

  const std::int64_t pairs = ctx.cfg.get_int("coupling.pairs", 200'000);
  const long long cap = ctx.cfg.get_int("coupling.cap", 100'000);
  std::vector<int> n_values =
      ctx.cfg.get_int_list("coupling.n_list", {0, 1, 2, 4, 8, 16, 32, 64, 128, 256, 512});
  StartSampler sl = base_density_sampler(
      ctx.model, [](double u) { return 1.0 + 0.5 * std::sin(6.2831853 * u); }, 1.5);
  StartSampler sl2 = base_density_sampler(
      ctx.model, [](double u) { return 1.0 + 0.5 * std::cos(6.2831853 * u); }, 1.5);
  PairEnsembleStats stats = sample_pair_ensemble(ctx.model, sl, sl2, pairs, cap, n_values, 10,
                                                 ctx.seed ^ 0x601, ctx.workers);
  StartSampler leb = lebesgue_tower_sampler(ctx.model, static_cast<int>(cap));
  PairEnsembleStats ref = sample_pair_ensemble(ctx.model, leb, leb, pairs, cap, n_values, 10,
                                               ctx.seed ^ 0x602, ctx.workers);

  TvBoundSeries series = assemble_tv_bounds(grid.matrix(), stats, lam, lam2, n_values, cc);
  IncrementDomination dom = increment_domination_check(stats, ref);

  {
    CsvFile csv(ctx, "coupling.csv", "n,direct_tv,prop_c_bound,p_T_gt_n");
    for (std::size_t i = 0; i < n_values.size(); ++i) {
      csv.row(n_values[i], series.direct_tv[i], series.bound[i], series.p_t_gt_n[i]);
    }
  }

  std::vector<double> xs, ys;
  std::vector<long long> sorted = stats.t_samples;
  std::sort(sorted.begin(), sorted.end());
  for (int n = 4; n <= 500; ++n) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), static_cast<long long>(n));
    const double p = (static_cast<double>(sorted.end() - it) + stats.censored) / stats.samples;
    if (p > 0.0) {
      xs.push_back(n);
      ys.push_back(p);
    }
  }
  SlopeFit t_fit = fit_slope(xs, ys, 10, 300);
  const double t_target = -(zeta - 1.0);
  const bool t_ok = std::abs(t_fit.slope - t_target) <= 0.4;

  json j;
  j["coupling_config"] = {{"K", cc.K},
                          {"rho", cc.rho},
                          {"beta", cc.beta},
                          {"theta_reg", cc.theta_reg},
                          {"i0", cc.i0},
                          {"zeta", cc.zeta},
                          {"c_f_hat", cc.c_f_hat}};
  j["grid_states"] = grid.state_count();
  j["steps"] = steps;
  j["slopes"] = {{"t_survival", slope_entry(t_fit.slope, t_fit.ci_lo, t_fit.ci_hi)}};
  j["k1"] = series.k1;
  json domj = json::array();
  for (std::size_t i = 0; i < dom.i_values.size(); ++i) {
    domj.push_back({{"i", dom.i_values[i]}, {"k2", dom.k2[i]}, {"samples", dom.samples[i]}});
  }
  j["increment_domination"] = domj;
  j["pass"] = {{"pointwise_decrease", decrease_ok},
               {"marginal_matching", marginal_ok},
               {"mass_monotone", monotone_ok},
               {"t_slope_in_window", t_ok},
               {"direct_below_bound", series.dominated}};
  emit_summary(ctx, "couple", j);
  const bool ok = decrease_ok && marginal_ok && monotone_ok && t_ok && series.dominated;
  return ok ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for intermittent hyperbolic maps and their towers"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 1;
  double theta = -1.0;
  std::string out_dir = ".";
  int workers = 4;
  std::int64_t samples_override = -1;

  app.add_option("--config", config_path, "experiment file (key=value with [sections])");
  app.add_option("--seed", seed, "master seed (unsigned 64-bit)");
  app.add_option("--theta", theta, "override the intermittency exponent");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--workers", workers, "worker thread count");

  auto* c_validate = app.add_subcommand("validate", "structural and contraction validators");
  auto* c_tails = app.add_subcommand("tails", "return-time tail statistics");
  c_tails->add_option("--samples", samples_override, "sample count override");
  auto* c_corr = app.add_subcommand("correlations", "spectral and Monte-Carlo correlation decay");
  auto* c_ld = app.add_subcommand("ld", "large-deviation estimates");
  auto* c_spectra = app.add_subcommand("spectra", "tower discretization and invariant density");
  auto* c_couple = app.add_subcommand("couple", "coupling recursion and convergence bounds");
  auto* c_all = app.add_subcommand("all", "run every pipeline");

  CLI11_PARSE(app, argc, argv);

  try {
    RunContext ctx;
    if (!config_path.empty()) ctx.cfg = Config::parse_file(config_path);
    ctx.seed = ctx.cfg.has("run.seed") && seed == 1
                   ? static_cast<std::uint64_t>(ctx.cfg.get_int("run.seed", 1))
                   : seed;
    ctx.workers = ctx.cfg.has("run.workers") && workers == 4
                      ? static_cast<int>(ctx.cfg.get_int("run.workers", 4))
                      : workers;
    ctx.out_dir = out_dir != "." ? out_dir : ctx.cfg.get_string("run.out_dir", ".");
    ModelConfig mc = model_config_from(ctx.cfg);
    if (theta > 0.0) mc.theta = theta;
    ctx.cfg.set("model.theta", fmt(mc.theta));
    ctx.cfg.set("run.seed", std::to_string(ctx.seed));
    ctx.model = HyperbolicModel::build(mc);

    int rc = kExitOk;
    auto merge = [&rc](int r) { rc = std::max(rc, r); };
    if (c_validate->parsed()) merge(run_validate(ctx));
    if (c_tails->parsed()) merge(run_tails(ctx, samples_override));
    if (c_corr->parsed()) merge(run_correlations(ctx));
    if (c_ld->parsed()) merge(run_ld(ctx));
    if (c_spectra->parsed()) merge(run_spectra(ctx));
    if (c_couple->parsed()) merge(run_couple(ctx));
    if (c_all->parsed()) {
      merge(run_validate(ctx));
      merge(run_tails(ctx, samples_override));
      merge(run_correlations(ctx));
      merge(run_ld(ctx));
      merge(run_spectra(ctx));
      merge(run_couple(ctx));
    }
    return rc;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const InsufficientSamples& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DegenerateWindow& e) {
    std::fprintf(stderr, "inconclusive: %s\n", e.what());
    return kExitInconclusive;
  } catch (const DegenerateSupport& e) {
    std::fprintf(stderr, "inconclusive: %s\n", e.what());
    return kExitInconclusive;
  } catch (const Error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  }
}

// Microbenchmarks for the hot paths: map steps, the inverse solver, the
// discretization build, and operator application.

#include <benchmark/benchmark.h>

#include <vector>

#include "towerlab/intermittent.hpp"
#include "towerlab/model.hpp"
#include "towerlab/quotient.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/tower.hpp"

using namespace towerlab;

namespace {

const HyperbolicModel& model() {
  static HyperbolicModel m = HyperbolicModel::build(ModelConfig{});
  return m;
}

void BM_Step2D(benchmark::State& state) {
  const HyperbolicModel& m = model();
  Point2 p{1, 0.3713, 0.2191};
  Rng rng(7, 0);
  for (auto _ : state) {
    p = m.step(p);
    p.a += (rng.uniform() - 0.5) * 0x1.0p-48;
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(BM_Step2D);

void BM_QuotientStep(benchmark::State& state) {
  const HyperbolicModel& m = model();
  int cell = 1;
  double u = 0.3713;
  Rng rng(7, 0);
  for (auto _ : state) {
    int nc;
    double nu;
    m.quotient_step(cell, u, nc, nu);
    cell = nc;
    u = nu + (rng.uniform() - 0.5) * 0x1.0p-48;
    benchmark::DoNotOptimize(u);
  }
}
BENCHMARK(BM_QuotientStep);

void BM_PhiInverse(benchmark::State& state) {
  IntermittentParams p = IntermittentParams::with_theta(0.5);
  double b = 0.4321;
  for (auto _ : state) {
    benchmark::DoNotOptimize(phi_inverse(b, p));
  }
}
BENCHMARK(BM_PhiInverse);

void BM_ReturnBlock(benchmark::State& state) {
  const HyperbolicModel& m = model();
  double u = 0.3713;
  Rng rng(11, 0);
  for (auto _ : state) {
    ReturnResult r = quotient_return(m, u, 1'000'000);
    u = r.capped ? rng.uniform() : r.u_image + (rng.uniform() - 0.5) * 0x1.0p-48;
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_ReturnBlock);

void BM_ChainApply(benchmark::State& state) {
  const HyperbolicModel& m = model();
  static QuotientUlam q = QuotientUlam::build(m, QuotientUlamOptions{256, 2000});
  std::vector<double> x = q.lebesgue_mass(), y;
  for (auto _ : state) {
    q.apply(x, y);
    x.swap(y);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_ChainApply);

void BM_TowerApply(benchmark::State& state) {
  const HyperbolicModel& m = model();
  TowerOptions opts;
  opts.quotient.bins_per_cell = 256;
  opts.quotient.j_max = 2000;
  opts.base_bins = 16;
  opts.r_detail = 48;
  opts.max_level = 1024;
  static TransferMatrix tm = TransferMatrix::build(m, opts);
  std::vector<double> x = tm.lebesgue_mass(), y;
  for (auto _ : state) {
    tm.apply(x, y);
    x.swap(y);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_TowerApply);

}  // namespace

BENCHMARK_MAIN();

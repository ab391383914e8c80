// SPDX-License-Identifier: Apache-2.0
//
// OpenMP kernels against their serial references on the single-design
// scenario (N = 4, L = 8, N_s = 4, N_t = N_r = 4, K = 3, 5 x 30 clutter patches).

#include "dfrc/kernels.hpp"
#include "dfrc/scenario.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

struct Fixture {
  dfrc::ProblemInstance inst;
  dfrc::InnerCcmFactors factors;
  dfrc::VectorXcd w;
  dfrc::VectorXcd g;
  dfrc::MatrixXcd cols;

  Fixture() {
    const auto cfg = dfrc::load_scenario(std::filesystem::path(DFRC_CONFIG_DIR) / "single.json");
    const auto real = dfrc::draw_realization(cfg, dfrc::trial_seed(cfg.seed, 0));
    inst = dfrc::build_instance(cfg, real);
    factors = dfrc::clutter_factors(inst.clutter, inst.grid, inst.array);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    w.resize(inst.ops.beamformer_size());
    for (auto& x : w) x = {n(rng), n(rng)};
    g.resize(inst.ops.echo_size());
    for (auto& x : g) x = {n(rng), n(rng)};
    cols = dfrc::kernels::clutter_returns(inst.ops, w);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_ClutterReturns(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(dfrc::kernels::clutter_returns(f.inst.ops, f.w));
}
void BM_ClutterReturnsSerial(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(dfrc::kernels::clutter_returns_serial(f.inst.ops, f.w));
}
void BM_Backprojections(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(dfrc::kernels::clutter_backprojections(f.inst.ops, f.g));
}
void BM_BackprojectionsSerial(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(dfrc::kernels::clutter_backprojections_serial(f.inst.ops, f.g));
}
void BM_Gram(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(dfrc::kernels::gram(f.cols, 0.1));
}
void BM_GramSerial(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(dfrc::kernels::gram_serial(f.cols, 0.1));
}
void BM_BuildOperators(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(dfrc::build_tmr(f.factors, f.inst.symbols, f.inst.ops.dims));
}
void BM_BuildOperatorsSerial(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(dfrc::build_tmr_serial(f.factors, f.inst.symbols, f.inst.ops.dims));
}

}  // namespace

BENCHMARK(BM_ClutterReturns)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ClutterReturnsSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Backprojections)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BackprojectionsSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Gram)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GramSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BuildOperators)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildOperatorsSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

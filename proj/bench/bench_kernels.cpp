#include <benchmark/benchmark.h>

#include <random>

#include "qswitch/sim.hpp"

using namespace qswitch;

namespace {

const SwitchedSystem& example() {
  static const SwitchedSystem sys(
      {{1, (Mat(2, 2) << 0, -1, -1, -2).finished(), (Mat(2, 1) << 1, -1).finished(), (Mat(1, 2) << 1, 1).finished(),
        (Mat(1, 2) << -1, 2).finished()},
       {2, (Mat(2, 2) << 1, 2, -2, -1).finished(), (Mat(2, 1) << -2, 1).finished(), (Mat(1, 2) << 1, -1).finished(),
        (Mat(1, 2) << 1, -1).finished()}},
      0.5);
  return sys;
}

CertParams params(int grid) {
  CertParams p;
  p.N = 11;
  p.grid_points = grid;
  p.per_mode[1] = {Mat::Identity(2, 2), 1.124, 47.0};
  p.per_mode[2] = {Mat::Identity(2, 2), 1.09, 80.0};
  return p;
}

Exec exec_of(const benchmark::State& s) { return s.range(0) ? Exec::Parallel : Exec::Serial; }

void BM_TauGridMaxima(benchmark::State& state) {
  const PairKernel kern(example(), 1, 2);
  const int grid = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(tau_grid_maxima(kern, 1, grid, 0.5, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * (grid + 1));
}
BENCHMARK(BM_TauGridMaxima)->ArgsProduct({{0, 1}, {1024, 8192}})->Unit(benchmark::kMillisecond);

void BM_Certify(benchmark::State& state) {
  const CertParams p = params(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(certify(example(), p, exec_of(state)));
}
BENCHMARK(BM_Certify)->ArgsProduct({{0, 1}, {1024, 4096}})->Unit(benchmark::kMillisecond);

void BM_RunBatch(benchmark::State& state) {
  const Certificate cert = certify(example(), params(1024));
  const QuantizerConfig q{11, 0.1, 1.0};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<BatchJob> jobs;
  for (int i = 0; i < state.range(1); ++i) {
    jobs.push_back({(Vec(2) << u(rng), u(rng)).finished(),
                    SignalGenerator{rng(), {1, cert.tau_a_min}, 2.6, 40.0, std::nullopt}, 40.0});
  }
  for (auto _ : state) benchmark::DoNotOptimize(run_batch(example(), q, cert, jobs, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_RunBatch)->ArgsProduct({{0, 1}, {256}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

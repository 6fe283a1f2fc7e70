#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "cmkerr/steady_state.hpp"

namespace {

void BM_SolveCubic(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-200, 200), g(1, 20), c(-1e6, 1e6);
  std::vector<std::array<double, 3>> draws(1024);
  for (auto& x : draws) x = {d(rng), g(rng), c(rng)};
  size_t i = 0;
  for (auto _ : state) {
    const auto& x = draws[i++ & 1023];
    benchmark::DoNotOptimize(cmkerr::solve_shift_cubic(x[0], x[1], x[2]));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SolveCubic);

void BM_HysteresisSweep(benchmark::State& state) {
  const double step = 200.0 / static_cast<double>(state.range(0));
  const auto grid = cmkerr::detuning_grid(-100, 100, step, cmkerr::SweepDirection::Up);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cmkerr::hysteresis_sweep(11.6, -2018.4, grid, cmkerr::SweepDirection::Up));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(grid.size()));
}
BENCHMARK(BM_HysteresisSweep)->Arg(400)->Arg(4000);

}  // namespace

#include <benchmark/benchmark.h>

#include "cmkerr/config.hpp"
#include "cmkerr/pipeline.hpp"
#include "cmkerr/spectrum.hpp"

namespace {

using namespace cmkerr;

void BM_SynthesizeMap(benchmark::State& state) {
  const RunConfig rc = default_run_config();
  const auto currents = currents_for_detuning(rc.system.calibration, DriveTarget::Kittel, 9800.0, -100, 100, 2.0);
  const auto probe = linear_grid(9550.0, 10350.0, 0.1);
  SynthesisOptions o;
  o.workers = static_cast<unsigned>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(synthesize_map(rc.system, currents, probe, rc.drive, o));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(currents.size() * probe.size()));
}
BENCHMARK(BM_SynthesizeMap)->Arg(1)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_FindDips(benchmark::State& state) {
  const RunConfig rc = default_run_config();
  const std::vector<double> current{current_for_frequency(rc.system.calibration, 9800.0)};
  const auto map = synthesize_map(rc.system, current, linear_grid(9550.0, 10350.0, 0.1), std::nullopt);
  for (auto _ : state) benchmark::DoNotOptimize(find_dips(map.trace(0)));
}
BENCHMARK(BM_FindDips)->Unit(benchmark::kMicrosecond);

void BM_AnalyzeMap(benchmark::State& state) {
  RunConfig rc = default_run_config();
  DriveConfig drive = rc.drive;
  const auto currents = currents_for_detuning(rc.system.calibration, DriveTarget::Kittel, 9800.0, -100, 100, 1.0);
  const auto map = synthesize_map(rc.system, currents, linear_grid(9550.0, 10350.0, 0.1), drive, {4, 0.0, 0});
  for (auto _ : state) benchmark::DoNotOptimize(analyze_map(map, rc, drive, 4));
}
BENCHMARK(BM_AnalyzeMap)->UseRealTime()->Unit(benchmark::kMillisecond);

}  // namespace

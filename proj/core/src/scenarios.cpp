#include "cmkerr/scenarios.hpp"

#include <fmt/format.h>

namespace cmkerr {
namespace {

Scenario make(std::string name, RunConfig cfg, DriveTarget target, double frequency, double dlo,
              double dhi) {
  Scenario s;
  s.name = std::move(name);
  s.drive = cfg.drive;
  s.drive.target = target;
  s.drive.frequency = frequency;
  s.drive.power_dbm = 25.0;
  cfg.drive = s.drive;
  cfg.drive_enabled = true;
  cfg.sweep.delta_min = dlo;
  cfg.sweep.delta_max = dhi;
  s.currents = currents_for_detuning(cfg.system.calibration, target, frequency, dlo, dhi,
                                     cfg.sweep.delta_step);
  s.probe = linear_grid(cfg.sweep.probe_min, cfg.sweep.probe_max, cfg.sweep.probe_step);
  s.true_ratio = cfg.system.cross_ratio(target);
  s.config = std::move(cfg);
  return s;
}

}  // namespace

RunConfig with_kerr_ratios(RunConfig cfg, double cross_over_kittel, double cross_over_hms) {
  const double ks = cfg.system.kerr.k_self_kittel;
  cfg.system.kerr.k_cross = cross_over_kittel * ks;
  cfg.system.kerr.k_self_hms = cfg.system.kerr.k_cross / cross_over_hms;
  return cfg;
}

Scenario kittel_drive_scenario() {
  return make("kittel-9800", default_run_config(), DriveTarget::Kittel, 9800.0, -100.0, 100.0);
}

Scenario hms_drive_scenario() {
  return make("hms-10140", default_run_config(), DriveTarget::HMS, 10140.0, -60.0, 80.0);
}

std::vector<Scenario> drive_frequency_scan() {
  const RunConfig cfg = with_kerr_ratios(default_run_config(), 2.49, 0.53);
  std::vector<Scenario> out;
  for (double f : {9760.0, 9780.0, 9800.0, 9820.0, 9840.0}) {
    out.push_back(make(fmt::format("kittel-{}", f), cfg, DriveTarget::Kittel, f, -100.0, 100.0));
  }
  for (double f : {10120.0, 10130.0, 10140.0, 10150.0, 10160.0}) {
    out.push_back(make(fmt::format("hms-{}", f), cfg, DriveTarget::HMS, f, -60.0, 80.0));
  }
  return out;
}

ScenarioRun run_scenario(const Scenario& s, unsigned workers) {
  ScenarioRun r;
  SynthesisOptions so;
  so.workers = workers;
  r.map = synthesize_map(s.config.system, s.currents, s.probe, s.drive, so);
  r.analysis = analyze_map(r.map, s.config, s.drive, workers);
  return r;
}

}  // namespace cmkerr

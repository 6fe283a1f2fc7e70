#pragma once

// Calibrated synthetic datasets: the two single-drive sweeps and the drive-frequency scan.

#include <string>
#include <vector>

#include "cmkerr/config.hpp"
#include "cmkerr/pipeline.hpp"
#include "cmkerr/spectrum.hpp"

namespace cmkerr {

struct Scenario {
  std::string name;
  RunConfig config;
  DriveConfig drive;
  std::vector<double> currents;
  std::vector<double> probe;
  double true_ratio = 0.0;  // K_cross / K_self of the driven mode
};

/// Kittel drive at 9.8 GHz, 25 dBm; max |Delta_ks| = 60 MHz, K_cross/K_ks = 2.5.
Scenario kittel_drive_scenario();
/// HMS drive at 10.14 GHz, 25 dBm; K_cross/K_hs = 0.5.
Scenario hms_drive_scenario();
/// Five Kittel and five HMS drive frequencies with K_cross/K_ks = 2.49, K_cross/K_hs = 0.53.
std::vector<Scenario> drive_frequency_scan();

/// Same system with the Kerr ratios set explicitly (self Kittel coefficient kept).
RunConfig with_kerr_ratios(RunConfig cfg, double cross_over_kittel, double cross_over_hms);

struct ScenarioRun {
  SpectrumMap map;
  AnalysisResult analysis;
};

ScenarioRun run_scenario(const Scenario& s, unsigned workers = 1);

}  // namespace cmkerr

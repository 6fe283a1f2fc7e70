#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cmkerr/extract.hpp"
#include "cmkerr/fit.hpp"
#include "cmkerr/model.hpp"

namespace cmkerr {

struct SweepSettings {
  double delta_min = -100.0;  // MHz, driven-mode detuning range
  double delta_max = 100.0;
  double delta_step = 0.5;
  double probe_min = 9550.0;  // MHz
  double probe_max = 10350.0;
  double probe_step = 0.1;
  /// Current grid for undriven maps, A. Unset means the detuning range
  /// mapped through the Kittel branch at the configured drive frequency.
  std::optional<double> current_min;
  std::optional<double> current_max;
  std::optional<double> current_step;
};

struct AnalysisSettings {
  DipOptions dips;
  AssignOptions assign;
  BackgroundOptions background;
  RatioFitOptions ratio;
  CurveFitOptions curve;
  /// Unset: infer the acquisition direction from the control order.
  std::optional<SweepDirection> direction;
  bool exclude_near_cavity = true;
  /// Map each magnon dip back to the mode frequency that produces it in the
  /// system model; removes the offset of dispersive features on the cavity tail.
  bool dip_bias_correction = true;
  double dispersive_threshold = 10.0;
  /// Warn when a magnon branch lacks a dip in more than this fraction of traces.
  double max_missing_fraction = 0.25;
};

struct RunConfig {
  SystemConfig system;
  DriveConfig drive;  // efficiencies plus an optional default drive
  bool drive_enabled = false;
  SweepSettings sweep;
  AnalysisSettings analysis;
};

/// Built-in calibration used when no config file is given.
RunConfig default_run_config();

/// Parses a TOML document. Unknown keys, wrong types and invalid values throw
/// UsageError. `overrides` are "dotted.key=value" strings applied before validation.
RunConfig parse_run_config(std::string_view toml_text, const std::vector<std::string>& overrides = {},
                           const std::string& source = "config");
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});
/// Defaults plus overrides, no file.
RunConfig run_config_from_overrides(const std::vector<std::string>& overrides);

/// Every accepted dotted key.
std::vector<std::string> config_keys();

/// Canonical JSON of the fully resolved configuration.
std::string resolved_config_json(const RunConfig& cfg);

/// Material keys a derivation needs.
std::vector<std::string> material_required_keys();
/// "none" -> nullopt; "kittel:9800MHz:25dBm" / "hms:10.14GHz:25dBm". Efficiencies
/// are copied from `base`.
std::optional<DriveConfig> parse_drive_spec(std::string_view spec, const DriveConfig& base);
std::string format_drive_spec(const std::optional<DriveConfig>& drive);

struct GridSpec {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.0;
};

/// "lo:hi:step"; throws UsageError. A zero-size grid (hi < lo) is rejected.
GridSpec parse_grid_spec(std::string_view spec);

}  // namespace cmkerr

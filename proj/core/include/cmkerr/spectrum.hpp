#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cmkerr/model.hpp"
#include "cmkerr/steady_state.hpp"

namespace cmkerr {

/// Probe transmission of the cavity dressed by both magnon modes at the given
/// effective (Kerr-shifted) magnon frequencies.
std::complex<double> s21_linear(double omega, const SystemConfig& cfg, double omega_k_eff,
                                double omega_h_eff);

struct ProbeTrace {
  double control = 0.0;  // coil current, A
  std::span<const double> probe_frequencies;
  std::span<const double> s21_sq;
};

/// Ground truth recorded by the synthesizer for one trace.
struct TraceState {
  double omega_k_bare = 0.0;
  double omega_h_bare = 0.0;
  double omega_k_eff = 0.0;
  double omega_h_eff = 0.0;
  double delta = 0.0;          // bare driven-mode detuning from the drive
  double driven_shift = 0.0;   // selected root
  int root_count = 1;
};

struct SpectrumMap {
  std::vector<double> controls;
  std::vector<double> probe;
  std::vector<double> data;  // row-major, controls.size() x probe.size()
  std::optional<DriveConfig> drive;
  std::vector<TraceState> states;  // empty when read back from disk

  size_t n_controls() const { return controls.size(); }
  size_t n_probe() const { return probe.size(); }
  ProbeTrace trace(size_t i) const;
  std::span<const double> row(size_t i) const;
  std::span<double> row(size_t i);
};

struct SynthesisOptions {
  unsigned workers = 1;
  /// Relative Gaussian noise on |S21|^2; 0 disables. Seeded per trace.
  double noise = 0.0;
  std::uint64_t seed = 0;
};

/// Currents must be strictly monotone; the sweep direction follows their order.
/// Throws DomainError (with the offending current) on invalid input.
SpectrumMap synthesize_map(const SystemConfig& cfg, std::span<const double> currents,
                           std::span<const double> probe, const std::optional<DriveConfig>& drive,
                           const SynthesisOptions& opts = {});

/// Steady-state sweep of the driven mode over the given currents (ordered as given).
SweepResult drive_sweep(const SystemConfig& cfg, std::span<const double> currents,
                        const DriveConfig& drive);

std::vector<double> linear_grid(double lo, double hi, double step);

/// Currents at which the drive target's bare detuning runs from delta_lo to delta_hi.
std::vector<double> currents_for_detuning(const FieldCalibration& cal, DriveTarget target,
                                          double drive_frequency, double delta_lo,
                                          double delta_hi, double delta_step);

}  // namespace cmkerr

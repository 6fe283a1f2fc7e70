#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "cmkerr/model.hpp"
#include "cmkerr/spectrum.hpp"

namespace cmkerr {

struct Dip {
  double frequency = 0.0;  // MHz, parabolic sub-grid estimate
  double depth = 0.0;      // prominence on the detrended dB trace
  double width = 0.0;      // full width at half prominence, MHz
  ModeLabel label = ModeLabel::Unassigned;
};

struct DipSet {
  double control = 0.0;
  std::vector<Dip> dips;  // ascending frequency
};

struct DipOptions {
  /// Local-quadratic baseline window, MHz.
  double baseline_window = 20.0;
  /// Prominence threshold in dB; unset means 3x the MAD of the detrended trace.
  std::optional<double> min_prominence;
  /// Absolute lower bound on the threshold, dB. Keeps flat traces empty.
  double prominence_floor = 1e-3;
  /// Local-quadratic smoothing of the dB trace before the search, MHz; 0 disables.
  double smooth_window = 0.0;
};

/// Local-quadratic (Savitzky-Golay order 2) smoothing over an odd window of
/// samples; the ends use the polynomial fitted to the first/last window.
std::vector<double> quadratic_baseline(std::span<const double> y, size_t window);

/// Anti-resonances of |S21|^2: local minima of the dB trace after removing a
/// local-quadratic baseline, filtered by topographic prominence.
DipSet find_dips(const ProbeTrace& trace, const DipOptions& opts = {});
DipSet find_dips(const ProbeTrace& trace, double min_prominence);

struct AssignOptions {
  double tolerance = 200.0;        // MHz around the calibration branch
  double miss_penalty = 2.0;       // per trace without a dip on the path
  double continuity_scale = 5.0;   // MHz of shift change per trace costing one unit
  double jump_penalty = 20.0;      // cap on the continuity cost of one step
  /// Cost of a dip relative to the strongest dip within `neighbourhood`:
  /// prominence_weight * (1 - depth / strongest). Above miss_penalty, dips under
  /// a third of a neighbour's prominence are never preferred over a miss.
  double prominence_weight = 3.0;
  double neighbourhood = 20.0;     // MHz
  // strongest is never below relevance_floor * deepest usable dip of the trace
  double relevance_floor = 0.1;
  /// Drop candidates with a deeper usable candidate within `neighbourhood`.
  bool one_per_neighbourhood = true;
  /// Narrower dips are probe noise, not resonances (MHz, full width at half prominence).
  double min_width = 1.0;
  /// Cost per MHz of distance from the calibration branch. Kerr shifts move
  /// the true dip far from it, so this is only a tie-breaker.
  double shift_weight = 0.0;
  size_t max_gap = 200;            // traces a path may skip in one step
  /// Near-cavity exclusion: dips within band of the cavity never get a magnon label.
  /// The band is centred on the cavity dressed by both magnon branches (bare
  /// calibration), since a coupled branch can pull it by several linewidths.
  std::optional<double> cavity_frequency;
  double cavity_g_k = 0.0;
  double cavity_g_h = 0.0;
  double exclusion_kittel = 0.0;
  double exclusion_hms = 0.0;
  /// Window for the Cavity label around cavity_frequency.
  double cavity_window = 10.0;
};

/// Cavity-like normal mode of the coupled three-mode system without
/// magnon-magnon coupling: the eigenvalue with the largest cavity share.
double dressed_cavity_frequency(double omega_c, double omega_k, double omega_h, double g_k,
                                double g_h);

struct AssignResult {
  std::vector<DipSet> sets;
  size_t assigned_kittel = 0;
  size_t assigned_hms = 0;
  size_t assigned_cavity = 0;
  size_t unassigned = 0;
  size_t ambiguous = 0;        // dips claimed by both magnon branches
  size_t excluded = 0;         // magnon-branch candidates dropped near the cavity
};

/// Labels dips by following each magnon branch through the sweep as a
/// minimum-cost path: shifts from the calibration branch should change
/// smoothly, strong dips are preferred, missing traces cost a fixed penalty.
/// Sets must be ordered by control.
AssignResult assign_modes(std::vector<DipSet> sets, const FieldCalibration& cal,
                          const AssignOptions& opts = {});

/// Exclusion half-width 2g + kappa + linewidth of the given magnon mode.
double exclusion_half_width(const SystemConfig& cfg, ModeLabel mode);

struct ControlPoint {
  double control = 0.0;
  double value = 0.0;
};

/// (control, dip frequency) for every dip carrying `label`.
std::vector<ControlPoint> branch_points(std::span<const DipSet> sets, ModeLabel label);

struct BackgroundOptions {
  double reference_fraction = 0.1;     // each end of the sweep
  std::optional<double> sweep_min;     // defaults to the points' extent
  std::optional<double> sweep_max;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  size_t n_reference = 0;
  bool one_sided = false;  // only one reference end populated; slope forced to 0
};

LinearFit fit_reference_line(std::span<const ControlPoint> points, const BackgroundOptions& opts = {});

/// value - (a control + b) with the line fitted on the reference segment.
/// Throws DomainError when fewer than 3 points fall in the segment.
std::vector<ControlPoint> subtract_linear_background(std::span<const ControlPoint> points,
                                                     const BackgroundOptions& opts = {});

struct ShiftPoint {
  double delta = 0.0;  // MHz
  double shift = 0.0;  // MHz
};

struct ShiftCurve {
  ModeLabel label = ModeLabel::Unassigned;
  std::vector<ShiftPoint> points;
};

/// delta = omega_axis(control) - omega_d with the bare branch of `axis_mode`;
/// the curve is labelled `label` (defaults to axis_mode).
ShiftCurve to_detuning_axis(std::span<const ControlPoint> points, const FieldCalibration& cal,
                            double drive_frequency, ModeLabel axis_mode,
                            std::optional<ModeLabel> label = std::nullopt);

void write_shift_curves_csv(std::ostream& os, std::span<const ShiftCurve> curves,
                            std::uint64_t manifest_hash);
std::vector<ShiftCurve> read_shift_curves_csv(std::istream& is);

}  // namespace cmkerr

#pragma once

// Mean-field steady state of a driven Kerr mode:
//   ((Delta + delta)^2 + (gamma/2)^2) * Delta = cP
// with Delta the Kerr shift, delta the bare detuning from the drive, gamma the
// FWHM linewidth and cP the drive-efficiency product (MHz^3, carries the Kerr sign).

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace cmkerr {

struct ShiftSolution {
  double delta = 0.0;
  int count = 0;                       // 1, 3, or 2 when a double root was merged
  std::array<double, 3> roots{};       // ascending, first `count` valid
  std::array<bool, 3> stable{};
  int selected = -1;                   // index into roots, -1 when no sweep chose one

  std::span<const double> real_roots() const { return {roots.data(), static_cast<size_t>(count)}; }
  double selected_shift() const;
};

/// Cubic residual ((D + delta)^2 + (gamma/2)^2) D - cP in MHz^3.
double shift_residual(double shift, double delta, double gamma, double cp);

/// All real roots, sorted, stability classified, no branch selected.
/// Throws DomainError for gamma <= 0 or non-finite input.
ShiftSolution solve_shift_cubic(double delta, double gamma, double cp);

/// {stable} for one root; {stable, unstable, stable} for three; a merged double
/// root is marginal and flagged unstable.
ShiftSolution classify_stability(ShiftSolution sol);

double cross_shift(double driven_shift, double ratio);

/// Delta / (2K). Throws DomainError when K == 0 or the signs disagree.
double excitation_number(double shift, double kerr);

enum class SweepDirection { Up, Down };

std::string_view to_string(SweepDirection d);
SweepDirection sweep_direction_from_string(std::string_view text);

struct SweepPoint {
  double control = 0.0;
  ShiftSolution solution;
  double cross_shift = 0.0;
  double excitations = 0.0;  // NaN when no self-Kerr coefficient was supplied
};

struct SweepJump {
  size_t index = 0;          // first point on the new branch
  double position = 0.0;     // detuning midway between the two points
  double from_shift = 0.0;
  double to_shift = 0.0;
};

struct SweepResult {
  SweepDirection direction = SweepDirection::Up;
  std::vector<SweepPoint> points;
  std::vector<SweepJump> jumps;
};

struct SweepOptions {
  double cross_ratio = 0.0;  // K_cross / K_self of the driven mode
  double self_kerr = 0.0;    // 0 means excitations are not computed
};

/// Follows the occupied branch along `deltas`, which must be monotone in the
/// sweep direction. Starts on the small-|Delta| branch.
SweepResult hysteresis_sweep(double gamma, double cp, std::span<const double> deltas,
                             SweepDirection direction, const SweepOptions& opts = {});

/// Same, with a separate control value (e.g. coil current) recorded per point.
SweepResult hysteresis_sweep(double gamma, double cp, std::span<const double> deltas,
                             std::span<const double> controls, SweepDirection direction,
                             const SweepOptions& opts = {});

/// Evenly spaced grid from lo to hi (inclusive), ordered for `direction`.
std::vector<double> detuning_grid(double lo, double hi, double step, SweepDirection direction);

/// Integral of |Delta_up - Delta_down| d(delta) over the shared grid.
double hysteresis_loop_area(const SweepResult& up, const SweepResult& down);

struct BistableWindow {
  bool exists = false;
  double lo = 0.0;
  double hi = 0.0;
};

/// Detuning interval with three real roots, from the discriminant; closed form.
BistableWindow bistable_window(double gamma, double cp);

/// |cP| above which a three-root window exists: (gamma/2)^3 * 8 / (3 sqrt 3).
double bistability_threshold(double gamma);

void write_sweep_csv(std::ostream& os, const SweepResult& r, std::uint64_t manifest_hash = 0);

}  // namespace cmkerr

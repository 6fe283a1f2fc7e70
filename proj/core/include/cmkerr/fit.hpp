#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmkerr/error.hpp"
#include "cmkerr/extract.hpp"
#include "cmkerr/model.hpp"
#include "cmkerr/steady_state.hpp"

namespace cmkerr {

struct FitResult {
  double cp_estimate = 0.0;   // MHz^3
  double ratio = 0.0;         // K_cross / K_self of the driven mode, 0 when not fitted
  double residual_rms = 0.0;  // MHz
  size_t n_points = 0;
  double drive_frequency = 0.0;
  size_t evaluations = 0;
};

/// Fit failure that still carries the best estimate found.
class FitError : public NumericalError {
 public:
  FitError(const std::string& what, double best_cp, double residual_rms)
      : NumericalError(what), best_cp(best_cp), residual_rms(residual_rms) {}
  double best_cp;
  double residual_rms;
};

struct CurveFitOptions {
  SweepDirection direction = SweepDirection::Up;
  size_t coarse_points = 240;
  double relative_tolerance = 1e-9;
  size_t max_iterations = 200;
  /// Data gaps wider than this get intermediate model points so the branch
  /// is followed continuously (MHz).
  double model_step = 0.5;
};

/// Selected-branch model at the curve's detunings, swept in `direction`.
std::vector<double> model_shifts(std::span<const ShiftPoint> points, double gamma, double cp,
                                 SweepDirection direction, double model_step = 0.5);

/// Least-squares cP for Delta(delta; gamma, cP) on the sweep-selected branch.
/// Coarse scan, golden-section search, then a parabolic step.
FitResult fit_driven_curve(const ShiftCurve& curve, double gamma, const CurveFitOptions& opts = {});

struct RatioFitOptions {
  size_t min_points = 3;
  /// Largest spacing of undriven samples to interpolate across, MHz.
  double max_gap = 2.0;
  /// Refuse when the driven curve never exceeds this magnitude, MHz.
  double min_signal = 2.0;
};

struct RatioFit {
  double ratio = 0.0;
  size_t n_pairs = 0;
  double residual_rms = 0.0;
};

/// Slope through the origin of undriven vs driven shift on the overlap of
/// the two detuning ranges (undriven interpolated onto driven detunings).
RatioFit fit_ratio(const ShiftCurve& driven, const ShiftCurve& undriven,
                   const RatioFitOptions& opts = {});

enum class RatioFamily { Kittel, HMS };

struct RatioEntry {
  double drive_frequency = 0.0;
  RatioFamily family = RatioFamily::Kittel;
  double ratio = 0.0;  // K_cross/K_ks for Kittel drives, K_cross/K_hs for HMS drives
};

struct FamilyStats {
  size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, NaN for n < 2
  bool stable = false;
};

struct RatioReport {
  std::vector<RatioEntry> entries;
  FamilyStats kittel;
  FamilyStats hms;
  double stability_threshold = 0.1;
};

RatioReport ratio_stability_report(std::span<const RatioEntry> entries,
                                   double stability_threshold = 0.1);

/// (K_cross/K_ks) / (K_cross/K_hs) = K_hs/K_ks.
double derived_self_kerr_ratio(double ratio_kittel, double ratio_hms);

std::string fit_result_json(const FitResult& r, int indent = 2);
std::string ratio_report_json(const RatioReport& r, int indent = 2);
void write_fit_table(std::ostream& os, const FitResult& r);
void write_ratio_table(std::ostream& os, const RatioReport& r);

}  // namespace cmkerr

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cmkerr/config.hpp"
#include "cmkerr/extract.hpp"
#include "cmkerr/fit.hpp"
#include "cmkerr/spectrum.hpp"

namespace cmkerr {

struct AnalysisResult {
  DriveConfig drive;
  SweepDirection direction = SweepDirection::Up;
  AssignResult assignment;
  ShiftCurve driven;
  ShiftCurve undriven;
  FitResult fit;                      // fit.ratio is 0 when the ratio fit was refused
  std::optional<RatioFit> ratio;
  std::string ratio_error;
  size_t missing_kittel = 0;          // traces without a Kittel dip
  size_t missing_hms = 0;
  std::vector<std::string> warnings;
};

/// Dips of every trace, computed in parallel.
std::vector<DipSet> find_all_dips(const SpectrumMap& map, const DipOptions& opts, unsigned workers);

/// Assignment options for a system: cavity exclusion bands and tolerance.
AssignOptions assignment_options(const RunConfig& cfg);

/// Dips -> labels -> background subtraction -> detuning axis -> cP fit and ratio fit.
/// Throws NumericalError when the driven curve cannot be fitted.
AnalysisResult analyze_map(const SpectrumMap& map, const RunConfig& cfg, const DriveConfig& drive,
                           unsigned workers = 1);

/// delta_MHz,shift_MHz,model_MHz,mode rows for the driven curve and its fitted model,
/// plus the undriven curve with ratio * model.
void write_fit_curve_csv(std::ostream& os, const AnalysisResult& a, double gamma,
                         std::uint64_t manifest_hash);

}  // namespace cmkerr

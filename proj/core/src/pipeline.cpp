#include "cmkerr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>

#include <fmt/format.h>

#include "cmkerr/error.hpp"
#include "cmkerr/parallel.hpp"

namespace cmkerr {

std::vector<DipSet> find_all_dips(const SpectrumMap& map, const DipOptions& opts, unsigned workers) {
  std::vector<DipSet> sets(map.n_controls());
  parallel_for(map.n_controls(), workers, [&](size_t i) { sets[i] = find_dips(map.trace(i), opts); });
  return sets;
}

AssignOptions assignment_options(const RunConfig& cfg) {
  AssignOptions o = cfg.analysis.assign;
  o.neighbourhood = cfg.analysis.dips.baseline_window;
  if (cfg.analysis.exclude_near_cavity) {
    o.cavity_frequency = cfg.system.cavity.bare_frequency;
    o.cavity_g_k = cfg.system.couplings.g_k;
    o.cavity_g_h = cfg.system.couplings.g_h;
    o.exclusion_kittel = exclusion_half_width(cfg.system, ModeLabel::Kittel);
    o.exclusion_hms = exclusion_half_width(cfg.system, ModeLabel::HMS);
    o.cavity_window = o.exclusion_hms;
  }
  return o;
}

namespace {

// Where find_dips puts the `label` feature when that mode sits at `omega`,
// evaluated on the map's own probe samples around `near`.
std::optional<double> model_dip(const SystemConfig& sys, ModeLabel label, double omega, double other,
                                double near, std::span<const double> probe, const DipOptions& dopts) {
  const double half = 1.5 * dopts.baseline_window;
  const auto first = std::lower_bound(probe.begin(), probe.end(), near - half);
  const auto last = std::upper_bound(probe.begin(), probe.end(), near + half);
  if (last - first < 5) return std::nullopt;
  const std::span<const double> f(first, last);
  std::vector<double> s(f.size());
  const double wk = label == ModeLabel::Kittel ? omega : other;
  const double wh = label == ModeLabel::Kittel ? other : omega;
  for (size_t i = 0; i < f.size(); ++i) s[i] = std::norm(s21_linear(f[i], sys, wk, wh));
  DipOptions o = dopts;
  o.min_prominence = o.prominence_floor;
  const DipSet ds = find_dips(ProbeTrace{0.0, f, s}, o);
  std::optional<double> best;
  for (const Dip& d : ds.dips) {
    if (!best || std::abs(d.frequency - near) < std::abs(*best - near)) best = d.frequency;
  }
  return best;
}

double corrected_frequency(const SystemConfig& sys, ModeLabel label, double dip, double other,
                           std::span<const double> probe, const DipOptions& dopts) {
  double omega = dip;
  for (int it = 0; it < 6; ++it) {
    const auto m = model_dip(sys, label, omega, other, dip, probe, dopts);
    // The model has no such dip (or it wandered off): keep the raw position.
    if (!m || std::abs(*m - dip) > 0.5 * dopts.baseline_window) return dip;
    const double err = dip - *m;
    omega += err;
    if (std::abs(err) < 1e-4) break;
  }
  return omega;
}

std::vector<ControlPoint> corrected_branch_points(const std::vector<DipSet>& sets, ModeLabel label,
                                                  const RunConfig& cfg, std::span<const double> probe,
                                                  unsigned workers) {
  const ModeLabel other_label = label == ModeLabel::Kittel ? ModeLabel::HMS : ModeLabel::Kittel;
  std::vector<std::optional<ControlPoint>> slots(sets.size());
  parallel_for(sets.size(), workers, [&](size_t i) {
    const DipSet& set = sets[i];
    const Dip* mine = nullptr;
    double other = mode_frequency_at_current(cfg.system.calibration, other_label, set.control);
    for (const Dip& d : set.dips) {
      if (d.label == label) mine = &d;
      if (d.label == other_label) other = d.frequency;
    }
    if (mine == nullptr) return;
    slots[i] = ControlPoint{set.control, corrected_frequency(cfg.system, label, mine->frequency, other,
                                                             probe, cfg.analysis.dips)};
  });
  std::vector<ControlPoint> out;
  for (const auto& s : slots) {
    if (s) out.push_back(*s);
  }
  return out;
}

}  // namespace

AnalysisResult analyze_map(const SpectrumMap& map, const RunConfig& cfg, const DriveConfig& drive,
                           unsigned workers) {
  if (map.n_controls() < 5) throw DomainError("analysis needs at least 5 traces");
  AnalysisResult out;
  out.drive = drive;
  const bool increasing = map.controls.back() > map.controls.front();
  out.direction = cfg.analysis.direction.value_or(increasing ? SweepDirection::Up : SweepDirection::Down);

  // The tracker expects ascending controls; keep acquisition order otherwise.
  std::vector<DipSet> sets = find_all_dips(map, cfg.analysis.dips, workers);
  if (!increasing) std::reverse(sets.begin(), sets.end());
  out.assignment = assign_modes(std::move(sets), cfg.system.calibration, assignment_options(cfg));
  if (!increasing) std::reverse(out.assignment.sets.begin(), out.assignment.sets.end());

  for (const auto& s : out.assignment.sets) {
    bool k = false;
    bool h = false;
    for (const auto& d : s.dips) {
      k = k || d.label == ModeLabel::Kittel;
      h = h || d.label == ModeLabel::HMS;
    }
    out.missing_kittel += !k;
    out.missing_hms += !h;
  }
  const double n = static_cast<double>(map.n_controls());
  for (auto [label, missing] : {std::pair{"kittel", out.missing_kittel}, std::pair{"hms", out.missing_hms}}) {
    if (static_cast<double>(missing) > cfg.analysis.max_missing_fraction * n) {
      out.warnings.push_back(fmt::format("{} branch has no dip in {} of {} traces", label, missing,
                                         map.n_controls()));
    }
  }
  if (out.assignment.ambiguous > 0) {
    out.warnings.push_back(fmt::format("{} dips claimed by both magnon branches were left unassigned",
                                       out.assignment.ambiguous));
  }

  BackgroundOptions bg = cfg.analysis.background;
  bg.sweep_min = std::min(map.controls.front(), map.controls.back());
  bg.sweep_max = std::max(map.controls.front(), map.controls.back());
  const ModeLabel axis = drive.target == DriveTarget::Kittel ? ModeLabel::Kittel : ModeLabel::HMS;
  const ModeLabel other = axis == ModeLabel::Kittel ? ModeLabel::HMS : ModeLabel::Kittel;

  auto curve_for = [&](ModeLabel label) {
    auto pts = cfg.analysis.dip_bias_correction
                   ? corrected_branch_points(out.assignment.sets, label, cfg, map.probe, workers)
                   : branch_points(out.assignment.sets, label);
    if (pts.size() < 3) {
      throw NumericalError(fmt::format("{} branch has only {} assigned dips", to_string(label), pts.size()));
    }
    // Relative to the calibrated branch first; with both reference ends present this
    // changes nothing, and a one-sided reference then only has an offset to find.
    for (auto& p : pts) p.value -= mode_frequency_at_current(cfg.system.calibration, label, p.control);
    const auto residual = subtract_linear_background(pts, bg);
    return to_detuning_axis(residual, cfg.system.calibration, drive.frequency, axis, label);
  };
  out.driven = curve_for(axis);
  out.undriven = curve_for(other);

  CurveFitOptions fo = cfg.analysis.curve;
  fo.direction = out.direction;
  out.fit = fit_driven_curve(out.driven, cfg.system.linewidth(drive.target), fo);
  out.fit.drive_frequency = drive.frequency;
  try {
    out.ratio = fit_ratio(out.driven, out.undriven, cfg.analysis.ratio);
    out.fit.ratio = out.ratio->ratio;
  } catch (const NumericalError& e) {
    out.ratio_error = e.what();
    out.fit.ratio = 0.0;
  }
  return out;
}

void write_fit_curve_csv(std::ostream& os, const AnalysisResult& a, double gamma,
                         std::uint64_t manifest_hash) {
  os << fmt::format("# manifest {:016x}\n", manifest_hash);
  os << "delta_MHz,shift_MHz,model_MHz,mode\n";
  const auto model = model_shifts(a.driven.points, gamma, a.fit.cp_estimate, a.direction);
  for (size_t i = 0; i < a.driven.points.size(); ++i) {
    const auto& p = a.driven.points[i];
    os << fmt::format("{},{},{},{}\n", p.delta, p.shift, model[i], to_string(a.driven.label));
  }
  if (a.undriven.points.empty()) return;
  const auto cross = model_shifts(a.undriven.points, gamma, a.fit.cp_estimate, a.direction);
  for (size_t i = 0; i < a.undriven.points.size(); ++i) {
    const auto& p = a.undriven.points[i];
    os << fmt::format("{},{},{},{}\n", p.delta, p.shift, a.fit.ratio * cross[i],
                      to_string(a.undriven.label));
  }
}

}  // namespace cmkerr

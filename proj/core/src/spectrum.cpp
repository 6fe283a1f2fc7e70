#include "cmkerr/spectrum.hpp"

#include <cmath>
#include <random>
#include <string>

#include <fmt/format.h>

#include "cmkerr/error.hpp"
#include "cmkerr/parallel.hpp"

namespace cmkerr {

std::complex<double> s21_linear(double omega, const SystemConfig& cfg, double omega_k_eff,
                                double omega_h_eff) {
  using namespace std::complex_literals;
  const double gk = cfg.couplings.g_k;
  const double gh = cfg.couplings.g_h;
  const std::complex<double> kittel = 1i * (omega - omega_k_eff) - 0.5 * cfg.kittel.linewidth;
  const std::complex<double> hms = 1i * (omega - omega_h_eff) - 0.5 * cfg.hms.linewidth;
  const std::complex<double> denom = 1i * (omega - cfg.cavity.bare_frequency) -
                                     0.5 * cfg.cavity.linewidth + gk * gk / kittel +
                                     gh * gh / hms;
  return cfg.kappa_ext() / denom;
}

ProbeTrace SpectrumMap::trace(size_t i) const {
  return {controls.at(i), probe, row(i)};
}

std::span<const double> SpectrumMap::row(size_t i) const {
  return {data.data() + i * probe.size(), probe.size()};
}

std::span<double> SpectrumMap::row(size_t i) {
  return {data.data() + i * probe.size(), probe.size()};
}

std::vector<double> linear_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw DomainError(fmt::format("invalid grid [{}, {}] step {}", lo, hi, step));
  }
  const auto n = static_cast<size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> g(n);
  for (size_t i = 0; i < n; ++i) g[i] = lo + step * static_cast<double>(i);
  return g;
}

std::vector<double> currents_for_detuning(const FieldCalibration& cal, DriveTarget target,
                                          double drive_frequency, double delta_lo,
                                          double delta_hi, double delta_step) {
  const ModeLabel mode = target == DriveTarget::Kittel ? ModeLabel::Kittel : ModeLabel::HMS;
  std::vector<double> out;
  for (double d : linear_grid(delta_lo, delta_hi, delta_step)) {
    out.push_back(current_for_mode_frequency(cal, mode, drive_frequency + d));
  }
  return out;
}

SweepResult drive_sweep(const SystemConfig& cfg, std::span<const double> currents,
                        const DriveConfig& drive) {
  const ModeLabel mode = drive.target == DriveTarget::Kittel ? ModeLabel::Kittel : ModeLabel::HMS;
  std::vector<double> deltas(currents.size());
  for (size_t i = 0; i < currents.size(); ++i) {
    deltas[i] = mode_frequency_at_current(cfg.calibration, mode, currents[i]) - drive.frequency;
  }
  SweepDirection dir = SweepDirection::Up;
  if (deltas.size() > 1 && deltas[1] < deltas[0]) dir = SweepDirection::Down;
  SweepOptions opts;
  opts.cross_ratio = cfg.cross_ratio(drive.target);
  opts.self_kerr = cfg.self_kerr(drive.target);
  // c carries the Kerr coefficient; without a self-Kerr term the drive cannot shift anything.
  const double cp = opts.self_kerr == 0.0 ? 0.0 : drive.drive_product();
  try {
    return hysteresis_sweep(cfg.linewidth(drive.target), cp, deltas, currents, dir, opts);
  } catch (const DomainError& e) {
    throw DomainError(fmt::format("drive sweep failed: {}", e.what()));
  }
}

SpectrumMap synthesize_map(const SystemConfig& cfg, std::span<const double> currents,
                           std::span<const double> probe, const std::optional<DriveConfig>& drive,
                           const SynthesisOptions& opts) {
  cfg.validate();
  if (currents.empty() || probe.empty()) {
    throw DomainError("current and probe grids must be non-empty");
  }
  for (size_t i = 1; i < probe.size(); ++i) {
    if (!(probe[i] > probe[i - 1])) {
      throw DomainError(fmt::format("probe grid not strictly increasing at {} MHz", probe[i]));
    }
  }
  if (currents.size() > 1) {
    const bool up = currents[1] > currents[0];
    for (size_t i = 1; i < currents.size(); ++i) {
      if (up ? !(currents[i] > currents[i - 1]) : !(currents[i] < currents[i - 1])) {
        throw DomainError(fmt::format("current grid not monotone at {} A", currents[i]));
      }
    }
  }

  SpectrumMap map;
  map.controls.assign(currents.begin(), currents.end());
  map.probe.assign(probe.begin(), probe.end());
  map.drive = drive;
  map.states.resize(currents.size());

  for (size_t i = 0; i < currents.size(); ++i) {
    const auto f = mode_frequencies_at_current(cfg.calibration, currents[i]);
    TraceState& s = map.states[i];
    s.omega_k_bare = s.omega_k_eff = f.kittel;
    s.omega_h_bare = s.omega_h_eff = f.hms;
  }
  if (drive) {
    SweepResult sweep;
    try {
      sweep = drive_sweep(cfg, currents, *drive);
    } catch (const DomainError& e) {
      throw DomainError(fmt::format("{} (currents {}..{} A)", e.what(), currents.front(),
                                    currents.back()));
    }
    for (size_t i = 0; i < currents.size(); ++i) {
      const SweepPoint& p = sweep.points[i];
      TraceState& s = map.states[i];
      const double self = p.solution.selected_shift();
      s.delta = p.solution.delta;
      s.driven_shift = self;
      s.root_count = p.solution.count;
      if (drive->target == DriveTarget::Kittel) {
        s.omega_k_eff += self;
        s.omega_h_eff += p.cross_shift;
      } else {
        s.omega_h_eff += self;
        s.omega_k_eff += p.cross_shift;
      }
      if (!std::isfinite(s.omega_k_eff) || !std::isfinite(s.omega_h_eff)) {
        throw NumericalError(fmt::format("non-finite mode frequency at current {} A", currents[i]));
      }
    }
  }

  map.data.assign(currents.size() * probe.size(), 0.0);
  parallel_for(currents.size(), opts.workers, [&](size_t i) {
    const TraceState& s = map.states[i];
    auto out = map.row(i);
    for (size_t j = 0; j < probe.size(); ++j) {
      out[j] = std::norm(s21_linear(probe[j], cfg, s.omega_k_eff, s.omega_h_eff));
    }
    if (opts.noise > 0.0) {
      std::mt19937_64 rng(opts.seed ^ (0x9E3779B97F4A7C15ULL * (i + 1)));
      std::normal_distribution<double> n(0.0, opts.noise);
      for (double& v : out) v *= std::max(0.0, 1.0 + n(rng));
    }
  });
  return map;
}

}  // namespace cmkerr

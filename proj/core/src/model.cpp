#include "cmkerr/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cmkerr/error.hpp"

namespace cmkerr {
namespace {

// rad/s -> linear MHz
constexpr double kAngularToMHz = 1.0 / (2.0 * std::numbers::pi * 1e6);

double self_kerr_closed_form(const MaterialParams& m, double magnetization) {
  if (!(m.sphere_volume > 0.0)) {
    throw DomainError("sphere volume must be positive");
  }
  if (!(magnetization > 0.0)) {
    throw DomainError("magnetization must be positive");
  }
  const double g = m.gyromagnetic_ratio;
  const double angular = 13.0 * m.hbar * m.anisotropy_constant * g * g /
                         (16.0 * magnetization * magnetization * m.sphere_volume);
  return angular * kAngularToMHz;
}

}  // namespace

std::string_view to_string(ModeLabel label) {
  switch (label) {
    case ModeLabel::Cavity: return "cavity";
    case ModeLabel::Kittel: return "kittel";
    case ModeLabel::HMS: return "hms";
    case ModeLabel::Unassigned: return "unassigned";
  }
  return "unassigned";
}

ModeLabel mode_label_from_string(std::string_view text) {
  if (text == "cavity") return ModeLabel::Cavity;
  if (text == "kittel") return ModeLabel::Kittel;
  if (text == "hms") return ModeLabel::HMS;
  if (text == "unassigned") return ModeLabel::Unassigned;
  throw DomainError("unknown mode label '" + std::string(text) + "'");
}

std::string_view to_string(DriveTarget target) {
  return target == DriveTarget::Kittel ? "kittel" : "hms";
}

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

double DriveConfig::power_mw() const { return dbm_to_mw(power_dbm); }

double DriveConfig::drive_product() const {
  const double c = target == DriveTarget::Kittel ? efficiency_kittel : efficiency_hms;
  return c * power_mw();
}

double SystemConfig::kappa_ext() const {
  return cavity_external_linewidth.value_or(cavity.linewidth / 3.0);
}

const ModeParams& SystemConfig::mode(ModeLabel label) const {
  switch (label) {
    case ModeLabel::Cavity: return cavity;
    case ModeLabel::Kittel: return kittel;
    case ModeLabel::HMS: return hms;
    case ModeLabel::Unassigned: break;
  }
  throw DomainError("no mode parameters for an unassigned label");
}

double SystemConfig::self_kerr(DriveTarget target) const {
  return target == DriveTarget::Kittel ? kerr.k_self_kittel : kerr.k_self_hms;
}

double SystemConfig::cross_ratio(DriveTarget target) const {
  const double self = self_kerr(target);
  if (self == 0.0) {
    return 0.0;
  }
  return kerr.k_cross / self;
}

double SystemConfig::linewidth(DriveTarget target) const {
  return target == DriveTarget::Kittel ? kittel.linewidth : hms.linewidth;
}

void SystemConfig::validate() const {
  for (const ModeParams* m : {&cavity, &kittel, &hms}) {
    if (!(m->bare_frequency > 0.0)) {
      throw DomainError(std::string(to_string(m->label)) + ": bare_frequency must be > 0");
    }
    if (!(m->linewidth > 0.0)) {
      throw DomainError(std::string(to_string(m->label)) + ": linewidth must be > 0");
    }
  }
  if (couplings.g_k < 0.0 || couplings.g_h < 0.0 || couplings.g_kh < 0.0) {
    throw DomainError("couplings must be non-negative");
  }
  const double ke = kappa_ext();
  if (ke < 0.0 || ke > 0.5 * cavity.linewidth) {
    throw DomainError("external linewidth must lie in [0, cavity linewidth / 2] for a passive two-port");
  }
  if (!(calibration.kittel_slope > 0.0)) {
    throw DomainError("calibration.kittel_slope must be > 0");
  }
  auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };
  const int signs[] = {sign(kerr.k_self_kittel), sign(kerr.k_self_hms), sign(kerr.k_cross)};
  for (int s : signs) {
    for (int t : signs) {
      if (s != 0 && t != 0 && s != t) {
        throw DomainError("Kerr coefficients must share one sign");
      }
    }
  }
  if (material) {
    if (!(material->sphere_volume > 0.0)) {
      throw DomainError("material.sphere_volume must be > 0");
    }
    if (!(material->total_spin_kittel > material->total_spin_hms && material->total_spin_hms > 0.0)) {
      throw DomainError("material requires total_spin_kittel > total_spin_hms > 0");
    }
  }
}

double kerr_self_from_material(const MaterialParams& m) {
  return self_kerr_closed_form(m, m.saturation_magnetization);
}

double kerr_self_hms_from_material(const MaterialParams& m) {
  return self_kerr_closed_form(m, m.hms_magnetization);
}

CrossKerrDerivation cross_kerr_from_overlap(const MaterialParams& m) {
  if (!(m.sphere_volume > 0.0)) {
    throw DomainError("sphere volume must be positive");
  }
  if (m.total_spin_kittel < 0.0 || m.total_spin_hms < 0.0) {
    throw DomainError("total spin numbers must be non-negative");
  }
  const double g = m.gyromagnetic_ratio;
  CrossKerrDerivation out;
  out.k_cross = m.overlap_coefficient * m.hbar * g * g / m.sphere_volume * kAngularToMHz;
  out.g_kh = out.k_cross * std::sqrt(m.total_spin_kittel * m.total_spin_hms);
  out.shift_kittel = -out.k_cross * m.total_spin_hms;
  out.shift_hms = -out.k_cross * m.total_spin_kittel;
  return out;
}

KerrSet kerr_from_material(const MaterialParams& m) {
  return KerrSet{kerr_self_from_material(m), kerr_self_hms_from_material(m),
                 cross_kerr_from_overlap(m).k_cross};
}

DispersiveReport dispersive_check(const SystemConfig& cfg, double threshold) {
  DispersiveReport r;
  r.detuning_ck = cfg.cavity.bare_frequency - cfg.kittel.bare_frequency;
  r.detuning_hk = cfg.hms.bare_frequency - cfg.kittel.bare_frequency;

  auto ratio = [](double detuning, double g) {
    if (g == 0.0) return std::numeric_limits<double>::infinity();
    return std::abs(detuning) / g;
  };
  auto shift = [&r](double detuning, double g) {
    if (g == 0.0) return 0.0;
    if (detuning == 0.0) {
      r.infinite_shift = true;
      return std::numeric_limits<double>::infinity();
    }
    return g * g / detuning;
  };
  r.ratio_ck = ratio(r.detuning_ck, cfg.couplings.g_k);
  r.ratio_hk = ratio(r.detuning_hk, cfg.couplings.g_kh);
  r.shift_ck = shift(r.detuning_ck, cfg.couplings.g_k);
  r.shift_hk = shift(r.detuning_hk, cfg.couplings.g_kh);
  r.dispersive = !r.infinite_shift && r.ratio_ck >= threshold && r.ratio_hk >= threshold;
  return r;
}

ModeFrequencies mode_frequencies_at_current(const FieldCalibration& cal, double current) {
  const double field = cal.current_to_field_slope * current + cal.field_offset;
  const double kittel = cal.kittel_slope * field;
  return {kittel, kittel + cal.hms_offset_from_kittel};
}

double current_for_frequency(const FieldCalibration& cal, double kittel_frequency) {
  const double denom = cal.kittel_slope * cal.current_to_field_slope;
  if (denom == 0.0) {
    throw DomainError("calibration has zero current-to-frequency slope");
  }
  return (kittel_frequency - cal.kittel_slope * cal.field_offset) / denom;
}

double current_for_mode_frequency(const FieldCalibration& cal, ModeLabel mode, double frequency) {
  switch (mode) {
    case ModeLabel::Kittel: return current_for_frequency(cal, frequency);
    case ModeLabel::HMS: return current_for_frequency(cal, frequency - cal.hms_offset_from_kittel);
    default: throw DomainError("only magnon branches depend on the coil current");
  }
}

double mode_frequency_at_current(const FieldCalibration& cal, ModeLabel mode, double current) {
  const auto f = mode_frequencies_at_current(cal, current);
  switch (mode) {
    case ModeLabel::Kittel: return f.kittel;
    case ModeLabel::HMS: return f.hms;
    default: throw DomainError("only magnon branches depend on the coil current");
  }
}

}  // namespace cmkerr

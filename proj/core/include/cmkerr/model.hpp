#pragma once

// Physical parameter model of the cavity + two-magnon system.
//
// Unit convention: every frequency, linewidth, coupling, Kerr coefficient and
// detuning is a *linear* frequency in MHz (omega / 2pi). Angular factors are
// absorbed when values are constructed. Material constants stay in SI.

#include <array>
#include <optional>
#include <string_view>

namespace cmkerr {

enum class ModeLabel { Cavity, Kittel, HMS, Unassigned };

std::string_view to_string(ModeLabel label);
ModeLabel mode_label_from_string(std::string_view text);

struct ModeParams {
  ModeLabel label = ModeLabel::Cavity;
  double bare_frequency = 0.0;  // MHz
  double linewidth = 0.0;       // FWHM, MHz
};

struct CouplingSet {
  double g_k = 0.0;   // Kittel-cavity, MHz
  double g_h = 0.0;   // HMS-cavity, MHz
  double g_kh = 0.0;  // Kittel-HMS, MHz
};

/// Kerr coefficients in MHz per excitation. Signed; a [110]-biased YIG sphere
/// gives all three negative.
struct KerrSet {
  double k_self_kittel = 0.0;
  double k_self_hms = 0.0;
  double k_cross = 0.0;
};

/// SI material constants for the closed-form Kerr coefficients.
struct MaterialParams {
  double anisotropy_constant = -610.0;             // K_an, J/m^3
  double gyromagnetic_ratio = 1.76085963023e11;    // rad s^-1 T^-1
  double saturation_magnetization = 1.4e5;         // A/m, Kittel sub-magnetization
  double hms_magnetization = 62609.90336999411;    // A/m, HMS sub-magnetization
  double sphere_volume = 5.235987755982988e-10;    // m^3 (1 mm diameter)
  double overlap_coefficient = -6.321747448979592e-08;  // beta (SI)
  double total_spin_kittel = 3.9e18;
  double total_spin_hms = 2.597926216951378e14;
  double vacuum_permeability = 1.25663706212e-6;   // T m / A
  double hbar = 1.054571817e-34;                   // J s
};

enum class DriveTarget { Kittel, HMS };

std::string_view to_string(DriveTarget target);

struct DriveConfig {
  double frequency = 0.0;          // omega_d, MHz
  double power_dbm = 0.0;
  double efficiency_kittel = 0.0;  // c_k, MHz^3/mW, carries the Kerr sign
  double efficiency_hms = 0.0;     // c_h, MHz^3/mW
  DriveTarget target = DriveTarget::Kittel;

  double power_mw() const;
  /// c * P_d for the driven mode, MHz^3.
  double drive_product() const;
};

struct FieldCalibration {
  double current_to_field_slope = 0.07;                 // T/A
  double field_offset = 0.016082227748727362;           // T
  double kittel_slope = 28024.951424207153;             // MHz/T
  double hms_offset_from_kittel = 301.0;                // MHz
};

struct SystemConfig {
  ModeParams cavity{ModeLabel::Cavity, 10070.0, 4.0};
  ModeParams kittel{ModeLabel::Kittel, 9800.0, 11.6};
  ModeParams hms{ModeLabel::HMS, 10101.0, 5.0};
  /// External (port) coupling; unset means cavity linewidth / 3.
  std::optional<double> cavity_external_linewidth;
  CouplingSet couplings{40.5, 2.0, 2.0};
  KerrSet kerr;
  FieldCalibration calibration;
  std::optional<MaterialParams> material;

  double kappa_ext() const;
  const ModeParams& mode(ModeLabel label) const;
  /// K_cross / K_self of the driven mode.
  double cross_ratio(DriveTarget target) const;
  double self_kerr(DriveTarget target) const;
  double linewidth(DriveTarget target) const;

  /// Throws DomainError when an invariant is violated.
  void validate() const;
};

double dbm_to_mw(double dbm);

/// K_s = 13 hbar K_an gamma^2 / (16 M^2 V), returned in MHz per excitation.
double kerr_self_from_material(const MaterialParams& m);
/// Same closed form with the HMS sub-magnetization.
double kerr_self_hms_from_material(const MaterialParams& m);

struct CrossKerrDerivation {
  double k_cross = 0.0;      // MHz per excitation
  double g_kh = 0.0;         // MHz, signed
  double shift_kittel = 0.0; // renormalization of omega_k, MHz
  double shift_hms = 0.0;    // renormalization of omega_h, MHz
};

CrossKerrDerivation cross_kerr_from_overlap(const MaterialParams& m);

/// Fills a KerrSet from material constants.
KerrSet kerr_from_material(const MaterialParams& m);

struct DispersiveReport {
  double detuning_ck = 0.0;   // omega_c - omega_k
  double detuning_hk = 0.0;   // omega_h - omega_k
  double ratio_ck = 0.0;      // |Lambda_ck| / g_k
  double ratio_hk = 0.0;      // |Lambda_hk| / g_kh
  double shift_ck = 0.0;      // g_k^2 / Lambda_ck
  double shift_hk = 0.0;      // g_kh^2 / Lambda_hk
  bool infinite_shift = false;
  bool dispersive = false;
};

DispersiveReport dispersive_check(const SystemConfig& cfg, double threshold = 10.0);

struct ModeFrequencies {
  double kittel = 0.0;
  double hms = 0.0;
};

ModeFrequencies mode_frequencies_at_current(const FieldCalibration& cal, double current);

/// Inverse of the Kittel branch; throws DomainError for a flat calibration.
double current_for_frequency(const FieldCalibration& cal, double kittel_frequency);

/// Current at which the given mode sits at `frequency`.
double current_for_mode_frequency(const FieldCalibration& cal, ModeLabel mode, double frequency);

double mode_frequency_at_current(const FieldCalibration& cal, ModeLabel mode, double current);

}  // namespace cmkerr

#pragma once

// Brute-force references the library is checked against. Nothing here calls
// into the solver; everything is evaluated from the cubic directly.

#include <complex>
#include <cstdint>
#include <vector>

#include "cmkerr/model.hpp"

namespace cmkerr::testing {

/// ((D + delta)^2 + (gamma/2)^2) D - cP, extended precision.
long double cubic_value(long double shift, long double delta, long double gamma, long double cp);

/// Every real root from a sign-change scan of the cubic on a uniform grid
/// (step in MHz), bisected to machine precision. Local extrema of the cubic
/// are added as extra grid nodes so a near-tangent root pair is not stepped over.
std::vector<long double> scan_roots(double delta, double gamma, double cp, double step = 0.01);

/// Root count from the values at the two critical points of the cubic: 3 when
/// the local maximum and minimum straddle zero, else 1.
int scan_root_count(double delta, double gamma, double cp);

struct ScanWindow {
  bool exists = false;
  double lo = 0.0;
  double hi = 0.0;
};

/// Detuning interval with three roots: grid scan at `step`, boundaries then
/// bisected on the root-count predicate.
ScanWindow scan_three_root_window(double gamma, double cp, double lo, double hi, double step = 0.01);

/// Forward-Euler relaxation of da/dt = -(i(delta + s|a|^2) + gamma/2) a + F, whose
/// fixed points satisfy the cubic with |a|^2 = |Delta| and s = sign(cP). Starts
/// at the fixed point for `shift`, perturbed; true when it relaxes back.
bool relaxes_to(double shift, double delta, double gamma, double cp, std::uint64_t seed);

/// Self-Kerr closed form evaluated in Gaussian units (erg, G, emu/cm^3, cm^3),
/// returned as linear MHz.
double kerr_self_cgs(const MaterialParams& m, double magnetization_si);

/// Relative mismatch of g_kh^2 against k_cross^2 S_K S_H, computed with 50
/// significant digits.
double gkh_identity_mismatch(double g_kh, double k_cross, double s_k, double s_h);

struct Peak {
  double frequency = 0.0;
  double height = 0.0;
};

/// |S21|^2 maxima (sub-grid by parabola) of a trace on [lo, hi] at `step`.
std::vector<Peak> transmission_peaks(const SystemConfig& cfg, double omega_k, double omega_h,
                                       double lo, double hi, double step);

}  // namespace cmkerr::testing

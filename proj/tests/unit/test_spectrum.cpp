#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cmkerr/config.hpp"
#include "cmkerr/error.hpp"
#include "cmkerr/spectrum.hpp"
#include "oracles.hpp"

using namespace cmkerr;

namespace {

// two largest maxima, ordered by frequency
std::pair<double, double> split_pair(std::vector<testing::Peak> peaks) {
  REQUIRE(peaks.size() >= 2);
  std::sort(peaks.begin(), peaks.end(), [](auto& a, auto& b) { return a.height > b.height; });
  return std::minmax(peaks[0].frequency, peaks[1].frequency);
}

}  // namespace

TEST_CASE("uncoupled cavity is a bare Lorentzian") {
  SystemConfig cfg;
  cfg.couplings = {0.0, 0.0, 0.0};
  const double wc = cfg.cavity.bare_frequency;
  const double peak = std::norm(s21_linear(wc, cfg, 9800.0, 10101.0));
  CHECK(peak == doctest::Approx(std::pow(2.0 * cfg.kappa_ext() / cfg.cavity.linewidth, 2)));
  // FWHM = kappa
  const double half = 0.5 * cfg.cavity.linewidth;
  CHECK(std::norm(s21_linear(wc + half, cfg, 9800.0, 10101.0)) == doctest::Approx(0.5 * peak));
  CHECK(std::norm(s21_linear(wc - half, cfg, 9800.0, 10101.0)) == doctest::Approx(0.5 * peak));
}

TEST_CASE("no port coupling, no transmission") {
  SystemConfig cfg;
  cfg.cavity_external_linewidth = 0.0;
  for (double w = 9600.0; w < 10400.0; w += 7.3) CHECK(std::norm(s21_linear(w, cfg, 9900.0, 10070.0)) == 0.0);
}

TEST_CASE("normal-mode splitting at exact resonance") {
  SUBCASE("2g for g much larger than the linewidths") {
    SystemConfig cfg;
    cfg.cavity.linewidth = 0.3;
    cfg.kittel.linewidth = 0.3;
    cfg.couplings = {40.5, 0.0, 0.0};
    const double wc = cfg.cavity.bare_frequency;
    const auto [lo, hi] = split_pair(testing::transmission_peaks(cfg, wc, 20000.0, wc - 60, wc + 60, 0.001));
    CHECK(std::abs((hi - lo) / 81.0 - 1.0) < 1e-3);
  }
  SUBCASE("Kittel at the default linewidths") {
    SystemConfig cfg;
    cfg.couplings.g_h = 0.0;
    const double wc = cfg.cavity.bare_frequency;
    const auto [lo, hi] = split_pair(testing::transmission_peaks(cfg, wc, 20000.0, wc - 60, wc + 60, 0.001));
    CHECK(std::abs((hi - lo) / 81.0 - 1.0) < 1e-2);
  }
  SUBCASE("HMS, 2 MHz coupling") {
    SystemConfig cfg;
    cfg.couplings.g_k = 0.0;
    const double wc = cfg.cavity.bare_frequency;
    const auto [lo, hi] = split_pair(testing::transmission_peaks(cfg, 20000.0, wc, wc - 10, wc + 10, 0.0005));
    CHECK(std::abs((hi - lo) / 4.0 - 1.0) < 5e-2);
  }
}

TEST_CASE("synthesized maps respect the passive bound") {
  const RunConfig rc = default_run_config();
  const auto currents = linear_grid(4.0, 5.5, 0.05);
  const auto probe = linear_grid(9600.0, 10300.0, 0.5);
  DriveConfig d = rc.drive;
  const auto map = synthesize_map(rc.system, currents, probe, d);
  const double bound = std::pow(2.0 * rc.system.kappa_ext() / rc.system.cavity.linewidth, 2);
  CHECK(bound <= 1.0);
  for (double v : map.data) {
    CHECK(v >= 0.0);
    CHECK(v <= bound * (1 + 1e-12));
  }
}

TEST_CASE("zero Kerr coefficients: drive leaves the map untouched") {
  RunConfig rc = default_run_config();
  rc.system.kerr = {};
  const auto currents = currents_for_detuning(rc.system.calibration, DriveTarget::Kittel, 9800.0, -60, 60, 2.0);
  const auto probe = linear_grid(9600.0, 10300.0, 0.5);
  const auto driven = synthesize_map(rc.system, currents, probe, rc.drive);
  const auto bare = synthesize_map(rc.system, currents, probe, std::nullopt);
  REQUIRE(driven.data.size() == bare.data.size());
  CHECK(driven.data == bare.data);
}

TEST_CASE("doubling the cross ratio doubles the undriven displacement") {
  RunConfig rc = default_run_config();
  const auto currents = currents_for_detuning(rc.system.calibration, DriveTarget::Kittel, 9800.0, -100, 100, 1.0);
  const std::vector<double> probe{10000.0};
  const auto a = synthesize_map(rc.system, currents, probe, rc.drive);
  rc.system.kerr.k_cross *= 2.0;
  const auto b = synthesize_map(rc.system, currents, probe, rc.drive);
  double peak = 0.0;
  for (size_t i = 0; i < currents.size(); ++i) {
    const double da = a.states[i].omega_h_eff - a.states[i].omega_h_bare;
    const double db = b.states[i].omega_h_eff - b.states[i].omega_h_bare;
    CHECK(db == doctest::Approx(2.0 * da).epsilon(1e-12));
    CHECK(a.states[i].driven_shift == b.states[i].driven_shift);
    peak = std::max(peak, std::abs(da));
  }
  CHECK(peak == doctest::Approx(150.0).epsilon(1e-3));
}

TEST_CASE("ground truth states") {
  const RunConfig rc = default_run_config();
  const auto currents = currents_for_detuning(rc.system.calibration, DriveTarget::Kittel, 9800.0, -100, 100, 0.5);
  const std::vector<double> probe{9900.0, 10000.0};
  const auto map = synthesize_map(rc.system, currents, probe, rc.drive);
  for (size_t i = 0; i < currents.size(); ++i) {
    const auto& s = map.states[i];
    CHECK(s.delta == doctest::Approx(-100.0 + 0.5 * static_cast<double>(i)));
    CHECK(s.omega_k_eff - s.omega_k_bare == doctest::Approx(s.driven_shift));
    CHECK(s.omega_h_eff - s.omega_h_bare == doctest::Approx(2.5 * s.driven_shift));
  }
  const auto undriven = synthesize_map(rc.system, currents, probe, std::nullopt);
  for (const auto& s : undriven.states) {
    CHECK(s.omega_k_eff == s.omega_k_bare);
    CHECK(s.omega_h_eff == s.omega_h_bare);
  }
}

TEST_CASE("synthesis is independent of the worker count") {
  const RunConfig rc = default_run_config();
  const auto currents = linear_grid(4.0, 5.0, 0.02);
  const auto probe = linear_grid(9700.0, 10200.0, 1.0);
  SynthesisOptions one{1, 1e-3, 42};
  SynthesisOptions many{7, 1e-3, 42};
  const auto a = synthesize_map(rc.system, currents, probe, rc.drive, one);
  const auto b = synthesize_map(rc.system, currents, probe, rc.drive, many);
  CHECK(a.data == b.data);
  SynthesisOptions other{7, 1e-3, 43};
  CHECK(synthesize_map(rc.system, currents, probe, rc.drive, other).data != a.data);
}

TEST_CASE("synthesis input checks") {
  const RunConfig rc = default_run_config();
  const std::vector<double> probe{9900.0, 10000.0};
  const std::vector<double> zigzag{4.0, 4.1, 4.05};
  CHECK_THROWS_AS(synthesize_map(rc.system, zigzag, probe, std::nullopt), DomainError);
  const std::vector<double> none;
  CHECK_THROWS_AS(synthesize_map(rc.system, none, probe, std::nullopt), DomainError);
  const std::vector<double> bad_probe{10000.0, 9900.0};
  const std::vector<double> one{4.0};
  CHECK_THROWS_AS(synthesize_map(rc.system, one, bad_probe, std::nullopt), DomainError);
  CHECK_THROWS_AS(linear_grid(1.0, 0.0, 0.1), DomainError);
  CHECK(linear_grid(0.0, 1.0, 0.1).size() == 11);
}

TEST_CASE("descending currents sweep down") {
  const RunConfig rc = default_run_config();
  auto currents = currents_for_detuning(rc.system.calibration, DriveTarget::Kittel, 9800.0, -100, 100, 1.0);
  std::reverse(currents.begin(), currents.end());
  const auto r = drive_sweep(rc.system, currents, rc.drive);
  CHECK(r.direction == SweepDirection::Down);
  CHECK(r.jumps.size() == 1);
}

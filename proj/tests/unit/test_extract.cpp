#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cmkerr/config.hpp"
#include "cmkerr/error.hpp"
#include "cmkerr/extract.hpp"
#include "cmkerr/pipeline.hpp"
#include "cmkerr/scenarios.hpp"

using namespace cmkerr;

TEST_CASE("quadratic baseline reproduces quadratics") {
  std::vector<double> y;
  for (int i = 0; i < 200; ++i) y.push_back(3.0 - 0.2 * i + 0.004 * i * i);
  const auto b = quadratic_baseline(y, 21);
  REQUIRE(b.size() == y.size());
  for (size_t i = 0; i < y.size(); ++i) CHECK(b[i] == doctest::Approx(y[i]).epsilon(1e-10));
}

TEST_CASE("single Lorentzian dip") {
  const double f0 = 10003.137, fwhm = 5.0;
  const auto probe = linear_grid(9900.0, 10100.0, 0.1);
  std::vector<double> y;
  for (double f : probe) y.push_back(0.4 * (1.0 - 0.6 / (1.0 + std::pow((f - f0) / (0.5 * fwhm), 2))));
  const auto d = find_dips({0.0, probe, y});
  REQUIRE_FALSE(d.dips.empty());
  const Dip* main = &d.dips[0];
  for (const auto& x : d.dips) if (x.depth > main->depth) main = &x;
  CHECK(std::abs(main->frequency - f0) < 0.01 * fwhm);
  CHECK(main->width > 0.5 * fwhm);
  CHECK(main->width < 2.0 * fwhm);
  // side lobes of the detrending are far shallower
  for (const auto& x : d.dips) if (&x != main) CHECK(x.depth < 0.2 * main->depth);
}

TEST_CASE("flat and sloped traces have no dips") {
  const auto probe = linear_grid(9900.0, 10100.0, 0.1);
  std::vector<double> flat(probe.size(), 0.3);
  CHECK(find_dips({0.0, probe, flat}).dips.empty());
  std::vector<double> slope;
  for (double f : probe) slope.push_back(0.1 * std::pow(10.0, (f - 9900.0) / 400.0));
  CHECK(find_dips({0.0, probe, slope}).dips.empty());
}

TEST_CASE("dips stay inside the probe grid") {
  const RunConfig rc = default_run_config();
  const auto probe = linear_grid(9750.0, 10150.0, 0.2);
  const auto map = synthesize_map(rc.system, linear_grid(3.0, 6.0, 0.25), probe, std::nullopt);
  for (size_t i = 0; i < map.n_controls(); ++i) {
    for (const auto& d : find_dips(map.trace(i)).dips) {
      CHECK(d.frequency >= probe.front());
      CHECK(d.frequency <= probe.back());
      CHECK(d.depth > 0.0);
    }
  }
}

TEST_CASE("undriven trace with the Kittel mode at 9.8 GHz: a dip at each mode") {
  RunConfig rc = default_run_config();
  const auto& cal = rc.system.calibration;
  const double current = current_for_frequency(cal, 9800.0);
  // a short sweep around the operating point so the tracker has context
  const auto currents = linear_grid(current - 0.05, current + 0.05, 0.005);
  const auto map = synthesize_map(rc.system, currents, linear_grid(9550.0, 10350.0, 0.1), std::nullopt);
  const auto sets = find_all_dips(map, rc.analysis.dips, 2);
  const size_t mid = currents.size() / 2;
  const auto& st = map.states[mid];
  const double wc = dressed_cavity_frequency(rc.system.cavity.bare_frequency, st.omega_k_bare, st.omega_h_bare,
                                             rc.system.couplings.g_k, rc.system.couplings.g_h);
  auto nearest = [&](double f) {
    double best = 1e9;
    for (const auto& d : sets[mid].dips) best = std::min(best, std::abs(d.frequency - f));
    return best;
  };
  CHECK(nearest(9800.0) < 3.0);
  CHECK(nearest(10101.0) < 3.0);
  CHECK(nearest(wc) < 10.0);  // the cavity peak shows up as flank minima either side

  const auto res = assign_modes(sets, cal, assignment_options(rc));
  int k = 0, h = 0, c = 0;
  for (const auto& d : res.sets[mid].dips) {
    if (d.label == ModeLabel::Kittel) {
      ++k;
      CHECK(std::abs(d.frequency - 9800.0) < 3.0);
    }
    if (d.label == ModeLabel::HMS) {
      ++h;
      CHECK(std::abs(d.frequency - 10101.0) < 3.0);
    }
    if (d.label == ModeLabel::Cavity) {
      ++c;
      CHECK(std::abs(d.frequency - wc) < 10.0);
    }
  }
  CHECK(k == 1);
  CHECK(h <= 1);  // 30 MHz from the cavity the HMS dip is too faint next to the flank to be claimed
  CHECK(c == 1);
  // away from the cavity the HMS branch is picked up
  size_t hms_labelled = 0;
  for (const auto& s : res.sets) {
    for (const auto& d : s.dips) hms_labelled += d.label == ModeLabel::HMS;
  }
  CHECK(hms_labelled >= currents.size() / 2);
}

TEST_CASE("tracker on dips placed exactly on the branches") {
  const FieldCalibration cal;
  std::vector<DipSet> sets;
  for (double i = 1.0; i <= 2.0; i += 0.02) {
    const auto f = mode_frequencies_at_current(cal, i);
    sets.push_back({i, {{f.kittel, 1.0, 5.0}, {f.hms, 0.5, 4.0}, {f.kittel + 500.0, 3.0, 5.0}}});
  }
  const auto res = assign_modes(sets, cal);
  CHECK(res.assigned_kittel == sets.size());
  CHECK(res.assigned_hms == sets.size());
  for (const auto& s : res.sets) {
    CHECK(s.dips[0].label == ModeLabel::Kittel);
    CHECK(s.dips[1].label == ModeLabel::HMS);
    CHECK(s.dips[2].label == ModeLabel::Unassigned);  // 500 MHz off every branch
  }
}

TEST_CASE("tracker follows a shifted branch and skips noise") {
  const FieldCalibration cal;
  std::vector<DipSet> sets;
  int n = 0;
  for (double i = 1.0; i <= 2.0; i += 0.01, ++n) {
    const auto f = mode_frequencies_at_current(cal, i);
    const double shift = -40.0 * std::exp(-std::pow((i - 1.5) / 0.15, 2));
    DipSet s{i, {}};
    s.dips.push_back({f.kittel + shift, 1.0, 6.0});
    if (n % 7 == 0) s.dips.push_back({f.kittel + 60.0, 0.3, 0.2});  // too narrow to be a mode
    s.dips.push_back({f.hms, 0.6, 4.0});
    std::sort(s.dips.begin(), s.dips.end(), [](auto& a, auto& b) { return a.frequency < b.frequency; });
    sets.push_back(s);
  }
  const auto res = assign_modes(sets, cal);
  const auto pts = branch_points(res.sets, ModeLabel::Kittel);
  CHECK(pts.size() == sets.size());
  for (const auto& p : pts) {
    const double shift = -40.0 * std::exp(-std::pow((p.control - 1.5) / 0.15, 2));
    CHECK(p.value == doctest::Approx(mode_frequency_at_current(cal, ModeLabel::Kittel, p.control) + shift));
  }
  CHECK_THROWS_AS(assign_modes({{1.0, {}}, {1.0, {}}}, cal), DomainError);
}

TEST_CASE("labels agree with ground truth on a driven sweep") {
  const Scenario sc = kittel_drive_scenario();
  const auto map = synthesize_map(sc.config.system, sc.currents, sc.probe, sc.drive, {4, 0.0, 0});
  const auto sets = find_all_dips(map, sc.config.analysis.dips, 4);
  const auto res = assign_modes(sets, sc.config.system.calibration, assignment_options(sc.config));
  size_t labelled = 0, agree = 0;
  for (size_t i = 0; i < res.sets.size(); ++i) {
    const auto& st = map.states[i];
    for (const auto& d : res.sets[i].dips) {
      if (d.label != ModeLabel::Kittel && d.label != ModeLabel::HMS) continue;
      ++labelled;
      const double dk = std::abs(d.frequency - st.omega_k_eff);
      const double dh = std::abs(d.frequency - st.omega_h_eff);
      const bool right = d.label == ModeLabel::Kittel ? dk < dh && dk < 6.0 : dh < dk && dh < 6.0;
      agree += right;
    }
  }
  REQUIRE(labelled > map.n_controls());
  CHECK(static_cast<double>(agree) >= 0.99 * static_cast<double>(labelled));
}

TEST_CASE("exclusion band and dressed cavity") {
  SystemConfig cfg;
  CHECK(exclusion_half_width(cfg, ModeLabel::Kittel) == doctest::Approx(81.0 + 4.0 + 11.6));
  CHECK(exclusion_half_width(cfg, ModeLabel::HMS) == doctest::Approx(4.0 + 4.0 + 5.0));
  CHECK_THROWS_AS(exclusion_half_width(cfg, ModeLabel::Cavity), DomainError);

  CHECK(dressed_cavity_frequency(10070.0, 9800.0, 10101.0, 0.0, 0.0) == 10070.0);
  // one distant magnon: x (x + 270) = g^2 with x the pull; g^2 / Lambda is only the first-order value
  const double x = dressed_cavity_frequency(10070.0, 9800.0, 20000.0, 40.5, 0.0);
  CHECK(x == doctest::Approx(10070.0 + 0.5 * (-270.0 + std::sqrt(270.0 * 270.0 + 4.0 * 40.5 * 40.5))).epsilon(1e-9));
  CHECK(std::abs(x - 10070.0 - 40.5 * 40.5 / 270.0) < 0.2);
  // secular equation holds and the cavity-like root is chosen
  const double wk = 10030.0, wh = 10101.0, gk = 40.5, gh = 2.0;
  const double r = dressed_cavity_frequency(10070.0, wk, wh, gk, gh);
  CHECK(std::abs(r - 10070.0 - gk * gk / (r - wk) - gh * gh / (r - wh)) < 1e-6);
  CHECK(r > wk);
  // at exact resonance both polaritons are half cavity; either is acceptable
  const double s = dressed_cavity_frequency(10070.0, 10070.0, 30000.0, 40.5, 0.0);
  CHECK(std::abs(std::abs(s - 10070.0) - 40.5) < 1e-3);
}

TEST_CASE("linear background subtraction") {
  std::vector<ControlPoint> pts;
  for (int i = 0; i <= 100; ++i) pts.push_back({0.1 * i, 9800.0 + 28.0 * 0.1 * i});
  for (const auto& p : subtract_linear_background(pts)) CHECK(std::abs(p.value) < 1e-9);

  SUBCASE("injected profile is recovered") {
    auto withbump = pts;
    std::vector<double> bump(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
      const double c = pts[i].control;
      bump[i] = (c > 1.5 && c < 8.5) ? -50.0 * std::sin((c - 1.5) / 7.0 * M_PI) : 0.0;
      withbump[i].value += bump[i];
    }
    const auto r = subtract_linear_background(withbump);
    for (size_t i = 0; i < r.size(); ++i) CHECK(std::abs(r[i].value - bump[i]) < 1e-3);
  }
  SUBCASE("one empty end falls back to a constant") {
    std::vector<ControlPoint> p;
    p.push_back({0.0, 5.0});
    for (int i = 50; i <= 100; ++i) p.push_back({0.1 * i, 7.0});
    const auto fit = fit_reference_line(p);
    CHECK(fit.one_sided);
    CHECK(fit.slope == 0.0);
    CHECK(fit.intercept == doctest::Approx(7.0));
  }
  SUBCASE("too few reference points") {
    std::vector<ControlPoint> p{{0.0, 1.0}, {5.0, 1.0}, {10.0, 1.0}};
    CHECK_THROWS_AS(subtract_linear_background(p), DomainError);
    BackgroundOptions bad;
    bad.reference_fraction = 0.7;
    CHECK_THROWS_AS(subtract_linear_background(pts, bad), DomainError);
  }
}

TEST_CASE("detuning axis") {
  const FieldCalibration cal;
  const double i0 = current_for_frequency(cal, 9800.0);
  std::vector<ControlPoint> pts;
  for (int k = -5; k <= 5; ++k) pts.push_back({i0 + 0.01 * k, static_cast<double>(k)});
  const auto c = to_detuning_axis(pts, cal, 9800.0, ModeLabel::Kittel);
  CHECK(c.label == ModeLabel::Kittel);
  CHECK(std::abs(c.points[5].delta) < 1e-9);
  for (size_t i = 1; i < c.points.size(); ++i) CHECK(c.points[i].delta > c.points[i - 1].delta);
  const auto h = to_detuning_axis(pts, cal, 9800.0, ModeLabel::Kittel, ModeLabel::HMS);
  CHECK(h.label == ModeLabel::HMS);
  CHECK(h.points[0].delta == c.points[0].delta);

  auto bad = pts;
  bad[3].control = bad[2].control;
  CHECK_THROWS_AS(to_detuning_axis(bad, cal, 9800.0, ModeLabel::Kittel), DomainError);
}

TEST_CASE("shift curve CSV round trip") {
  std::vector<ShiftCurve> curves{{ModeLabel::Kittel, {{-1.5, -0.25}, {0.0, -60.0}}},
                                 {ModeLabel::HMS, {{-1.5, -0.625}, {0.0, -150.0}}}};
  std::stringstream ss;
  write_shift_curves_csv(ss, curves, 9);
  CHECK(ss.str().rfind("# manifest 0000000000000009\ndelta_MHz,shift_MHz,mode\n", 0) == 0);
  const auto back = read_shift_curves_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[1].label == ModeLabel::HMS);
  CHECK(back[1].points[1].shift == -150.0);
  std::stringstream bad("delta,shift\n");
  CHECK_THROWS_AS(read_shift_curves_csv(bad), IoError);
}

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cmkerr/error.hpp"
#include "cmkerr/steady_state.hpp"
#include "oracles.hpp"

using namespace cmkerr;

TEST_CASE("undriven cubic has the single root zero") {
  for (double delta : {-50.0, 0.0, 3.0, 120.0}) {
    const auto s = solve_shift_cubic(delta, 11.6, 0.0);
    REQUIRE(s.count == 1);
    CHECK(s.roots[0] == 0.0);
    CHECK(s.stable[0]);
  }
}

TEST_CASE("resonant drive against the fine scan oracle") {
  // Delta (Delta^2 + 33.64) = -100
  const auto s = solve_shift_cubic(0.0, 11.6, -100.0);
  const auto oracle = testing::scan_roots(0.0, 11.6, -100.0, 1e-4);
  REQUIRE(s.count == 1);
  REQUIRE(oracle.size() == 1);
  CHECK(std::abs(s.roots[0] - static_cast<double>(oracle[0])) < 1e-9);
  CHECK(s.roots[0] > -50.0);
  CHECK(s.roots[0] < 0.0);
  CHECK(std::abs(s.roots[0] * (s.roots[0] * s.roots[0] + 33.64) + 100.0) < 1e-9);
}

TEST_CASE("roots agree with the scan oracle on random draws") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-200, 200), g(1, 20), c(-1e6, 1e6);
  for (int i = 0; i < 200; ++i) {
    const double delta = d(rng), gamma = g(rng), cp = c(rng);
    const auto s = solve_shift_cubic(delta, gamma, cp);
    const auto o = testing::scan_roots(delta, gamma, cp);
    REQUIRE(static_cast<size_t>(s.count) == o.size());
    for (int k = 0; k < s.count; ++k) CHECK(std::abs(s.roots[k] - static_cast<double>(o[k])) < 1e-6);
  }
}

TEST_CASE("three-root window at the 60 MHz drive scale") {
  const double gamma = 11.6;
  const double cp = -60.0 * 0.25 * gamma * gamma;  // peak |Delta| = 60 MHz at resonance
  const auto scan = testing::scan_three_root_window(gamma, cp, -100.0, 100.0, 0.01);
  REQUIRE(scan.exists);
  const auto w = bistable_window(gamma, cp);
  REQUIRE(w.exists);
  CHECK(std::abs(w.lo - scan.lo) < 1e-6);
  CHECK(std::abs(w.hi - scan.hi) < 1e-6);
  CHECK(scan.lo > 0.0);  // negative shift folds towards positive detuning
  CHECK(solve_shift_cubic(0.5 * (w.lo + w.hi), gamma, cp).count == 3);
  CHECK(solve_shift_cubic(w.lo - 0.1, gamma, cp).count == 1);
  CHECK(solve_shift_cubic(w.hi + 0.1, gamma, cp).count == 1);

  CHECK_FALSE(bistable_window(gamma, 0.99 * bistability_threshold(gamma)).exists);
  CHECK(bistable_window(gamma, 1.01 * bistability_threshold(gamma)).exists);
  CHECK(bistability_threshold(gamma) == doctest::Approx(std::pow(gamma / 2, 3) * 8 / (3 * std::sqrt(3.0))));
}

TEST_CASE("stability pattern") {
  const auto one = solve_shift_cubic(-30.0, 11.6, -2018.4);
  REQUIRE(one.count == 1);
  CHECK(one.stable[0]);

  const auto w = bistable_window(11.6, -2018.4);
  const auto three = solve_shift_cubic(0.5 * (w.lo + w.hi), 11.6, -2018.4);
  REQUIRE(three.count == 3);
  CHECK(three.stable[0]);
  CHECK_FALSE(three.stable[1]);
  CHECK(three.stable[2]);
}

TEST_CASE("stability agrees with time-domain relaxation") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> g(5.0, 15.0), f(2.0, 6.0), u(0.15, 0.85);
  int draws = 0;
  while (draws < 20) {
    const double gamma = g(rng);
    const double cp = -f(rng) * bistability_threshold(gamma);
    const auto w = bistable_window(gamma, cp);
    REQUIRE(w.exists);
    const double delta = w.lo + u(rng) * (w.hi - w.lo);
    const auto s = solve_shift_cubic(delta, gamma, cp);
    if (s.count != 3 || s.roots[1] - s.roots[0] < 1.0 || s.roots[2] - s.roots[1] < 1.0) continue;
    for (int k = 0; k < 3; ++k) {
      CAPTURE(gamma);
      CAPTURE(delta);
      CAPTURE(k);
      CHECK(testing::relaxes_to(s.roots[k], delta, gamma, cp, 100 + draws) == s.stable[k]);
    }
    ++draws;
  }
  // single-root points relax too
  CHECK(testing::relaxes_to(solve_shift_cubic(-20.0, 11.6, -2018.4).roots[0], -20.0, 11.6, -2018.4, 5));
}

TEST_CASE("cross shift and excitation number") {
  CHECK(cross_shift(-60.0, 2.5) == doctest::Approx(-150.0));
  CHECK(cross_shift(-12.0, 0.5) == doctest::Approx(-6.0));
  CHECK(cross_shift(0.0, 2.5) == 0.0);

  CHECK(excitation_number(0.0, -1e-14) == 0.0);
  CHECK(excitation_number(-2e-14, -1e-14) == doctest::Approx(1.0));
  const double n = excitation_number(-60.0, -1e-14);  // K = -10 nHz
  CHECK(n == doctest::Approx(3e15).epsilon(1e-12));
  CHECK(2.0 * -1e-14 * n == doctest::Approx(-60.0).epsilon(1e-12));
  CHECK_THROWS_AS(excitation_number(-60.0, 0.0), DomainError);
  CHECK_THROWS_AS(excitation_number(60.0, -1e-14), DomainError);
}

TEST_CASE("sweeps below threshold coincide exactly") {
  const double gamma = 11.6;
  const double cp = -0.9 * bistability_threshold(gamma);
  const auto up = hysteresis_sweep(gamma, cp, detuning_grid(-50, 50, 0.05, SweepDirection::Up), SweepDirection::Up);
  const auto down =
      hysteresis_sweep(gamma, cp, detuning_grid(-50, 50, 0.05, SweepDirection::Down), SweepDirection::Down);
  const size_t n = up.points.size();
  REQUIRE(n == down.points.size());
  for (size_t i = 0; i < n; ++i) {
    CHECK(up.points[i].solution.delta == down.points[n - 1 - i].solution.delta);
    CHECK(up.points[i].solution.selected_shift() == down.points[n - 1 - i].solution.selected_shift());
  }
  CHECK(up.jumps.empty());
  CHECK(down.jumps.empty());
  CHECK(hysteresis_loop_area(up, down) == 0.0);
}

TEST_CASE("sweeps above threshold jump at the window edges") {
  const double gamma = 11.6;
  const double cp = -2018.4;
  const double step = 0.05;
  const auto w = testing::scan_three_root_window(gamma, cp, -100, 100);
  REQUIRE(w.exists);
  SweepOptions opts;
  opts.cross_ratio = 2.5;
  opts.self_kerr = -1e-14;
  const auto up = hysteresis_sweep(gamma, cp, detuning_grid(-100, 100, step, SweepDirection::Up),
                                   SweepDirection::Up, opts);
  const auto down = hysteresis_sweep(gamma, cp, detuning_grid(-100, 100, step, SweepDirection::Down),
                                     SweepDirection::Down, opts);
  REQUIRE(up.jumps.size() == 1);
  REQUIRE(down.jumps.size() == 1);
  // the occupied branch survives until its fold
  CHECK(std::abs(up.jumps[0].position - w.hi) <= step);
  CHECK(std::abs(down.jumps[0].position - w.lo) <= step);
  CHECK(hysteresis_loop_area(up, down) > 0.0);

  for (const auto* r : {&up, &down}) {
    for (const auto& p : r->points) {
      REQUIRE(p.solution.selected >= 0);
      CHECK(p.solution.stable[static_cast<size_t>(p.solution.selected)]);
      CHECK(p.cross_shift == doctest::Approx(2.5 * p.solution.selected_shift()));
      CHECK(p.excitations == doctest::Approx(p.solution.selected_shift() / (2 * -1e-14)));
    }
  }
  // max |Delta| reaches the resonant value of 60 MHz on the up sweep
  double peak = 0.0;
  for (const auto& p : up.points) peak = std::max(peak, std::abs(p.solution.selected_shift()));
  CHECK(peak == doctest::Approx(60.0).epsilon(1e-3));
}

TEST_CASE("a coarse step into a narrow window keeps the adiabatic branch") {
  for (double gamma : {2.0, 11.6}) {
    for (double factor : {1.001, 1.02, 1.3}) {
      for (double sign : {-1.0, 1.0}) {
        const double cp = sign * factor * bistability_threshold(gamma);
        const auto w = bistable_window(gamma, cp);
        REQUIRE(w.exists);
        const double mid = 0.5 * (w.lo + w.hi);
        for (auto dir : {SweepDirection::Up, SweepDirection::Down}) {
          const double s = dir == SweepDirection::Up ? 1.0 : -1.0;
          // the fine sweep follows its branch continuously into the window
          std::vector<double> fine_grid;
          for (int i = 0; i <= 80000; ++i) fine_grid.push_back(mid - s * 40.0 + s * 1e-3 * i * 0.5);
          const auto ref = hysteresis_sweep(gamma, cp, fine_grid, dir).points.back().solution.selected_shift();
          for (double step : {0.3, 1.0, 1.7, 3.0, 6.0}) {
            CAPTURE(gamma);
            CAPTURE(factor);
            CAPTURE(sign);
            CAPTURE(step);
            const std::vector<double> grid{mid - s * 40.0, mid - s * step, mid};
            const auto coarse = hysteresis_sweep(gamma, cp, grid, dir);
            CHECK(coarse.points.back().solution.selected_shift() == doctest::Approx(ref));
          }
        }
      }
    }
  }
}

TEST_CASE("sweep with separate control values") {
  const auto deltas = detuning_grid(-10, 10, 1.0, SweepDirection::Up);
  std::vector<double> controls;
  for (size_t i = 0; i < deltas.size(); ++i) controls.push_back(3.0 + 0.01 * static_cast<double>(i));
  const auto r = hysteresis_sweep(5.0, -10.0, deltas, controls, SweepDirection::Up);
  REQUIRE(r.points.size() == deltas.size());
  CHECK(r.points[4].control == controls[4]);
  CHECK(std::isnan(r.points[0].excitations));
  std::vector<double> short_controls(3, 0.0);
  CHECK_THROWS_AS(hysteresis_sweep(5.0, -10.0, deltas, short_controls, SweepDirection::Up), DomainError);
}

TEST_CASE("invalid solver input") {
  CHECK_THROWS_AS(solve_shift_cubic(0.0, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(solve_shift_cubic(0.0, -1.0, 1.0), DomainError);
  CHECK_THROWS_AS(solve_shift_cubic(NAN, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(detuning_grid(1.0, 0.0, 0.1, SweepDirection::Up), DomainError);
  CHECK_THROWS_AS(detuning_grid(0.0, 1.0, 0.0, SweepDirection::Up), DomainError);
}

TEST_CASE("grid direction and names") {
  const auto down = detuning_grid(0.0, 1.0, 0.25, SweepDirection::Down);
  REQUIRE(down.size() == 5);
  CHECK(down.front() == 1.0);
  CHECK(down.back() == 0.0);
  for (auto d : {SweepDirection::Up, SweepDirection::Down}) {
    CHECK(sweep_direction_from_string(to_string(d)) == d);
  }
}

TEST_CASE("sweep CSV carries the manifest and the documented columns") {
  const auto r = hysteresis_sweep(11.6, -2018.4, detuning_grid(0, 40, 10, SweepDirection::Up), SweepDirection::Up);
  std::ostringstream os;
  write_sweep_csv(os, r, 0xabcdefULL);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "# manifest 0000000000abcdef");
  std::getline(is, line);
  CHECK(line == "control,delta,root1,root2,root3,stable1,stable2,stable3,selected,cross_shift,excitations");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 5);
}

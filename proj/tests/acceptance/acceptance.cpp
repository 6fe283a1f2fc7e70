// One line per acceptance criterion; nonzero exit when any of them fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cmkerr/config.hpp"
#include "cmkerr/model.hpp"
#include "cmkerr/parallel.hpp"
#include "cmkerr/scenarios.hpp"
#include "cmkerr/spectrum.hpp"
#include "cmkerr/steady_state.hpp"
#include "oracles.hpp"
#include "property.hpp"

using namespace cmkerr;

namespace {

// tolerances
constexpr int kRootDraws = 1000;
constexpr double kRootTol = 1e-6;                // MHz
constexpr double kRootBudget = 5.0;              // s, solver only
constexpr double kHmsPeakShift = 150.0;          // MHz
constexpr double kHmsPeakTol = 1.0;              // MHz
constexpr double kJumpSize = 10.0;               // MHz between consecutive traces
constexpr double kRatioTol = 0.05;               // relative
constexpr double kSelfRatioTol = 0.10;           // relative
constexpr double kScenarioBudget = 60.0;         // s per scenario
constexpr double kKittelSplitting = 81.0;        // MHz
constexpr double kKittelSplitTol = 0.01;
constexpr double kHmsSplitting = 4.0;            // MHz
constexpr double kHmsSplitTol = 0.05;
constexpr double kScanCv = 0.05;
constexpr double kScanMeanTol = 0.05;
constexpr double kSweepStep = 0.05;              // MHz
constexpr double kGapTol = 0.1;                  // MHz
constexpr double kMaterialTol = 1e-12;
constexpr size_t kMinPropertyCases = 500;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

Verdict criterion_roots() {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> d(-200, 200), g(1, 20), c(-1e6, 1e6);
  struct Draw {
    double delta, gamma, cp;
  };
  std::vector<Draw> draws(kRootDraws);
  for (auto& x : draws) x = {d(rng), g(rng), c(rng)};

  const auto t0 = Clock::now();
  std::vector<ShiftSolution> sols;
  sols.reserve(draws.size());
  for (const auto& x : draws) sols.push_back(classify_stability(solve_shift_cubic(x.delta, x.gamma, x.cp)));
  const double elapsed = seconds_since(t0);

  double worst = 0.0;
  int count_mismatch = 0, three = 0;
  for (size_t i = 0; i < draws.size(); ++i) {
    const auto o = testing::scan_roots(draws[i].delta, draws[i].gamma, draws[i].cp);
    if (static_cast<size_t>(sols[i].count) != o.size()) {
      ++count_mismatch;
      continue;
    }
    if (sols[i].count == 3) ++three;
    for (int k = 0; k < sols[i].count; ++k) {
      worst = std::max(worst, std::abs(sols[i].roots[static_cast<size_t>(k)] - static_cast<double>(o[static_cast<size_t>(k)])));
    }
  }
  return {count_mismatch == 0 && worst < kRootTol && elapsed < kRootBudget,
          fmt::format("{} draws ({} with three roots), root count mismatches {}, max |error| {:.2e} MHz, "
                      "solver time {:.3f} s",
                      kRootDraws, three, count_mismatch, worst, elapsed)};
}

size_t count_jumps(const std::vector<double>& series) {
  size_t n = 0;
  for (size_t i = 1; i < series.size(); ++i) n += std::abs(series[i] - series[i - 1]) > kJumpSize;
  return n;
}

Verdict criterion_cross_shift() {
  const Scenario sc = kittel_drive_scenario();
  const std::vector<double> probe{sc.config.system.cavity.bare_frequency};
  const SpectrumMap map = synthesize_map(sc.config.system, sc.currents, probe, sc.drive);
  std::vector<double> kittel, hms;
  double peak = 0.0;
  for (const auto& s : map.states) {
    kittel.push_back(s.omega_k_eff - s.omega_k_bare);
    hms.push_back(s.omega_h_eff - s.omega_h_bare);
    peak = std::max(peak, std::abs(hms.back()));
  }
  const size_t jk = count_jumps(kittel), jh = count_jumps(hms);
  return {std::abs(peak - kHmsPeakShift) <= kHmsPeakTol && jk == 1 && jh == 1,
          fmt::format("max |HMS shift| {:.3f} MHz, jumps: Kittel {}, HMS {}", peak, jk, jh)};
}

Verdict criterion_round_trip(double& ratio_k, double& ratio_h) {
  const unsigned workers = resolve_workers(std::nullopt);
  std::string detail;
  bool ok = true;
  ratio_k = ratio_h = NAN;
  for (const Scenario& sc : {kittel_drive_scenario(), hms_drive_scenario()}) {
    const auto t0 = Clock::now();
    const ScenarioRun run = run_scenario(sc, workers);
    const double elapsed = seconds_since(t0);
    const double r = run.analysis.ratio ? run.analysis.ratio->ratio : NAN;
    const bool pass = std::isfinite(r) && rel(r, sc.true_ratio) <= kRatioTol && elapsed < kScenarioBudget;
    ok = ok && pass;
    (sc.drive.target == DriveTarget::Kittel ? ratio_k : ratio_h) = r;
    detail += fmt::format("{}: ratio {:.4f} (true {:.2f}, {:.1f} s); ", sc.name, r, sc.true_ratio, elapsed);
  }
  const double self = ratio_k / ratio_h;
  const bool self_ok = std::isfinite(self) && rel(self, 5.0) <= kSelfRatioTol;
  detail += fmt::format("K_hs/K_ks {:.4f}", self);
  return {ok && self_ok, detail};
}

// the two strongest transmission maxima
double splitting(const SystemConfig& cfg, double wk, double wh, double half_span, double step) {
  auto peaks = testing::transmission_peaks(cfg, wk, wh, cfg.cavity.bare_frequency - half_span,
                                            cfg.cavity.bare_frequency + half_span, step);
  if (peaks.size() < 2) return NAN;
  std::sort(peaks.begin(), peaks.end(), [](auto& a, auto& b) { return a.height > b.height; });
  return std::abs(peaks[0].frequency - peaks[1].frequency);
}

Verdict criterion_splitting() {
  // each magnon tuned onto the cavity with the other one decoupled
  const SystemConfig base = default_run_config().system;
  const double wc = base.cavity.bare_frequency;
  SystemConfig k = base;
  k.couplings.g_h = 0.0;
  const double sk = splitting(k, wc, 20000.0, 60.0, 0.001);
  SystemConfig h = base;
  h.couplings.g_k = 0.0;
  const double sh = splitting(h, 20000.0, wc, 10.0, 0.0005);
  return {rel(sk, kKittelSplitting) <= kKittelSplitTol && rel(sh, kHmsSplitting) <= kHmsSplitTol,
          fmt::format("Kittel-cavity {:.3f} MHz (2g = {:.1f}), HMS-cavity {:.3f} MHz (2g = {:.1f})", sk,
                      kKittelSplitting, sh, kHmsSplitting)};
}

Verdict criterion_frequency_scan() {
  const unsigned workers = resolve_workers(std::nullopt);
  std::vector<double> k, h;
  for (const Scenario& sc : drive_frequency_scan()) {
    const ScenarioRun run = run_scenario(sc, workers);
    const double r = run.analysis.ratio ? run.analysis.ratio->ratio : NAN;
    (sc.drive.target == DriveTarget::Kittel ? k : h).push_back(r);
  }
  auto stats = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    s = std::sqrt(s / static_cast<double>(v.size() - 1));
    return std::pair{m, s / std::abs(m)};
  };
  const auto [mk, cvk] = stats(k);
  const auto [mh, cvh] = stats(h);
  const bool ok = k.size() == 5 && h.size() == 5 && cvk < kScanCv && cvh < kScanCv &&
                  rel(mk, 2.49) <= kScanMeanTol && rel(mh, 0.53) <= kScanMeanTol;
  return {ok, fmt::format("Kittel mean {:.4f} cv {:.4f} (n={}), HMS mean {:.4f} cv {:.4f} (n={})", mk, cvk,
                          k.size(), mh, cvh, h.size())};
}

Verdict criterion_hysteresis() {
  const double gamma = 11.6, cp = -2018.4;
  const auto up = hysteresis_sweep(gamma, cp, detuning_grid(-100, 100, kSweepStep, SweepDirection::Up),
                                   SweepDirection::Up);
  const auto down = hysteresis_sweep(gamma, cp, detuning_grid(-100, 100, kSweepStep, SweepDirection::Down),
                                     SweepDirection::Down);
  const BistableWindow w = bistable_window(gamma, cp);
  bool ok = w.exists && up.jumps.size() == 1 && down.jumps.size() == 1;
  double gap = NAN;
  if (ok) {
    gap = std::abs(up.jumps[0].position - down.jumps[0].position);
    ok = std::abs(gap - (w.hi - w.lo)) <= kGapTol;
  }

  // below threshold both directions trace the same curve
  const double weak = -0.9 * bistability_threshold(gamma);
  const auto u2 = hysteresis_sweep(gamma, weak, detuning_grid(-50, 50, kSweepStep, SweepDirection::Up),
                                   SweepDirection::Up);
  const auto d2 = hysteresis_sweep(gamma, weak, detuning_grid(-50, 50, kSweepStep, SweepDirection::Down),
                                   SweepDirection::Down);
  bool same = u2.points.size() == d2.points.size() && u2.jumps.empty() && d2.jumps.empty();
  for (size_t i = 0; same && i < u2.points.size(); ++i) {
    same = u2.points[i].solution.selected_shift() ==
           d2.points[u2.points.size() - 1 - i].solution.selected_shift();
  }
  return {ok && same, fmt::format("jump gap {:.4f} MHz vs window width {:.4f} MHz; below threshold sweeps {}",
                                  gap, w.hi - w.lo, same ? "identical" : "differ")};
}

Verdict criterion_material() {
  const MaterialParams base;
  const double k0 = kerr_self_from_material(base);
  double worst = 0.0;
  for (double lam : {0.5, 2.0, 10.0}) {
    MaterialParams m = base;
    m.anisotropy_constant *= lam;
    worst = std::max(worst, rel(kerr_self_from_material(m), lam * k0));
    m = base;
    m.sphere_volume *= lam;
    worst = std::max(worst, rel(kerr_self_from_material(m), k0 / lam));
    m = base;
    m.saturation_magnetization *= lam;
    worst = std::max(worst, rel(kerr_self_from_material(m), k0 / (lam * lam)));
  }
  const auto x = cross_kerr_from_overlap(base);
  const double id = testing::gkh_identity_mismatch(x.g_kh, x.k_cross, base.total_spin_kittel, base.total_spin_hms);
  return {worst < kMaterialTol && id < kMaterialTol,
          fmt::format("scaling laws max rel error {:.2e}, g_kh identity mismatch {:.2e}", worst, id)};
}

Verdict criterion_properties() {
  auto all = testing::pipeline_properties(testing::kPropertyCases, testing::kPropertySeed);
  for (auto& p : testing::solver_properties(testing::kPropertyCases, testing::kPropertySeed)) all.push_back(p);
  bool ok = all.size() == 8;
  std::string detail;
  for (const auto& p : all) {
    ok = ok && p.ok() && p.cases >= kMinPropertyCases;
    detail += fmt::format("{} {}/{}", p.name, p.cases - p.failures, p.cases);
    if (!p.ok()) detail += " [" + p.first_failure + "]";
    detail += "; ";
  }
  if (!detail.empty()) detail.resize(detail.size() - 2);
  return {ok, detail};
}

}  // namespace

int main() {
  double ratio_k = NAN, ratio_h = NAN;
  const std::vector<std::function<Verdict()>> criteria = {
      criterion_roots,
      criterion_cross_shift,
      [&] { return criterion_round_trip(ratio_k, ratio_h); },
      criterion_splitting,
      criterion_frequency_scan,
      criterion_hysteresis,
      criterion_material,
      criterion_properties,
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i]();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("criterion %zu: %s %s\n", i + 1, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

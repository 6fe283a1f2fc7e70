#include "cmkerr/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

namespace cmkerr {
namespace {

double sse(std::span<const ShiftPoint> pts, const std::vector<double>& model) {
  double s = 0.0;
  for (size_t i = 0; i < pts.size(); ++i) {
    const double r = model[i] - pts[i].shift;
    s += r * r;
  }
  return s;
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json family_json(const FamilyStats& f) {
  return {{"n", f.n}, {"mean", number_or_null(f.mean)}, {"std", number_or_null(f.std)},
          {"stable", f.stable}};
}

FamilyStats family_stats(std::span<const RatioEntry> entries, RatioFamily family,
                         double threshold) {
  FamilyStats s;
  double sum = 0.0;
  for (const auto& e : entries) {
    if (e.family != family) continue;
    ++s.n;
    sum += e.ratio;
  }
  if (s.n == 0) {
    s.mean = std::numeric_limits<double>::quiet_NaN();
    s.std = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = sum / static_cast<double>(s.n);
  if (s.n < 2) {
    s.std = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double ss = 0.0;
  for (const auto& e : entries) {
    if (e.family == family) ss += (e.ratio - s.mean) * (e.ratio - s.mean);
  }
  s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  s.stable = s.mean != 0.0 && s.std / std::abs(s.mean) < threshold;
  return s;
}

}  // namespace

std::vector<double> model_shifts(std::span<const ShiftPoint> points, double gamma, double cp,
                                 SweepDirection direction, double model_step) {
  const size_t n = points.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  const bool up = direction == SweepDirection::Up;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return up ? points[a].delta < points[b].delta : points[a].delta > points[b].delta;
  });

  std::vector<double> grid;
  std::vector<size_t> slot(n);
  grid.reserve(n);
  for (size_t k = 0; k < n; ++k) {
    const double d = points[order[k]].delta;
    if (!grid.empty()) {
      const double prev = grid.back();
      if (d == prev) {
        slot[order[k]] = grid.size() - 1;
        continue;
      }
      const double gap = std::abs(d - prev);
      if (model_step > 0.0 && gap > model_step) {
        const auto extra = static_cast<size_t>(std::ceil(gap / model_step)) - 1;
        for (size_t e = 1; e <= extra; ++e) {
          grid.push_back(prev + (d - prev) * static_cast<double>(e) / static_cast<double>(extra + 1));
        }
      }
    }
    grid.push_back(d);
    slot[order[k]] = grid.size() - 1;
  }
  const SweepResult sweep = hysteresis_sweep(gamma, cp, grid, direction);
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = sweep.points[slot[i]].solution.selected_shift();
  return out;
}

FitResult fit_driven_curve(const ShiftCurve& curve, double gamma, const CurveFitOptions& opts) {
  const auto& pts = curve.points;
  if (pts.size() < 5) {
    throw DomainError(fmt::format("curve fit needs at least 5 points, got {}", pts.size()));
  }
  if (!(gamma > 0.0)) throw DomainError("linewidth must be positive");

  FitResult res;
  res.n_points = pts.size();
  double amax = 0.0;
  double dmax = 0.0;
  for (const auto& p : pts) {
    if (!std::isfinite(p.delta) || !std::isfinite(p.shift)) {
      throw DomainError("curve contains non-finite values");
    }
    amax = std::max(amax, std::abs(p.shift));
    dmax = std::max(dmax, std::abs(p.delta));
  }
  if (amax == 0.0) return res;

  auto objective = [&](double cp) {
    ++res.evaluations;
    return sse(pts, model_shifts(pts, gamma, cp, opts.direction, opts.model_step));
  };

  const double g = 0.5 * gamma;
  const double hi = 4.0 * amax * (g * g + (dmax + amax) * (dmax + amax));
  const size_t half = std::max<size_t>(opts.coarse_points / 2, 8);
  std::vector<double> grid;
  grid.reserve(2 * half + 1);
  for (size_t k = 0; k < half; ++k) {
    grid.push_back(-hi * std::pow(1e-6, static_cast<double>(k) / static_cast<double>(half - 1)));
  }
  grid.push_back(0.0);
  for (size_t k = half; k-- > 0;) {
    grid.push_back(hi * std::pow(1e-6, static_cast<double>(k) / static_cast<double>(half - 1)));
  }
  std::vector<double> vals(grid.size());
  size_t best = 0;
  for (size_t k = 0; k < grid.size(); ++k) {
    vals[k] = objective(grid[k]);
    if (vals[k] < vals[best]) best = k;
  }

  double a = grid[best > 0 ? best - 1 : 0];
  double b = grid[std::min(best + 1, grid.size() - 1)];
  double best_cp = grid[best];
  double best_val = vals[best];

  constexpr double invphi = 0.6180339887498949;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = objective(x1);
  double f2 = objective(x2);
  size_t it = 0;
  const double scale = std::max(std::abs(best_cp), hi * 1e-12);
  while (std::abs(b - a) > opts.relative_tolerance * scale && it < opts.max_iterations) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = objective(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = objective(x2);
    }
    ++it;
  }
  for (auto [x, f] : {std::pair{x1, f1}, std::pair{x2, f2}}) {
    if (f < best_val) {
      best_val = f;
      best_cp = x;
    }
  }
  const double rms_now = std::sqrt(best_val / static_cast<double>(pts.size()));
  if (std::abs(b - a) > opts.relative_tolerance * scale) {
    throw FitError(fmt::format("cP search did not converge in {} iterations", it), best_cp, rms_now);
  }

  // Parabolic step through the final bracket.
  const double h = std::max(std::abs(b - a), 1e-9 * scale);
  const double fl = objective(best_cp - h);
  const double fr = objective(best_cp + h);
  const double curv = fl - 2.0 * best_val + fr;
  if (curv > 0.0) {
    const double x = best_cp + 0.5 * h * (fl - fr) / curv;
    if (std::abs(x - best_cp) <= h) {
      const double fx = objective(x);
      if (fx < best_val) {
        best_val = fx;
        best_cp = x;
      }
    }
  }
  if (!std::isfinite(best_cp) || !std::isfinite(best_val)) {
    throw FitError("cP search produced a non-finite estimate", best_cp, rms_now);
  }
  res.cp_estimate = best_cp;
  res.residual_rms = std::sqrt(best_val / static_cast<double>(pts.size()));
  return res;
}

RatioFit fit_ratio(const ShiftCurve& driven, const ShiftCurve& undriven,
                   const RatioFitOptions& opts) {
  std::vector<ShiftPoint> u = undriven.points;
  std::sort(u.begin(), u.end(), [](const auto& a, const auto& b) { return a.delta < b.delta; });

  double sxy = 0.0;
  double sxx = 0.0;
  double amax = 0.0;
  std::vector<std::pair<double, double>> pairs;
  for (const auto& p : driven.points) {
    if (u.empty() || p.delta < u.front().delta || p.delta > u.back().delta) continue;
    auto it = std::lower_bound(u.begin(), u.end(), p.delta,
                               [](const ShiftPoint& s, double d) { return s.delta < d; });
    double y = 0.0;
    if (it->delta == p.delta) {
      y = it->shift;
    } else {
      const auto& r = *it;
      const auto& l = *(it - 1);
      if (r.delta - l.delta > opts.max_gap) continue;
      const double t = (p.delta - l.delta) / (r.delta - l.delta);
      y = l.shift + t * (r.shift - l.shift);
    }
    pairs.emplace_back(p.shift, y);
    sxy += p.shift * y;
    sxx += p.shift * p.shift;
    amax = std::max(amax, std::abs(p.shift));
  }
  if (pairs.size() < opts.min_points) {
    throw NumericalError(fmt::format("ratio fit needs at least {} overlapping points, got {}",
                                     opts.min_points, pairs.size()));
  }
  if (amax < opts.min_signal || sxx == 0.0) {
    throw NumericalError(fmt::format(
        "insufficient signal: driven shift never exceeds {} MHz (max {:.3g})", opts.min_signal,
        amax));
  }
  RatioFit fit;
  fit.ratio = sxy / sxx;
  fit.n_pairs = pairs.size();
  double ss = 0.0;
  for (const auto& [x, y] : pairs) ss += (y - fit.ratio * x) * (y - fit.ratio * x);
  fit.residual_rms = std::sqrt(ss / static_cast<double>(pairs.size()));
  return fit;
}

RatioReport ratio_stability_report(std::span<const RatioEntry> entries, double stability_threshold) {
  RatioReport r;
  r.entries.assign(entries.begin(), entries.end());
  r.stability_threshold = stability_threshold;
  r.kittel = family_stats(entries, RatioFamily::Kittel, stability_threshold);
  r.hms = family_stats(entries, RatioFamily::HMS, stability_threshold);
  return r;
}

double derived_self_kerr_ratio(double ratio_kittel, double ratio_hms) {
  if (ratio_hms == 0.0) throw DomainError("HMS ratio is zero; K_hs/K_ks is undefined");
  return ratio_kittel / ratio_hms;
}

std::string fit_result_json(const FitResult& r, int indent) {
  nlohmann::json j = {{"cp_estimate_MHz3", r.cp_estimate},
                      {"ratio", number_or_null(r.ratio)},
                      {"residual_rms_MHz", r.residual_rms},
                      {"n_points", r.n_points},
                      {"drive_frequency_MHz", r.drive_frequency}};
  return j.dump(indent);
}

std::string ratio_report_json(const RatioReport& r, int indent) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"drive_frequency_MHz", e.drive_frequency},
                       {"family", e.family == RatioFamily::Kittel ? "kittel" : "hms"},
                       {"ratio", e.ratio}});
  }
  nlohmann::json j = {{"entries", entries},
                      {"kittel", family_json(r.kittel)},
                      {"hms", family_json(r.hms)},
                      {"stability_threshold", r.stability_threshold}};
  if (r.kittel.n > 0 && r.hms.n > 0 && r.hms.mean != 0.0) {
    j["k_hs_over_k_ks"] = r.kittel.mean / r.hms.mean;
  }
  return j.dump(indent);
}

void write_fit_table(std::ostream& os, const FitResult& r) {
  os << fmt::format("{:<22}{:>16}\n", "quantity", "value");
  os << fmt::format("{:<22}{:>16.6g}\n", "drive frequency MHz", r.drive_frequency);
  os << fmt::format("{:<22}{:>16.6g}\n", "cP MHz^3", r.cp_estimate);
  os << fmt::format("{:<22}{:>16.6g}\n", "ratio", r.ratio);
  os << fmt::format("{:<22}{:>16.4g}\n", "residual rms MHz", r.residual_rms);
  os << fmt::format("{:<22}{:>16}\n", "points", r.n_points);
}

void write_ratio_table(std::ostream& os, const RatioReport& r) {
  os << fmt::format("{:<10}{:>14}{:>12}\n", "family", "drive MHz", "ratio");
  for (const auto& e : r.entries) {
    os << fmt::format("{:<10}{:>14.6g}{:>12.5f}\n",
                      e.family == RatioFamily::Kittel ? "kittel" : "hms", e.drive_frequency,
                      e.ratio);
  }
  auto line = [&](const char* name, const FamilyStats& f) {
    os << fmt::format("{:<10} n={} mean={:.5f} std={:.5f} {}\n", name, f.n, f.mean, f.std,
                      f.stable ? "stable" : "not stable");
  };
  line("kittel", r.kittel);
  line("hms", r.hms);
}

}  // namespace cmkerr

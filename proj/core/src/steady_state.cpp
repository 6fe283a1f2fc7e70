#include "cmkerr/steady_state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "cmkerr/error.hpp"

namespace cmkerr {
namespace {

constexpr double kMergeDistance = 1e-4;      // MHz
constexpr double kMergeDiscriminant = 1e-9;  // normalized

struct Depressed {
  double shift;  // Delta = t - shift
  double p;
  double q;
};

Depressed depress(double delta, double gamma, double cp) {
  const double g = 0.5 * gamma;
  return {2.0 * delta / 3.0, g * g - delta * delta / 3.0,
          -2.0 * delta * delta * delta / 27.0 - 2.0 * delta * g * g / 3.0 - cp};
}

// 4p^3 + 27q^2 divided by its largest term; negative means three real roots.
double normalized_discriminant(const Depressed& d) {
  const double a = 4.0 * d.p * d.p * d.p;
  const double b = 27.0 * d.q * d.q;
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : (a + b) / scale;
}

double polish(double x, double delta, double gamma, double cp) {
  const double g2 = 0.25 * gamma * gamma;
  for (int i = 0; i < 2; ++i) {
    const double u = x + delta;
    const double f = (u * u + g2) * x - cp;
    const double df = 3.0 * x * x + 4.0 * delta * x + delta * delta + g2;
    if (df == 0.0) break;
    const double next = x - f / df;
    if (!std::isfinite(next)) break;
    const double fn = shift_residual(next, delta, gamma, cp);
    if (std::abs(fn) >= std::abs(f)) break;
    x = next;
  }
  return x;
}

bool opposite_sides(double a, double b, double pivot) {
  return (a - pivot) * (b - pivot) < 0.0;
}

}  // namespace

double ShiftSolution::selected_shift() const {
  if (selected < 0 || selected >= count) {
    throw DomainError("no branch selected");
  }
  return roots[static_cast<size_t>(selected)];
}

double shift_residual(double shift, double delta, double gamma, double cp) {
  const double u = shift + delta;
  return (u * u + 0.25 * gamma * gamma) * shift - cp;
}

ShiftSolution solve_shift_cubic(double delta, double gamma, double cp) {
  if (!(gamma > 0.0)) {
    throw DomainError(fmt::format("linewidth must be positive (got {})", gamma));
  }
  if (!std::isfinite(delta) || !std::isfinite(cp) || !std::isfinite(gamma)) {
    throw DomainError("non-finite detuning, linewidth or drive");
  }
  ShiftSolution sol;
  sol.delta = delta;
  if (cp == 0.0) {
    sol.count = 1;
    sol.roots[0] = 0.0;
    return classify_stability(sol);
  }

  const Depressed d = depress(delta, gamma, cp);
  const double disc = normalized_discriminant(d);
  std::array<double, 3> t{};
  int n = 0;
  if (disc < 0.0) {
    // Three real roots; p < 0 here.
    const double m = 2.0 * std::sqrt(-d.p / 3.0);
    double arg = 3.0 * d.q / (d.p * m);
    arg = std::clamp(arg, -1.0, 1.0);
    const double theta = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k) {
      t[static_cast<size_t>(k)] = m * std::cos(theta - 2.0 * std::numbers::pi * k / 3.0);
    }
    n = 3;
  } else {
    // One real root (or a degenerate multiple root); cancellation-free Cardano.
    const double s = std::sqrt(std::max(0.0, 0.25 * d.q * d.q + d.p * d.p * d.p / 27.0));
    const double a = -std::copysign(std::cbrt(0.5 * std::abs(d.q) + s), d.q);
    t[0] = a == 0.0 ? 0.0 : a - d.p / (3.0 * a);
    n = 1;
  }

  for (int k = 0; k < n; ++k) {
    auto& r = sol.roots[static_cast<size_t>(k)];
    r = polish(t[static_cast<size_t>(k)] - d.shift, delta, gamma, cp);
  }
  std::sort(sol.roots.begin(), sol.roots.begin() + n);
  sol.count = n;

  if (n == 3 && std::abs(disc) < kMergeDiscriminant) {
    // Near a fold: collapse the two roots that have become indistinguishable.
    for (int k = 0; k + 1 < sol.count; ++k) {
      if (sol.roots[static_cast<size_t>(k + 1)] - sol.roots[static_cast<size_t>(k)] < kMergeDistance) {
        sol.roots[static_cast<size_t>(k)] =
            0.5 * (sol.roots[static_cast<size_t>(k)] + sol.roots[static_cast<size_t>(k + 1)]);
        for (int j = k + 1; j + 1 < sol.count; ++j) {
          sol.roots[static_cast<size_t>(j)] = sol.roots[static_cast<size_t>(j + 1)];
        }
        --sol.count;
        break;
      }
    }
  }
  return classify_stability(sol);
}

ShiftSolution classify_stability(ShiftSolution sol) {
  sol.stable = {false, false, false};
  switch (sol.count) {
    case 1:
      sol.stable[0] = true;
      break;
    case 2: {
      // Merged double root: the simple root is the surviving stable branch.
      // It sits on the far side of the pair from the double root.
      const double mid = -2.0 * sol.delta / 3.0;
      const bool low_is_double = std::abs(sol.roots[0] - mid) > std::abs(sol.roots[1] - mid)
                                     ? false
                                     : true;
      sol.stable[low_is_double ? 1 : 0] = true;
      break;
    }
    case 3:
      sol.stable = {true, false, true};
      break;
    default:
      break;
  }
  return sol;
}

double cross_shift(double driven_shift, double ratio) { return ratio * driven_shift; }

double excitation_number(double shift, double kerr) {
  if (kerr == 0.0) {
    throw DomainError("Kerr coefficient must be non-zero");
  }
  if (shift == 0.0) {
    return 0.0;
  }
  if ((shift > 0.0) != (kerr > 0.0)) {
    throw DomainError(fmt::format("shift {} and Kerr coefficient {} disagree in sign", shift, kerr));
  }
  return shift / (2.0 * kerr);
}

std::string_view to_string(SweepDirection d) { return d == SweepDirection::Up ? "up" : "down"; }

SweepDirection sweep_direction_from_string(std::string_view text) {
  if (text == "up") return SweepDirection::Up;
  if (text == "down") return SweepDirection::Down;
  throw DomainError("sweep direction must be 'up' or 'down'");
}

SweepResult hysteresis_sweep(double gamma, double cp, std::span<const double> deltas,
                             SweepDirection direction, const SweepOptions& opts) {
  return hysteresis_sweep(gamma, cp, deltas, deltas, direction, opts);
}

namespace {

// Index (0 or 2) of the outer root a sweep occupies after crossing into the
// three-root window from outside. The pair born at the fold is the middle root
// and one outer root; the old branch is the other outer one, on the simple
// root's side of the double root. Ranks do not change inside the window, so
// this holds however coarse the step across the fold was.
int entering_branch(double gamma, double cp, SweepDirection direction) {
  const BistableWindow w = bistable_window(gamma, cp);
  const double edge = direction == SweepDirection::Up ? w.lo : w.hi;
  const double g2 = 0.25 * gamma * gamma;
  // critical points of ((D + d)^2 + g^2) D: 3D^2 + 4dD + d^2 + g^2 = 0
  const double disc = std::sqrt(std::max(0.0, edge * edge - 3.0 * g2));
  double dbl = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (double x : {(-2.0 * edge + disc) / 3.0, (-2.0 * edge - disc) / 3.0}) {
    const double f = std::abs(((x + edge) * (x + edge) + g2) * x - cp);
    if (f < best) {
      best = f;
      dbl = x;
    }
  }
  const double simple = -2.0 * edge - 2.0 * dbl;  // roots sum to -2 delta
  return simple > dbl ? 2 : 0;
}

}  // namespace

SweepResult hysteresis_sweep(double gamma, double cp, std::span<const double> deltas,
                             std::span<const double> controls, SweepDirection direction,
                             const SweepOptions& opts) {
  if (controls.size() != deltas.size()) {
    throw DomainError("control and detuning grids differ in length");
  }
  for (size_t i = 1; i < deltas.size(); ++i) {
    const bool ok = direction == SweepDirection::Up ? deltas[i] > deltas[i - 1]
                                                    : deltas[i] < deltas[i - 1];
    if (!ok) {
      throw DomainError(fmt::format("detuning grid is not monotone in the {} direction at index {}",
                                    to_string(direction), i));
    }
  }

  SweepResult out;
  out.direction = direction;
  out.points.reserve(deltas.size());

  for (size_t i = 0; i < deltas.size(); ++i) {
    ShiftSolution sol = solve_shift_cubic(deltas[i], gamma, cp);
    int pick = -1;
    if (out.points.empty()) {
      double best = std::numeric_limits<double>::infinity();
      for (int k = 0; k < sol.count; ++k) {
        if (sol.stable[static_cast<size_t>(k)] && std::abs(sol.roots[static_cast<size_t>(k)]) < best) {
          best = std::abs(sol.roots[static_cast<size_t>(k)]);
          pick = k;
        }
      }
    } else {
      const ShiftSolution& prev = out.points.back().solution;
      const double prev_shift = prev.selected_shift();
      if (prev.count == 3 && sol.count == 3) {
        pick = prev.selected;  // same branch keeps its rank
      } else if (prev.count == 1 && sol.count == 3) {
        pick = entering_branch(gamma, cp, direction);
      } else {
        double best = std::numeric_limits<double>::infinity();
        for (int k = 0; k < sol.count; ++k) {
          const double r = sol.roots[static_cast<size_t>(k)];
          if (sol.stable[static_cast<size_t>(k)] && std::abs(r - prev_shift) < best) {
            best = std::abs(r - prev_shift);
            pick = k;
          }
        }
      }
      const double now = sol.roots[static_cast<size_t>(pick)];
      // The branch vanished if we landed across the previous unstable root.
      if (prev.count >= 2) {
        double pivot = std::numeric_limits<double>::quiet_NaN();
        for (int k = 0; k < prev.count; ++k) {
          if (!prev.stable[static_cast<size_t>(k)]) pivot = prev.roots[static_cast<size_t>(k)];
        }
        if (std::isfinite(pivot) && opposite_sides(prev_shift, now, pivot)) {
          out.jumps.push_back({i, 0.5 * (deltas[i - 1] + deltas[i]), prev_shift, now});
        }
      }
    }
    sol.selected = pick;
    SweepPoint pt;
    pt.control = controls[i];
    pt.solution = sol;
    const double shift = sol.selected_shift();
    pt.cross_shift = cross_shift(shift, opts.cross_ratio);
    pt.excitations = opts.self_kerr == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                           : excitation_number(shift, opts.self_kerr);
    out.points.push_back(pt);
  }
  return out;
}

std::vector<double> detuning_grid(double lo, double hi, double step, SweepDirection direction) {
  if (!(step > 0.0) || !(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw DomainError("detuning grid needs lo <= hi and step > 0");
  }
  const auto n = static_cast<size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> g(n);
  for (size_t i = 0; i < n; ++i) {
    g[i] = lo + step * static_cast<double>(i);
  }
  if (direction == SweepDirection::Down) {
    std::reverse(g.begin(), g.end());
  }
  return g;
}

double hysteresis_loop_area(const SweepResult& up, const SweepResult& down) {
  if (up.points.size() != down.points.size()) {
    throw DomainError("sweeps must share one grid");
  }
  const size_t n = up.points.size();
  auto at = [&](const SweepResult& r, size_t i) -> const SweepPoint& {
    return r.direction == SweepDirection::Up ? r.points[i] : r.points[n - 1 - i];
  };
  double area = 0.0;
  for (size_t i = 1; i < n; ++i) {
    const SweepPoint& u0 = at(up, i - 1);
    const SweepPoint& u1 = at(up, i);
    const SweepPoint& d0 = at(down, i - 1);
    const SweepPoint& d1 = at(down, i);
    if (u0.solution.delta != d0.solution.delta || u1.solution.delta != d1.solution.delta) {
      throw DomainError("sweeps must share one grid");
    }
    const double a = std::abs(u0.solution.selected_shift() - d0.solution.selected_shift());
    const double b = std::abs(u1.solution.selected_shift() - d1.solution.selected_shift());
    area += 0.5 * (a + b) * std::abs(u1.solution.delta - u0.solution.delta);
  }
  return area;
}

double bistability_threshold(double gamma) {
  const double g = 0.5 * gamma;
  return 8.0 * g * g * g / (3.0 * std::sqrt(3.0));
}

BistableWindow bistable_window(double gamma, double cp) {
  if (!(gamma > 0.0)) {
    throw DomainError("linewidth must be positive");
  }
  BistableWindow w;
  if (std::abs(cp) <= bistability_threshold(gamma)) {
    return w;
  }
  // Fold points are double roots. With m = |D| >= g and r = sqrt(m^2 - g^2),
  // f'(D) = 0 gives delta = -2D + e r and |cP| = 2 m^2 (m - e s r), s = sign(cP).
  // The fold curve splits into three pieces monotone in m; |cP| crosses the
  // outer piece once and exactly one of the two inner pieces.
  const double g = 0.5 * gamma;
  const double s = cp > 0.0 ? 1.0 : -1.0;
  const double target = std::abs(cp);
  const double m_crit = 2.0 * g / std::sqrt(3.0);
  auto mag = [&](double m, double k) {  // k = +1: m - r, k = -1: m + r
    const double r = std::sqrt(std::max(0.0, m * m - g * g));
    return 2.0 * m * m * (m - k * r);
  };
  auto delta_of = [&](double m, double k) {
    const double r = std::sqrt(std::max(0.0, m * m - g * g));
    // m - k r = m - e s r  =>  e = k s
    return -2.0 * s * m + k * s * r;
  };
  auto solve = [&](double lo, double hi, double k) {
    const bool increasing = mag(hi, k) > mag(lo, k);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((mag(mid, k) < target) == increasing) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return delta_of(0.5 * (lo + hi), k);
  };
  double outer_hi = 2.0 * m_crit;
  while (mag(outer_hi, 1.0) < target) outer_hi *= 2.0;
  const double a = solve(m_crit, outer_hi, 1.0);
  double b = 0.0;
  if (target <= 2.0 * g * g * g) {
    b = solve(g, m_crit, 1.0);
  } else {
    double hi = 2.0 * g;
    while (mag(hi, -1.0) < target) hi *= 2.0;
    b = solve(g, hi, -1.0);
  }
  w.exists = true;
  w.lo = std::min(a, b);
  w.hi = std::max(a, b);
  return w;
}

void write_sweep_csv(std::ostream& os, const SweepResult& r, std::uint64_t manifest_hash) {
  os << fmt::format("# manifest {:016x}\n", manifest_hash);
  os << "control,delta,root1,root2,root3,stable1,stable2,stable3,selected,cross_shift,excitations\n";
  for (const SweepPoint& p : r.points) {
    const ShiftSolution& s = p.solution;
    os << fmt::format("{:.10g},{:.10g}", p.control, s.delta);
    for (int k = 0; k < 3; ++k) {
      os << ',';
      if (k < s.count) os << fmt::format("{:.12g}", s.roots[static_cast<size_t>(k)]);
    }
    for (int k = 0; k < 3; ++k) {
      os << ',';
      if (k < s.count) os << (s.stable[static_cast<size_t>(k)] ? 1 : 0);
    }
    os << ',' << s.selected + 1;
    os << fmt::format(",{:.12g},{:.12g}\n", p.cross_shift, p.excitations);
  }
}

}  // namespace cmkerr

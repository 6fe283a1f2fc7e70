#include "cmkerr/extract.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "cmkerr/error.hpp"

namespace cmkerr {
namespace {

constexpr double kTinyPower = 1e-300;

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

// Least-squares quadratic through y[first .. first+n) evaluated at the given indices.
void edge_fit(std::span<const double> y, size_t first, size_t n, size_t eval_lo, size_t eval_hi,
              std::vector<double>& out) {
  const double c = static_cast<double>(first) + 0.5 * static_cast<double>(n - 1);
  double s[5] = {0, 0, 0, 0, 0};
  double t[3] = {0, 0, 0};
  for (size_t k = 0; k < n; ++k) {
    const double x = static_cast<double>(first + k) - c;
    double p = 1.0;
    for (int e = 0; e < 5; ++e) {
      s[e] += p;
      if (e < 3) t[e] += p * y[first + k];
      p *= x;
    }
  }
  // Normal equations [s0 s1 s2; s1 s2 s3; s2 s3 s4] a = t, Cramer's rule.
  const double m[3][3] = {{s[0], s[1], s[2]}, {s[1], s[2], s[3]}, {s[2], s[3], s[4]}};
  auto det3 = [](const double a[3][3]) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
           a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  };
  const double d = det3(m);
  double a[3];
  for (int col = 0; col < 3; ++col) {
    double r[3][3];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) r[i][j] = j == col ? t[i] : m[i][j];
    }
    a[col] = det3(r) / d;
  }
  for (size_t i = eval_lo; i < eval_hi; ++i) {
    const double x = static_cast<double>(i) - c;
    out[i] = a[0] + x * (a[1] + x * a[2]);
  }
}

double local_step(std::span<const double> f, size_t i) {
  if (f.size() < 2) return 0.0;
  if (i == 0) return f[1] - f[0];
  if (i + 1 >= f.size()) return f[i] - f[i - 1];
  return 0.5 * (f[i + 1] - f[i - 1]);
}

double interpolate_crossing(std::span<const double> f, std::span<const double> r, size_t inside,
                            size_t outside, double level) {
  const double a = r[inside];
  const double b = r[outside];
  if (b == a) return f[outside];
  const double t = (level - a) / (b - a);
  return f[inside] + t * (f[outside] - f[inside]);
}

}  // namespace

std::vector<double> quadratic_baseline(std::span<const double> y, size_t window) {
  const size_t n = y.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  if (window % 2 == 0) --window;
  if (window > n) window = n % 2 == 1 ? n : n - 1;
  if (window < 5) {
    std::copy(y.begin(), y.end(), out.begin());
    return out;
  }
  const size_t m = window / 2;
  const double md = static_cast<double>(m);
  const double norm = (2.0 * md - 1.0) * (2.0 * md + 1.0) * (2.0 * md + 3.0);
  std::vector<double> coef(window);
  for (size_t k = 0; k < window; ++k) {
    const double kk = static_cast<double>(k) - md;
    coef[k] = 3.0 * (3.0 * md * md + 3.0 * md - 1.0 - 5.0 * kk * kk) / norm;
  }
  for (size_t i = m; i + m < n; ++i) {
    double acc = 0.0;
    for (size_t k = 0; k < window; ++k) acc += coef[k] * y[i - m + k];
    out[i] = acc;
  }
  edge_fit(y, 0, window, 0, m, out);
  edge_fit(y, n - window, window, n - m, n, out);
  return out;
}

DipSet find_dips(const ProbeTrace& trace, double min_prominence) {
  DipOptions o;
  o.min_prominence = min_prominence;
  return find_dips(trace, o);
}

DipSet find_dips(const ProbeTrace& trace, const DipOptions& opts) {
  const auto f = trace.probe_frequencies;
  const auto s = trace.s21_sq;
  if (f.empty() || f.size() != s.size()) {
    throw DomainError("trace is empty or its grid and data differ in length");
  }
  DipSet out;
  out.control = trace.control;
  const size_t n = f.size();
  if (n < 3) return out;

  std::vector<double> r(n);
  for (size_t i = 0; i < n; ++i) r[i] = 10.0 * std::log10(std::max(s[i], kTinyPower));
  const double step = (f.back() - f.front()) / static_cast<double>(n - 1);
  const auto window = static_cast<size_t>(std::lround(opts.baseline_window / step)) | 1u;
  if (opts.smooth_window > 0.0) {
    const auto w = static_cast<size_t>(std::lround(opts.smooth_window / step)) | 1u;
    if (w >= 5) r = quadratic_baseline(r, w);
  }
  const auto base = quadratic_baseline(r, window);
  for (size_t i = 0; i < n; ++i) r[i] -= base[i];

  double threshold = 0.0;
  if (opts.min_prominence) {
    threshold = *opts.min_prominence;
  } else {
    const double med = median(r);
    std::vector<double> dev(n);
    for (size_t i = 0; i < n; ++i) dev[i] = std::abs(r[i] - med);
    threshold = 3.0 * median(std::move(dev));
  }
  threshold = std::max(threshold, opts.prominence_floor);

  for (size_t i = 1; i + 1 < n; ++i) {
    if (!(r[i] < r[i - 1] && r[i] <= r[i + 1])) continue;
    // Plateau: take its centre sample.
    size_t j = i;
    while (j + 1 < n && r[j + 1] == r[i]) ++j;
    if (j + 1 >= n || r[j + 1] < r[i]) {
      i = j;
      continue;
    }
    const size_t c = i + (j - i) / 2;

    size_t lo = i;
    double left_max = r[i];
    while (lo > 0 && r[lo - 1] >= r[i]) left_max = std::max(left_max, r[--lo]);
    size_t hi = j;
    double right_max = r[i];
    while (hi + 1 < n && r[hi + 1] >= r[i]) right_max = std::max(right_max, r[++hi]);
    const double prominence = std::min(left_max, right_max) - r[i];
    i = j;
    if (prominence < threshold) continue;

    Dip d;
    d.depth = prominence;
    double offset = 0.0;
    if (c > 0 && c + 1 < n) {
      const double a = r[c - 1];
      const double b = r[c];
      const double e = r[c + 1];
      const double denom = a - 2.0 * b + e;
      if (denom > 0.0) offset = std::clamp(0.5 * (a - e) / denom, -0.5, 0.5);
    }
    d.frequency = f[c] + offset * local_step(f, c);

    const double level = r[c] + 0.5 * prominence;
    size_t a = c;
    while (a > 0 && r[a] < level) --a;
    size_t b = c;
    while (b + 1 < n && r[b] < level) ++b;
    const double left = r[a] >= level ? interpolate_crossing(f, r, a + 1, a, level) : f[a];
    const double right = r[b] >= level ? interpolate_crossing(f, r, b - 1, b, level) : f[b];
    d.width = right - left;
    out.dips.push_back(d);
  }
  return out;
}

double exclusion_half_width(const SystemConfig& cfg, ModeLabel mode) {
  switch (mode) {
    case ModeLabel::Kittel:
      return 2.0 * cfg.couplings.g_k + cfg.cavity.linewidth + cfg.kittel.linewidth;
    case ModeLabel::HMS:
      return 2.0 * cfg.couplings.g_h + cfg.cavity.linewidth + cfg.hms.linewidth;
    default:
      throw DomainError("exclusion band is defined for magnon modes only");
  }
}

double dressed_cavity_frequency(double omega_c, double omega_k, double omega_h, double g_k,
                                double g_h) {
  const double gk2 = g_k * g_k;
  const double gh2 = g_h * g_h;
  // Secular equation x - wc - gk^2/(x - wk) - gh^2/(x - wh) = 0; one root per
  // interval between the poles, each found by bisection.
  const auto f = [&](double x) { return x - omega_c - gk2 / (x - omega_k) - gh2 / (x - omega_h); };
  std::vector<double> poles;
  if (gk2 > 0.0) poles.push_back(omega_k);
  if (gh2 > 0.0) poles.push_back(omega_h);
  if (poles.empty()) return omega_c;
  std::sort(poles.begin(), poles.end());
  const double reach = std::abs(omega_c - poles.front()) + std::abs(omega_c - poles.back()) +
                       std::abs(g_k) + std::abs(g_h) + 1.0;
  std::vector<std::pair<double, double>> brackets;
  brackets.emplace_back(poles.front() - reach, poles.front());
  for (size_t i = 1; i < poles.size(); ++i) brackets.emplace_back(poles[i - 1], poles[i]);
  brackets.emplace_back(poles.back(), poles.back() + reach);

  double best = omega_c;
  double best_mix = std::numeric_limits<double>::infinity();
  for (auto [a, b] : brackets) {
    if (!(b > a)) continue;  // coincident poles
    const double eps = 1e-12 * std::max(1.0, std::abs(b));
    a += eps;
    b -= eps;
    // f rises from -inf to +inf across every bracket
    for (int it = 0; it < 200 && b - a > 1e-12 * std::max(1.0, std::abs(a)); ++it) {
      const double mid = 0.5 * (a + b);
      (f(mid) < 0.0 ? a : b) = mid;
    }
    const double root = 0.5 * (a + b);
    // cavity share of the normal mode is 1 / (1 + sum g^2/(x - w)^2)
    const double mix = gk2 / ((root - omega_k) * (root - omega_k)) +
                       gh2 / ((root - omega_h) * (root - omega_h));
    if (mix < best_mix) {
      best_mix = mix;
      best = root;
    }
  }
  return best;
}

namespace {

double cavity_centre(const AssignOptions& o, const FieldCalibration& cal, double control) {
  if (o.cavity_g_k == 0.0 && o.cavity_g_h == 0.0) return *o.cavity_frequency;
  return dressed_cavity_frequency(*o.cavity_frequency,
                                  mode_frequency_at_current(cal, ModeLabel::Kittel, control),
                                  mode_frequency_at_current(cal, ModeLabel::HMS, control),
                                  o.cavity_g_k, o.cavity_g_h);
}

struct Candidate {
  size_t trace;
  size_t dip;
  double shift;
  double cost;
};

// Minimum-cost path through the per-trace candidates; returns chosen (trace, dip).
std::vector<std::pair<size_t, size_t>> track_branch(const std::vector<DipSet>& sets,
                                                    const FieldCalibration& cal, ModeLabel label,
                                                    const AssignOptions& o, size_t& excluded) {
  const size_t n = sets.size();
  const double band = label == ModeLabel::Kittel ? o.exclusion_kittel : o.exclusion_hms;

  std::vector<std::vector<Candidate>> cand(n);
  for (size_t i = 0; i < n; ++i) {
    const double pred = mode_frequency_at_current(cal, label, sets[i].control);
    const auto& dips = sets[i].dips;
    const double centre = o.cavity_frequency ? cavity_centre(o, cal, sets[i].control) : 0.0;
    const auto usable = [&](const Dip& d) {
      return std::abs(d.frequency - pred) <= o.tolerance && d.width >= o.min_width &&
             !(o.cavity_frequency && std::abs(d.frequency - centre) <= band);
    };
    double trace_max = 0.0;
    for (const Dip& d : dips) {
      if (usable(d)) trace_max = std::max(trace_max, d.depth);
    }
    for (size_t k = 0; k < dips.size(); ++k) {
      const Dip& d = dips[k];
      if (std::abs(d.frequency - pred) > o.tolerance || d.width < o.min_width) continue;
      if (!usable(d)) {
        ++excluded;
        continue;
      }
      // Strength relative to the strongest dip nearby, excluded ones included,
      // so baseline side lobes of a stronger feature stay expensive.
      // The trace-wide floor catches lobes sitting just outside the neighbourhood.
      double strongest = std::max(d.depth, o.relevance_floor * trace_max);
      bool shadowed = false;
      for (const Dip& e : dips) {
        if (std::abs(e.frequency - d.frequency) > o.neighbourhood) continue;
        strongest = std::max(strongest, e.depth);
        shadowed = shadowed || (e.depth > d.depth && usable(e));
      }
      // A mode leaves one dip; a deeper usable one next to it is the better claim.
      if (shadowed && o.one_per_neighbourhood) continue;
      const double rel = d.depth / strongest;
      const double shift = d.frequency - pred;
      const double cost = o.shift_weight * std::abs(shift) + o.prominence_weight * (1.0 - rel);
      // Costlier than a miss, so a skip nearly always wins; noisy traces carry hundreds.
      if (cost >= o.miss_penalty) continue;
      cand[i].push_back({i, k, shift, cost});
    }
  }

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best(n);
  std::vector<std::vector<std::pair<long, long>>> from(n);
  for (size_t i = 0; i < n; ++i) {
    best[i].assign(cand[i].size(), inf);
    from[i].assign(cand[i].size(), {-1, -1});
    for (size_t k = 0; k < cand[i].size(); ++k) {
      double b = static_cast<double>(i) * o.miss_penalty;
      std::pair<long, long> arg{-1, -1};
      const size_t first = i > o.max_gap ? i - o.max_gap : 0;
      for (size_t p = first; p < i; ++p) {
        const double skip = static_cast<double>(i - p - 1) * o.miss_penalty;
        for (size_t q = 0; q < cand[p].size(); ++q) {
          const double rate = std::abs(cand[i][k].shift - cand[p][q].shift) /
                              static_cast<double>(i - p);
          const double step = std::min(rate / o.continuity_scale, o.jump_penalty);
          const double v = best[p][q] + skip + step;
          if (v < b) {
            b = v;
            arg = {static_cast<long>(p), static_cast<long>(q)};
          }
        }
      }
      best[i][k] = b + cand[i][k].cost;
      from[i][k] = arg;
    }
  }

  double total = static_cast<double>(n) * o.miss_penalty;
  std::pair<long, long> end{-1, -1};
  for (size_t i = 0; i < n; ++i) {
    for (size_t k = 0; k < cand[i].size(); ++k) {
      const double v = best[i][k] + static_cast<double>(n - 1 - i) * o.miss_penalty;
      if (v < total) {
        total = v;
        end = {static_cast<long>(i), static_cast<long>(k)};
      }
    }
  }
  std::vector<std::pair<size_t, size_t>> path;
  while (end.first >= 0) {
    const auto i = static_cast<size_t>(end.first);
    const auto k = static_cast<size_t>(end.second);
    path.emplace_back(i, cand[i][k].dip);
    end = from[i][k];
  }
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

AssignResult assign_modes(std::vector<DipSet> sets, const FieldCalibration& cal,
                          const AssignOptions& opts) {
  if (!(opts.tolerance > 0.0) || !(opts.continuity_scale > 0.0) || opts.max_gap == 0) {
    throw DomainError("assignment tolerance, continuity scale and gap must be positive");
  }
  for (size_t i = 1; i < sets.size(); ++i) {
    if (sets[i].control == sets[i - 1].control) {
      throw DomainError(fmt::format("duplicate control value {}", sets[i].control));
    }
  }
  AssignResult res;
  for (auto& s : sets) {
    for (auto& d : s.dips) d.label = ModeLabel::Unassigned;
  }

  const auto kittel = track_branch(sets, cal, ModeLabel::Kittel, opts, res.excluded);
  const auto hms = track_branch(sets, cal, ModeLabel::HMS, opts, res.excluded);
  for (const auto& [i, k] : kittel) sets[i].dips[k].label = ModeLabel::Kittel;
  for (const auto& [i, k] : hms) {
    Dip& d = sets[i].dips[k];
    if (d.label == ModeLabel::Kittel) {
      d.label = ModeLabel::Unassigned;
      ++res.ambiguous;
    } else {
      d.label = ModeLabel::HMS;
    }
  }

  if (opts.cavity_frequency) {
    for (auto& s : sets) {
      const double centre = cavity_centre(opts, cal, s.control);
      Dip* nearest = nullptr;
      for (auto& d : s.dips) {
        const double dist = std::abs(d.frequency - centre);
        if (d.label != ModeLabel::Unassigned || dist > opts.cavity_window) continue;
        if (nearest == nullptr || dist < std::abs(nearest->frequency - centre)) nearest = &d;
      }
      if (nearest != nullptr) nearest->label = ModeLabel::Cavity;
    }
  }

  for (const auto& s : sets) {
    for (const auto& d : s.dips) {
      switch (d.label) {
        case ModeLabel::Kittel: ++res.assigned_kittel; break;
        case ModeLabel::HMS: ++res.assigned_hms; break;
        case ModeLabel::Cavity: ++res.assigned_cavity; break;
        case ModeLabel::Unassigned: ++res.unassigned; break;
      }
    }
  }
  res.sets = std::move(sets);
  return res;
}

std::vector<ControlPoint> branch_points(std::span<const DipSet> sets, ModeLabel label) {
  std::vector<ControlPoint> out;
  for (const auto& s : sets) {
    for (const auto& d : s.dips) {
      if (d.label == label) out.push_back({s.control, d.frequency});
    }
  }
  return out;
}

LinearFit fit_reference_line(std::span<const ControlPoint> points, const BackgroundOptions& opts) {
  if (points.size() < 3) throw DomainError("background subtraction needs at least 3 points");
  if (!(opts.reference_fraction > 0.0) || opts.reference_fraction > 0.5) {
    throw DomainError("reference fraction must lie in (0, 0.5]");
  }
  double lo = opts.sweep_min.value_or(std::numeric_limits<double>::infinity());
  double hi = opts.sweep_max.value_or(-std::numeric_limits<double>::infinity());
  if (!opts.sweep_min || !opts.sweep_max) {
    for (const auto& p : points) {
      if (!opts.sweep_min) lo = std::min(lo, p.control);
      if (!opts.sweep_max) hi = std::max(hi, p.control);
    }
  }
  const double span = hi - lo;
  const double cut_lo = lo + opts.reference_fraction * span;
  const double cut_hi = hi - opts.reference_fraction * span;

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  size_t m = 0;
  const double x0 = 0.5 * (lo + hi);
  for (const auto& p : points) {
    if (p.control <= cut_lo || p.control >= cut_hi) {
      const double x = p.control - x0;
      sx += x;
      sy += p.value;
      sxx += x * x;
      sxy += x * p.value;
      ++m;
    }
  }
  if (m < 3) {
    throw DomainError(fmt::format("reference segment holds {} points, need at least 3", m));
  }
  const double md = static_cast<double>(m);
  LinearFit fit;
  fit.n_reference = m;
  size_t n_lo = 0;
  for (const auto& p : points) n_lo += p.control <= cut_lo ? 1 : 0;
  if (n_lo < 2 || m - n_lo < 2) {
    // One end is missing (mode hidden by the cavity there); a slope from a single
    // cluster would extrapolate the tail of the shift, so take a constant offset
    // from the populated end alone.
    const bool use_lo = n_lo >= m - n_lo;
    double sum = 0.0;
    size_t used = 0;
    for (const auto& p : points) {
      const bool lo_side = p.control <= cut_lo;
      const bool hi_side = p.control >= cut_hi;
      if ((use_lo && lo_side) || (!use_lo && hi_side)) {
        sum += p.value;
        ++used;
      }
    }
    if (used < 3) {
      throw DomainError(fmt::format("reference segment holds {} points on its populated end, need at least 3", used));
    }
    fit.slope = 0.0;
    fit.intercept = sum / static_cast<double>(used);
    fit.n_reference = used;
    fit.one_sided = true;
    return fit;
  }
  const double denom = md * sxx - sx * sx;
  if (denom <= 0.0) throw DomainError("reference segment has no spread in control");
  fit.slope = (md * sxy - sx * sy) / denom;
  const double b0 = (sy - fit.slope * sx) / md;
  fit.intercept = b0 - fit.slope * x0;
  return fit;
}

std::vector<ControlPoint> subtract_linear_background(std::span<const ControlPoint> points,
                                                     const BackgroundOptions& opts) {
  const LinearFit fit = fit_reference_line(points, opts);
  std::vector<ControlPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    out.push_back({p.control, p.value - (fit.slope * p.control + fit.intercept)});
  }
  return out;
}

ShiftCurve to_detuning_axis(std::span<const ControlPoint> points, const FieldCalibration& cal,
                            double drive_frequency, ModeLabel axis_mode,
                            std::optional<ModeLabel> label) {
  ShiftCurve c;
  c.label = label.value_or(axis_mode);
  c.points.reserve(points.size());
  for (const auto& p : points) {
    c.points.push_back(
        {mode_frequency_at_current(cal, axis_mode, p.control) - drive_frequency, p.value});
  }
  for (size_t i = 1; i < c.points.size(); ++i) {
    const bool up = c.points[1].delta > c.points[0].delta;
    const double d = c.points[i].delta - c.points[i - 1].delta;
    if (!(up ? d > 0.0 : d < 0.0)) {
      throw DomainError("detuning axis is not strictly monotone; control values must be too");
    }
  }
  return c;
}

void write_shift_curves_csv(std::ostream& os, std::span<const ShiftCurve> curves,
                            std::uint64_t manifest_hash) {
  os << fmt::format("# manifest {:016x}\n", manifest_hash);
  os << "delta_MHz,shift_MHz,mode\n";
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      os << fmt::format("{},{},{}\n", p.delta, p.shift, to_string(c.label));
    }
  }
}

std::vector<ShiftCurve> read_shift_curves_csv(std::istream& is) {
  std::vector<ShiftCurve> out;
  std::string line;
  size_t lineno = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "delta_MHz,shift_MHz,mode") {
        throw IoError(fmt::format("line {}: expected header delta_MHz,shift_MHz,mode", lineno));
      }
      header = true;
      continue;
    }
    std::istringstream ss(line);
    std::string a, b, m;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, m)) {
      throw IoError(fmt::format("line {}: expected 3 columns", lineno));
    }
    ShiftPoint p;
    try {
      p.delta = std::stod(a);
      p.shift = std::stod(b);
    } catch (const std::exception&) {
      throw IoError(fmt::format("line {}: bad number", lineno));
    }
    ModeLabel label;
    try {
      label = mode_label_from_string(m);
    } catch (const DomainError& e) {
      throw IoError(fmt::format("line {}: {}", lineno, e.what()));
    }
    if (out.empty() || out.back().label != label) {
      out.push_back({label, {}});
    }
    out.back().points.push_back(p);
  }
  if (!header) throw IoError("shift curve CSV has no header");
  return out;
}

}  // namespace cmkerr

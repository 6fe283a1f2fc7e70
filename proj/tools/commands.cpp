#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "cmkerr/config.hpp"
#include "cmkerr/error.hpp"
#include "cmkerr/extract.hpp"
#include "cmkerr/fit.hpp"
#include "cmkerr/manifest.hpp"
#include "cmkerr/model.hpp"
#include "cmkerr/parallel.hpp"
#include "cmkerr/pipeline.hpp"
#include "cmkerr/spectrum.hpp"
#include "cmkerr/spectrum_io.hpp"

#ifndef CMKERR_VERSION
#define CMKERR_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace cmkerr::cli {
namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<unsigned> workers;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "TOML configuration file (default: built-in calibration)");
  app->add_option("--set", c.sets, "override one config key, dotted.key=value; repeatable")
      ->allow_extra_args(false);
  app->add_option("-j,--workers", c.workers, "worker threads (default: $CMKERR_WORKERS, else all cores)")
      ->check(CLI::PositiveNumber);
}

RunConfig load(const Common& c) {
  return c.config.empty() ? run_config_from_overrides(c.sets) : load_run_config(c.config, c.sets);
}

RunManifest start_manifest(std::string command, const Common& c, const RunConfig& cfg,
                           std::uint64_t seed, const std::string& out_dir) {
  RunManifest m;
  m.command = std::move(command);
  m.config_path = c.config;
  m.overrides = c.sets;
  m.output_dir = out_dir;
  m.seed = seed;
  m.resolved_config = resolved_config_json(cfg);
  m.version = CMKERR_VERSION;
  return m;
}

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const auto& i : items) s += (s.empty() ? "" : ", ") + i;
  return s;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError(fmt::format("cannot create output directory '{}'", dir.string()));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  os.close();
  if (!os) throw IoError(fmt::format("cannot write '{}'", path.string()));
}

template <class Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  write_text(path, ss.str());
}

std::uint64_t input_hash(const fs::path& p) {
  if (!fs::is_directory(p)) return file_hash(p);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(p)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) acc += f.filename().string() + ":" + hash_hex(file_hash(f)) + "\n";
  return fnv1a64(acc);
}

double safe_ratio(double a, double b) { return b == 0.0 ? std::nan("") : a / b; }

// ---------------------------------------------------------------- derive

int cmd_derive(const Common& c, bool as_json, std::ostream& out) {
  const RunConfig cfg = load(c);
  if (!cfg.system.material) {
    throw UsageError("derive needs a [material] section with " + join(material_required_keys()));
  }
  const MaterialParams& m = *cfg.system.material;
  const KerrSet k = kerr_from_material(m);
  const CrossKerrDerivation x = cross_kerr_from_overlap(m);
  SystemConfig sys = cfg.system;
  sys.couplings.g_kh = std::abs(x.g_kh);
  const DispersiveReport d = dispersive_check(sys, cfg.analysis.dispersive_threshold);
  const double wk = cfg.system.kittel.bare_frequency + x.shift_kittel;
  const double wh = cfg.system.hms.bare_frequency + x.shift_hms;

  if (as_json) {
    json j = {{"k_self_kittel_MHz", k.k_self_kittel},
              {"k_self_hms_MHz", k.k_self_hms},
              {"k_cross_MHz", k.k_cross},
              {"cross_over_self_kittel", safe_ratio(k.k_cross, k.k_self_kittel)},
              {"cross_over_self_hms", safe_ratio(k.k_cross, k.k_self_hms)},
              {"self_hms_over_self_kittel", safe_ratio(k.k_self_hms, k.k_self_kittel)},
              {"g_kh_MHz", x.g_kh},
              {"omega_k_renormalized_MHz", wk},
              {"omega_h_renormalized_MHz", wh},
              {"dispersive",
               {{"threshold", cfg.analysis.dispersive_threshold},
                {"detuning_ck_MHz", d.detuning_ck},
                {"detuning_hk_MHz", d.detuning_hk},
                {"ratio_ck", d.ratio_ck},
                {"ratio_hk", d.ratio_hk},
                {"shift_ck_MHz", d.infinite_shift ? json(nullptr) : json(d.shift_ck)},
                {"shift_hk_MHz", d.infinite_shift ? json(nullptr) : json(d.shift_hk)},
                {"infinite_shift", d.infinite_shift},
                {"ok", d.dispersive}}}};
    out << j.dump(2) << '\n';
    return kOk;
  }

  std::string r;
  r += fmt::format("K_ks              {:.6e} MHz\n", k.k_self_kittel);
  r += fmt::format("K_hs              {:.6e} MHz\n", k.k_self_hms);
  r += fmt::format("K_cross           {:.6e} MHz\n", k.k_cross);
  r += fmt::format("K_cross/K_ks      {:.6g}\n", safe_ratio(k.k_cross, k.k_self_kittel));
  r += fmt::format("K_cross/K_hs      {:.6g}\n", safe_ratio(k.k_cross, k.k_self_hms));
  r += fmt::format("K_hs/K_ks         {:.6g}\n", safe_ratio(k.k_self_hms, k.k_self_kittel));
  r += fmt::format("g_kh              {:.6g} MHz\n", x.g_kh);
  r += fmt::format("omega_k           {:.6f} -> {:.6f} MHz\n", cfg.system.kittel.bare_frequency, wk);
  r += fmt::format("omega_h           {:.6f} -> {:.6f} MHz\n", cfg.system.hms.bare_frequency, wh);
  r += fmt::format("dispersive check  (threshold {:g})\n", cfg.analysis.dispersive_threshold);
  r += fmt::format("  cavity-kittel   detuning {:.3f} MHz, |detuning|/g_k = {:.3g}\n", d.detuning_ck, d.ratio_ck);
  r += fmt::format("  hms-kittel      detuning {:.3f} MHz, |detuning|/g_kh = {:.3g}\n", d.detuning_hk, d.ratio_hk);
  if (d.infinite_shift) {
    r += "  pull            infinite (zero detuning)\n";
  } else {
    r += fmt::format("  pull            g_k^2/detuning = {:.4g} MHz, g_kh^2/detuning = {:.4g} MHz\n",
                     d.shift_ck, d.shift_hk);
  }
  r += fmt::format("  regime          {}\n", d.dispersive ? "dispersive" : "NOT dispersive");
  out << r;
  return kOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string drive;
  std::string currents;
  std::string detuning;
  std::string probe;
  std::uint64_t seed = 0;
  double noise = 0.0;
  std::string out;
};

void write_states_csv(std::ostream& os, const SpectrumMap& map, std::uint64_t hash) {
  os << fmt::format("# manifest {:016x}\n", hash);
  os << "current,delta_MHz,omega_k_bare_MHz,omega_h_bare_MHz,omega_k_MHz,omega_h_MHz,driven_shift_MHz,"
        "root_count\n";
  for (size_t i = 0; i < map.n_controls(); ++i) {
    const TraceState& s = map.states[i];
    os << fmt::format("{},{},{},{},{},{},{},{}\n", map.controls[i], s.delta, s.omega_k_bare,
                      s.omega_h_bare, s.omega_k_eff, s.omega_h_eff, s.driven_shift, s.root_count);
  }
}

int cmd_simulate(const Common& c, const SimulateArgs& a, std::ostream& out) {
  const RunConfig cfg = load(c);
  const unsigned workers = resolve_workers(c.workers);
  if (a.noise < 0.0) throw UsageError("--noise must be >= 0");

  std::optional<DriveConfig> drive;
  if (!a.drive.empty()) {
    drive = parse_drive_spec(a.drive, cfg.drive);
  } else if (cfg.drive_enabled) {
    drive = cfg.drive;
  }

  std::vector<double> currents;
  std::string current_arg;
  if (!a.currents.empty()) {
    const GridSpec g = parse_grid_spec(a.currents);
    currents = linear_grid(g.lo, g.hi, g.step);
    current_arg = fmt::format("currents={}:{}:{}", g.lo, g.hi, g.step);
  } else if (a.detuning.empty() && !drive && cfg.sweep.current_min) {
    currents = linear_grid(*cfg.sweep.current_min, *cfg.sweep.current_max, *cfg.sweep.current_step);
    current_arg = fmt::format("currents={}:{}:{}", *cfg.sweep.current_min, *cfg.sweep.current_max,
                              *cfg.sweep.current_step);
  } else {
    GridSpec g{cfg.sweep.delta_min, cfg.sweep.delta_max, cfg.sweep.delta_step};
    if (!a.detuning.empty()) g = parse_grid_spec(a.detuning);
    // Undriven maps still need an axis; the configured drive supplies it.
    const DriveConfig& axis = drive ? *drive : cfg.drive;
    currents = currents_for_detuning(cfg.system.calibration, axis.target, axis.frequency, g.lo, g.hi, g.step);
    current_arg = fmt::format("detuning={}:{}:{}@{}:{}", g.lo, g.hi, g.step, to_string(axis.target),
                              axis.frequency);
  }
  GridSpec pg{cfg.sweep.probe_min, cfg.sweep.probe_max, cfg.sweep.probe_step};
  if (!a.probe.empty()) pg = parse_grid_spec(a.probe);
  const std::vector<double> probe = linear_grid(pg.lo, pg.hi, pg.step);
  if (currents.empty() || probe.empty()) throw UsageError("simulation grid is empty");

  RunManifest m = start_manifest("simulate", c, cfg, a.seed, a.out);
  m.arguments = {"drive=" + format_drive_spec(drive), current_arg,
                 fmt::format("probe={}:{}:{}", pg.lo, pg.hi, pg.step), fmt::format("noise={}", a.noise)};
  const std::uint64_t hash = manifest_hash(m);

  SynthesisOptions so;
  so.workers = workers;
  so.noise = a.noise;
  so.seed = a.seed;
  const SpectrumMap map = synthesize_map(cfg.system, currents, probe, drive, so);

  const fs::path dir(a.out);
  make_dir(dir);
  write_map_csv_file(dir / "map.csv", map, hash);
  write_map_binary_file(dir / "map.bin", map, hash);
  write_with(dir / "states.csv", [&](std::ostream& os) { write_states_csv(os, map, hash); });
  if (drive) {
    const SweepResult sweep = drive_sweep(cfg.system, currents, *drive);
    write_with(dir / "sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, sweep, hash); });
  }
  write_text(dir / "manifest.json", manifest_json(m) + "\n");
  out << fmt::format("simulate: {} traces x {} probe points, drive {}, manifest {} -> {}\n",
                     map.n_controls(), map.n_probe(), format_drive_spec(drive), hash_hex(hash),
                     dir.string());
  return kOk;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::vector<std::string> inputs;
  std::vector<std::string> drives;
  std::string out;
  double threshold = 0.1;
};

void write_dips_csv(std::ostream& os, const AssignResult& a, std::uint64_t hash) {
  os << fmt::format("# manifest {:016x}\n", hash);
  os << "current,frequency_MHz,depth_dB,width_MHz,label\n";
  for (const auto& s : a.sets) {
    for (const auto& d : s.dips) {
      os << fmt::format("{},{},{},{},{}\n", s.control, d.frequency, d.depth, d.width, to_string(d.label));
    }
  }
}

json analysis_json(const AnalysisResult& r, const std::optional<DriveConfig>& drive, std::uint64_t hash) {
  json j;
  j["manifest_hash"] = hash_hex(hash);
  j["drive"] = format_drive_spec(drive);
  j["target"] = std::string(to_string(r.drive.target));
  j["direction"] = std::string(to_string(r.direction));
  j["fit"] = json::parse(fit_result_json(r.fit));
  if (r.ratio) {
    j["ratio"] = {{"ratio", r.ratio->ratio}, {"n_pairs", r.ratio->n_pairs}, {"residual_rms", r.ratio->residual_rms}};
  } else {
    j["ratio"] = nullptr;
  }
  j["ratio_error"] = r.ratio_error;
  const AssignResult& a = r.assignment;
  j["assignment"] = {{"kittel", a.assigned_kittel}, {"hms", a.assigned_hms},
                     {"cavity", a.assigned_cavity}, {"unassigned", a.unassigned},
                     {"ambiguous", a.ambiguous},    {"excluded", a.excluded},
                     {"missing_kittel", r.missing_kittel}, {"missing_hms", r.missing_hms}};
  j["warnings"] = r.warnings;
  return j;
}

int cmd_analyze(const Common& c, const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load(c);
  const unsigned workers = resolve_workers(c.workers);
  if (!a.drives.empty() && a.drives.size() != 1 && a.drives.size() != a.inputs.size()) {
    throw UsageError(fmt::format("give one --drive for all inputs or one per input ({} inputs, {} drives)",
                                 a.inputs.size(), a.drives.size()));
  }
  std::vector<std::optional<DriveConfig>> drives;
  for (size_t i = 0; i < a.inputs.size(); ++i) {
    if (a.drives.empty()) {
      drives.push_back(cfg.drive_enabled ? std::optional<DriveConfig>(cfg.drive) : std::nullopt);
    } else {
      drives.push_back(parse_drive_spec(a.drives.size() == 1 ? a.drives[0] : a.drives[i], cfg.drive));
    }
  }

  RunManifest m = start_manifest("analyze", c, cfg, 0, a.out);
  for (size_t i = 0; i < a.inputs.size(); ++i) {
    const fs::path p(a.inputs[i]);
    if (!fs::exists(p)) throw IoError(fmt::format("input '{}' does not exist", p.string()));
    m.inputs.push_back({p.string(), input_hash(p)});
    m.arguments.push_back("drive=" + format_drive_spec(drives[i]));
  }
  m.arguments.push_back(fmt::format("threshold={}", a.threshold));
  const std::uint64_t hash = manifest_hash(m);

  // Everything is computed before the first file is written.
  struct Done {
    std::string name;
    AnalysisResult result;
  };
  std::vector<Done> done;
  for (size_t i = 0; i < a.inputs.size(); ++i) {
    const fs::path p(a.inputs[i]);
    const SpectrumMap map = fs::is_directory(p) ? read_vna_directory(p) : read_map_file(p).map;
    // "none" keeps the configured drive as the detuning axis; shifts then stay near zero.
    const DriveConfig axis = drives[i].value_or(cfg.drive);
    AnalysisResult r = analyze_map(map, cfg, axis, workers);
    for (const auto& w : r.warnings) err << fmt::format("warning: {}: {}\n", p.string(), w);
    if (!r.ratio_error.empty()) err << fmt::format("warning: {}: ratio fit refused: {}\n", p.string(), r.ratio_error);
    std::string name = a.inputs.size() == 1 ? std::string() : fmt::format("{:02d}_{}", i, p.stem().string());
    done.push_back({std::move(name), std::move(r)});
  }

  const fs::path root(a.out);
  make_dir(root);
  std::vector<RatioEntry> entries;
  for (size_t i = 0; i < done.size(); ++i) {
    const AnalysisResult& r = done[i].result;
    const fs::path dir = done[i].name.empty() ? root : root / done[i].name;
    make_dir(dir);
    const double gamma = cfg.system.linewidth(r.drive.target);
    const std::vector<ShiftCurve> curves = {r.driven, r.undriven};
    write_with(dir / "curves.csv", [&](std::ostream& os) { write_shift_curves_csv(os, curves, hash); });
    write_with(dir / "fit_curve.csv", [&](std::ostream& os) { write_fit_curve_csv(os, r, gamma, hash); });
    write_with(dir / "dips.csv", [&](std::ostream& os) { write_dips_csv(os, r.assignment, hash); });
    write_text(dir / "fit.json", analysis_json(r, drives[i], hash).dump(2) + "\n");
    write_with(dir / "fit.txt", [&](std::ostream& os) {
      os << fmt::format("# manifest {:016x}\n", hash);
      write_fit_table(os, r.fit);
    });
    out << fmt::format("{}: drive {}, cP = {:.6g} MHz^3, rms {:.4g} MHz, ratio {}\n", a.inputs[i],
                       format_drive_spec(drives[i]), r.fit.cp_estimate, r.fit.residual_rms,
                       r.ratio ? fmt::format("{:.6g}", r.ratio->ratio) : std::string("refused"));
    if (r.ratio && drives[i]) {
      entries.push_back({r.drive.frequency,
                         r.drive.target == DriveTarget::Kittel ? RatioFamily::Kittel : RatioFamily::HMS,
                         r.ratio->ratio});
    }
  }
  if (done.size() > 1) {
    const RatioReport rep = ratio_stability_report(entries, a.threshold);
    json j = json::parse(ratio_report_json(rep));
    j["manifest_hash"] = hash_hex(hash);
    write_text(root / "ratio_report.json", j.dump(2) + "\n");
    write_with(root / "ratio_report.txt", [&](std::ostream& os) {
      os << fmt::format("# manifest {:016x}\n", hash);
      write_ratio_table(os, rep);
    });
    write_ratio_table(out, rep);
  }
  write_text(root / "manifest.json", manifest_json(m) + "\n");
  return kOk;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
  double threshold = 0.1;
};

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<RatioEntry> entries;
  RunManifest m;
  m.command = "report";
  m.output_dir = a.out;
  m.version = CMKERR_VERSION;
  m.arguments.push_back(fmt::format("threshold={}", a.threshold));
  for (const auto& in : a.inputs) {
    std::ifstream is(in);
    if (!is) throw IoError(fmt::format("cannot read '{}'", in));
    json j;
    try {
      j = json::parse(is);
    } catch (const json::exception& e) {
      throw IoError(fmt::format("{}: not a fit JSON ({})", in, e.what()));
    }
    m.inputs.push_back({in, file_hash(in)});
    if (!j.contains("target") || !j.contains("fit") || !j.contains("ratio")) {
      throw IoError(fmt::format("{}: missing target, fit or ratio", in));
    }
    if (j["ratio"].is_null() || j.value("drive", "none") == "none") {
      err << fmt::format("warning: {}: no ratio, skipped\n", in);
      continue;
    }
    const std::string target = j["target"].get<std::string>();
    RatioEntry e;
    e.family = target == "kittel" ? RatioFamily::Kittel : RatioFamily::HMS;
    e.drive_frequency = j["fit"].value("drive_frequency_MHz", 0.0);
    e.ratio = j["ratio"]["ratio"].get<double>();
    entries.push_back(e);
  }
  if (entries.empty()) throw NumericalError("no fit with a ratio among the inputs");
  const RatioReport rep = ratio_stability_report(entries, a.threshold);
  const std::uint64_t hash = manifest_hash(m);
  if (!a.out.empty()) {
    const fs::path dir(a.out);
    make_dir(dir);
    json j = json::parse(ratio_report_json(rep));
    j["manifest_hash"] = hash_hex(hash);
    write_text(dir / "ratio_report.json", j.dump(2) + "\n");
    write_with(dir / "ratio_report.txt", [&](std::ostream& os) {
      os << fmt::format("# manifest {:016x}\n", hash);
      write_ratio_table(os, rep);
    });
    write_text(dir / "manifest.json", manifest_json(m) + "\n");
  }
  write_ratio_table(out, rep);
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"cavity magnonics Kerr toolkit: derive, simulate, analyze, report"};
  app.set_version_flag("--version", CMKERR_VERSION);
  app.require_subcommand(1);

  Common common;
  bool derive_json = false;
  auto* derive = app.add_subcommand("derive", "Kerr coefficients and dispersive check from [material]");
  add_common(derive, common);
  derive->add_flag("--json", derive_json, "print JSON instead of a table");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "synthesize a transmission map");
  add_common(simulate, common);
  simulate->add_option("--drive", sim.drive, "none | kittel:9800MHz:25dBm | hms:10.14GHz:25dBm");
  simulate->add_option("--currents", sim.currents, "current grid lo:hi:step, A");
  simulate->add_option("--detuning", sim.detuning, "driven-mode detuning grid lo:hi:step, MHz");
  simulate->add_option("--probe", sim.probe, "probe grid lo:hi:step, MHz");
  simulate->add_option("--seed", sim.seed, "noise seed");
  simulate->add_option("--noise", sim.noise, "relative Gaussian noise on |S21|^2");
  simulate->add_option("-o,--out", sim.out, "output directory")->required();

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "extract shifts and fit Kerr ratios");
  add_common(analyze, common);
  analyze->add_option("inputs", an.inputs, "map.csv / map.bin files or VNA directories")->required();
  analyze->add_option("--drive", an.drives, "drive spec, once for all inputs or once per input")
      ->allow_extra_args(false);
  analyze->add_option("--threshold", an.threshold, "std/|mean| below which a ratio family is stable");
  analyze->add_option("-o,--out", an.out, "output directory")->required();

  ReportArgs rp;
  auto* report = app.add_subcommand("report", "aggregate fit.json files into a ratio report");
  report->add_option("inputs", rp.inputs, "fit.json files")->required();
  report->add_option("--threshold", rp.threshold, "std/|mean| below which a ratio family is stable");
  report->add_option("-o,--out", rp.out, "output directory (default: table on stdout only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (derive->parsed()) return cmd_derive(common, derive_json, out);
    if (simulate->parsed()) return cmd_simulate(common, sim, out);
    if (analyze->parsed()) return cmd_analyze(common, an, out, err);
    if (report->parsed()) return cmd_report(rp, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  }
  return kUsage;
}

}  // namespace cmkerr::cli

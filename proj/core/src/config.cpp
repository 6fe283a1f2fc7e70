#include "cmkerr/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <toml.hpp>

#include "cmkerr/error.hpp"

namespace cmkerr {
namespace {

enum class Kind { Number, Text, Flag };

using Setter = std::function<void(RunConfig&, const toml::node&)>;
using Getter = std::function<nlohmann::json(const RunConfig&)>;

struct Field {
  std::string key;
  Kind kind;
  Setter set;
  Getter get;
};

double as_number(const toml::node& n) { return n.value<double>().value(); }

MaterialParams& material_of(RunConfig& c) {
  if (!c.system.material) c.system.material = MaterialParams{};
  return *c.system.material;
}

template <typename Get>
Field number(std::string key, Get get) {
  return {std::move(key), Kind::Number,
          [get](RunConfig& c, const toml::node& n) { get(c) = as_number(n); },
          [get](const RunConfig& c) { return nlohmann::json(get(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Field optional_number(std::string key, Get get) {
  return {std::move(key), Kind::Number,
          [get](RunConfig& c, const toml::node& n) { get(c) = as_number(n); },
          [get](const RunConfig& c) {
            const auto& v = get(const_cast<RunConfig&>(c));
            return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
          }};
}

Field material_number(std::string key, double MaterialParams::*member) {
  return {std::move(key), Kind::Number,
          [member](RunConfig& c, const toml::node& n) { material_of(c).*member = as_number(n); },
          [member](const RunConfig& c) {
            return c.system.material ? nlohmann::json((*c.system.material).*member)
                                     : nlohmann::json(nullptr);
          }};
}

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    for (auto [name, pick] : {std::pair{"cavity", &SystemConfig::cavity},
                              std::pair{"kittel", &SystemConfig::kittel},
                              std::pair{"hms", &SystemConfig::hms}}) {
      const std::string base = std::string("modes.") + name + ".";
      f.push_back(number(base + "bare_frequency",
                         [pick](RunConfig& c) -> double& { return (c.system.*pick).bare_frequency; }));
      f.push_back(number(base + "linewidth",
                         [pick](RunConfig& c) -> double& { return (c.system.*pick).linewidth; }));
    }
    f.push_back(optional_number("modes.cavity.external_linewidth",
                                [](RunConfig& c) -> std::optional<double>& {
                                  return c.system.cavity_external_linewidth;
                                }));
    f.push_back(number("couplings.g_k", [](RunConfig& c) -> double& { return c.system.couplings.g_k; }));
    f.push_back(number("couplings.g_h", [](RunConfig& c) -> double& { return c.system.couplings.g_h; }));
    f.push_back(number("couplings.g_kh", [](RunConfig& c) -> double& { return c.system.couplings.g_kh; }));
    f.push_back(number("kerr.k_self_kittel", [](RunConfig& c) -> double& { return c.system.kerr.k_self_kittel; }));
    f.push_back(number("kerr.k_self_hms", [](RunConfig& c) -> double& { return c.system.kerr.k_self_hms; }));
    f.push_back(number("kerr.k_cross", [](RunConfig& c) -> double& { return c.system.kerr.k_cross; }));
    f.push_back(number("calibration.current_to_field_slope",
                       [](RunConfig& c) -> double& { return c.system.calibration.current_to_field_slope; }));
    f.push_back(number("calibration.field_offset",
                       [](RunConfig& c) -> double& { return c.system.calibration.field_offset; }));
    f.push_back(number("calibration.kittel_slope",
                       [](RunConfig& c) -> double& { return c.system.calibration.kittel_slope; }));
    f.push_back(number("calibration.hms_offset_from_kittel",
                       [](RunConfig& c) -> double& { return c.system.calibration.hms_offset_from_kittel; }));
    f.push_back(material_number("material.anisotropy_constant", &MaterialParams::anisotropy_constant));
    f.push_back(material_number("material.gyromagnetic_ratio", &MaterialParams::gyromagnetic_ratio));
    f.push_back(material_number("material.saturation_magnetization", &MaterialParams::saturation_magnetization));
    f.push_back(material_number("material.hms_magnetization", &MaterialParams::hms_magnetization));
    f.push_back(material_number("material.sphere_volume", &MaterialParams::sphere_volume));
    f.push_back(material_number("material.overlap_coefficient", &MaterialParams::overlap_coefficient));
    f.push_back(material_number("material.total_spin_kittel", &MaterialParams::total_spin_kittel));
    f.push_back(material_number("material.total_spin_hms", &MaterialParams::total_spin_hms));
    f.push_back(material_number("material.vacuum_permeability", &MaterialParams::vacuum_permeability));
    f.push_back(material_number("material.hbar", &MaterialParams::hbar));
    f.push_back(number("drive.efficiency_kittel", [](RunConfig& c) -> double& { return c.drive.efficiency_kittel; }));
    f.push_back(number("drive.efficiency_hms", [](RunConfig& c) -> double& { return c.drive.efficiency_hms; }));
    f.push_back(number("drive.frequency", [](RunConfig& c) -> double& { return c.drive.frequency; }));
    f.push_back(number("drive.power_dbm", [](RunConfig& c) -> double& { return c.drive.power_dbm; }));
    f.push_back({"drive.target", Kind::Text,
                 [](RunConfig& c, const toml::node& n) {
                   const auto s = n.value<std::string>().value();
                   if (s == "none") {
                     c.drive_enabled = false;
                   } else if (s == "kittel" || s == "hms") {
                     c.drive_enabled = true;
                     c.drive.target = s == "kittel" ? DriveTarget::Kittel : DriveTarget::HMS;
                   } else {
                     throw UsageError("drive.target must be 'kittel', 'hms' or 'none'");
                   }
                 },
                 [](const RunConfig& c) {
                   return nlohmann::json(c.drive_enabled ? std::string(to_string(c.drive.target)) : "none");
                 }});
    f.push_back(number("sweep.delta_min", [](RunConfig& c) -> double& { return c.sweep.delta_min; }));
    f.push_back(number("sweep.delta_max", [](RunConfig& c) -> double& { return c.sweep.delta_max; }));
    f.push_back(number("sweep.delta_step", [](RunConfig& c) -> double& { return c.sweep.delta_step; }));
    f.push_back(number("sweep.probe_min", [](RunConfig& c) -> double& { return c.sweep.probe_min; }));
    f.push_back(number("sweep.probe_max", [](RunConfig& c) -> double& { return c.sweep.probe_max; }));
    f.push_back(number("sweep.probe_step", [](RunConfig& c) -> double& { return c.sweep.probe_step; }));
    f.push_back(optional_number("sweep.current_min", [](RunConfig& c) -> std::optional<double>& { return c.sweep.current_min; }));
    f.push_back(optional_number("sweep.current_max", [](RunConfig& c) -> std::optional<double>& { return c.sweep.current_max; }));
    f.push_back(optional_number("sweep.current_step", [](RunConfig& c) -> std::optional<double>& { return c.sweep.current_step; }));
    f.push_back(number("analysis.baseline_window", [](RunConfig& c) -> double& { return c.analysis.dips.baseline_window; }));
    f.push_back(optional_number("analysis.min_prominence",
                                [](RunConfig& c) -> std::optional<double>& { return c.analysis.dips.min_prominence; }));
    f.push_back(number("analysis.prominence_floor", [](RunConfig& c) -> double& { return c.analysis.dips.prominence_floor; }));
    f.push_back(number("analysis.smooth_window", [](RunConfig& c) -> double& { return c.analysis.dips.smooth_window; }));
    f.push_back(number("analysis.assign_tolerance", [](RunConfig& c) -> double& { return c.analysis.assign.tolerance; }));
    f.push_back(number("analysis.min_dip_width", [](RunConfig& c) -> double& { return c.analysis.assign.min_width; }));
    f.push_back(number("analysis.reference_fraction",
                       [](RunConfig& c) -> double& { return c.analysis.background.reference_fraction; }));
    f.push_back(number("analysis.max_gap", [](RunConfig& c) -> double& { return c.analysis.ratio.max_gap; }));
    f.push_back(number("analysis.min_signal", [](RunConfig& c) -> double& { return c.analysis.ratio.min_signal; }));
    f.push_back(number("analysis.dispersive_threshold",
                       [](RunConfig& c) -> double& { return c.analysis.dispersive_threshold; }));
    f.push_back(number("analysis.max_missing_fraction",
                       [](RunConfig& c) -> double& { return c.analysis.max_missing_fraction; }));
    f.push_back({"analysis.dip_bias_correction", Kind::Flag,
                 [](RunConfig& c, const toml::node& n) { c.analysis.dip_bias_correction = n.value<bool>().value(); },
                 [](const RunConfig& c) { return nlohmann::json(c.analysis.dip_bias_correction); }});
    f.push_back({"analysis.exclude_near_cavity", Kind::Flag,
                 [](RunConfig& c, const toml::node& n) { c.analysis.exclude_near_cavity = n.value<bool>().value(); },
                 [](const RunConfig& c) { return nlohmann::json(c.analysis.exclude_near_cavity); }});
    f.push_back({"analysis.direction", Kind::Text,
                 [](RunConfig& c, const toml::node& n) {
                   const auto s = n.value<std::string>().value();
                   if (s == "auto") {
                     c.analysis.direction.reset();
                   } else if (s == "up" || s == "down") {
                     c.analysis.direction = sweep_direction_from_string(s);
                   } else {
                     throw UsageError("analysis.direction must be 'auto', 'up' or 'down'");
                   }
                 },
                 [](const RunConfig& c) {
                   return nlohmann::json(c.analysis.direction ? std::string(to_string(*c.analysis.direction))
                                                              : "auto");
                 }});
    return f;
  }();
  return fields;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : schema()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

bool kind_matches(Kind k, const toml::node& n) {
  switch (k) {
    case Kind::Number: return n.is_integer() || n.is_floating_point();
    case Kind::Text: return n.is_string();
    case Kind::Flag: return n.is_boolean();
  }
  return false;
}

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Number: return "a number";
    case Kind::Text: return "a string";
    case Kind::Flag: return "a boolean";
  }
  return "?";
}

void collect_leaves(const toml::table& t, const std::string& prefix,
                    std::vector<std::pair<std::string, const toml::node*>>& out) {
  for (auto&& [k, v] : t) {
    const std::string key = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
    if (const auto* sub = v.as_table()) {
      collect_leaves(*sub, key, out);
    } else {
      out.emplace_back(key, &v);
    }
  }
}

void apply_override(toml::table& root, const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw UsageError(fmt::format("override '{}' is not key=value", text));
  }
  std::string key = text.substr(0, eq);
  std::string value = text.substr(eq + 1);
  key.erase(key.find_last_not_of(" \t") + 1);
  key.erase(0, key.find_first_not_of(" \t"));
  value.erase(0, value.find_first_not_of(" \t"));
  const Field* field = find_field(key);
  if (field == nullptr) throw UsageError(fmt::format("unknown config key '{}'", key));

  toml::table* t = &root;
  std::string rest = key;
  for (auto dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
    const std::string part = rest.substr(0, dot);
    rest = rest.substr(dot + 1);
    auto* node = t->get(part);
    if (node == nullptr) {
      t->insert_or_assign(part, toml::table{});
      node = t->get(part);
    }
    t = node->as_table();
    if (t == nullptr) throw UsageError(fmt::format("config key '{}' is not a table", part));
  }

  if (field->kind == Kind::Text) {
    std::string s = value;
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    t->insert_or_assign(rest, s);
    return;
  }
  toml::table parsed;
  try {
    parsed = toml::parse("v = " + value);
  } catch (const toml::parse_error&) {
    throw UsageError(fmt::format("override {}: cannot parse value '{}'", key, value));
  }
  const toml::node* v = parsed.get("v");
  if (field->kind == Kind::Flag && v->is_boolean()) {
    t->insert_or_assign(rest, *v->value<bool>());
  } else if (field->kind == Kind::Number && (v->is_integer() || v->is_floating_point())) {
    t->insert_or_assign(rest, *v->value<double>());
  } else {
    throw UsageError(fmt::format("override {}: expected {}", key, kind_name(field->kind)));
  }
}

const std::vector<std::string> kRequiredMaterial = {
    "anisotropy_constant", "gyromagnetic_ratio", "saturation_magnetization", "hms_magnetization",
    "sphere_volume",       "overlap_coefficient", "total_spin_kittel",       "total_spin_hms"};

void check_positive(double v, const char* key) {
  if (!(v > 0.0) || !std::isfinite(v)) throw UsageError(fmt::format("{} must be > 0", key));
}

RunConfig build(const toml::table& root, const std::string& source) {
  RunConfig cfg;
  cfg.system.material.reset();
  cfg.system.kerr = {};
  const RunConfig defaults = default_run_config();
  cfg.drive = defaults.drive;
  cfg.drive_enabled = defaults.drive_enabled;

  std::vector<std::pair<std::string, const toml::node*>> leaves;
  collect_leaves(root, "", leaves);
  std::set<std::string> seen;
  for (const auto& [key, node] : leaves) {
    const Field* f = find_field(key);
    if (f == nullptr) throw UsageError(fmt::format("{}: unknown config key '{}'", source, key));
    if (!kind_matches(f->kind, *node)) {
      throw UsageError(fmt::format("{}: '{}' must be {}", source, key, kind_name(f->kind)));
    }
    f->set(cfg, *node);
    seen.insert(key);
  }

  std::vector<std::string> missing;
  bool any_material = false;
  for (const auto& k : kRequiredMaterial) {
    if (seen.count("material." + k)) {
      any_material = true;
    } else {
      missing.push_back("material." + k);
    }
  }
  if (seen.count("material.hbar") || seen.count("material.vacuum_permeability")) any_material = true;
  if (any_material && !missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw UsageError(fmt::format("{}: [material] is incomplete, missing {}", source, list));
  }

  const int kerr_keys = static_cast<int>(seen.count("kerr.k_self_kittel") + seen.count("kerr.k_self_hms") +
                                         seen.count("kerr.k_cross"));
  if (kerr_keys != 0 && kerr_keys != 3) {
    throw UsageError(fmt::format("{}: [kerr] needs k_self_kittel, k_self_hms and k_cross together", source));
  }
  if (kerr_keys == 0 && cfg.system.material) {
    try {
      cfg.system.kerr = kerr_from_material(*cfg.system.material);
    } catch (const DomainError& e) {
      throw UsageError(fmt::format("{}: {}", source, e.what()));
    }
  }

  try {
    cfg.system.validate();
  } catch (const DomainError& e) {
    throw UsageError(fmt::format("{}: {}", source, e.what()));
  }
  const auto& s = cfg.sweep;
  check_positive(s.delta_step, "sweep.delta_step");
  check_positive(s.probe_step, "sweep.probe_step");
  if (!(s.delta_max >= s.delta_min)) throw UsageError("sweep.delta_max must be >= sweep.delta_min");
  if (!(s.probe_max > s.probe_min)) throw UsageError("sweep.probe_max must be > sweep.probe_min");
  const int current_keys = s.current_min.has_value() + s.current_max.has_value() + s.current_step.has_value();
  if (current_keys != 0 && current_keys != 3) {
    throw UsageError("sweep.current_min, current_max and current_step go together");
  }
  if (current_keys == 3) {
    check_positive(*s.current_step, "sweep.current_step");
    if (!(*s.current_max >= *s.current_min)) throw UsageError("sweep.current_max must be >= current_min");
  }
  check_positive(cfg.analysis.dips.baseline_window, "analysis.baseline_window");
  check_positive(cfg.analysis.assign.tolerance, "analysis.assign_tolerance");
  check_positive(cfg.analysis.dispersive_threshold, "analysis.dispersive_threshold");
  if (!(cfg.analysis.dips.smooth_window >= 0.0)) throw UsageError("analysis.smooth_window must be >= 0");
  if (!(cfg.analysis.assign.min_width >= 0.0)) throw UsageError("analysis.min_dip_width must be >= 0");
  if (!(cfg.analysis.background.reference_fraction > 0.0 && cfg.analysis.background.reference_fraction <= 0.5)) {
    throw UsageError("analysis.reference_fraction must lie in (0, 0.5]");
  }
  if (cfg.drive_enabled) check_positive(cfg.drive.frequency, "drive.frequency");
  return cfg;
}

}  // namespace

RunConfig default_run_config() {
  RunConfig c;
  c.system.material = MaterialParams{};
  c.system.kerr = kerr_from_material(*c.system.material);
  c.drive.frequency = 9800.0;
  c.drive.power_dbm = 25.0;
  c.drive.efficiency_kittel = -6.382741229283857;  // max |Delta_ks| = 60 MHz at 25 dBm
  c.drive.efficiency_hms = -0.592927061281571;     // max |Delta_hs| = 30 MHz at 25 dBm
  c.drive.target = DriveTarget::Kittel;
  c.drive_enabled = false;
  return c;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : schema()) keys.push_back(f.key);
  return keys;
}

std::vector<std::string> material_required_keys() {
  std::vector<std::string> keys;
  for (const auto& k : kRequiredMaterial) keys.push_back("material." + k);
  return keys;
}

RunConfig parse_run_config(std::string_view toml_text, const std::vector<std::string>& overrides,
                           const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(toml_text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ": " << e.description() << " at line " << e.source().begin.line;
    throw UsageError(msg.str());
  }
  for (const auto& o : overrides) apply_override(root, o);
  return build(root, source);
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read config '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), overrides, path.string());
}

RunConfig run_config_from_overrides(const std::vector<std::string>& overrides) {
  // Defaults are expressed as a document so overrides go through one path.
  const RunConfig d = default_run_config();
  nlohmann::json j = nlohmann::json::parse(resolved_config_json(d));
  toml::table root;
  for (const auto& f : schema()) {
    const nlohmann::json* v = &j;
    std::string rest = f.key;
    for (auto dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
      v = &(*v)[rest.substr(0, dot)];
      rest = rest.substr(dot + 1);
    }
    const nlohmann::json& leaf = (*v)[rest];
    if (leaf.is_null()) continue;
    std::string text;
    if (leaf.is_string()) {
      text = f.key + "=" + leaf.get<std::string>();
    } else if (leaf.is_boolean()) {
      text = f.key + "=" + (leaf.get<bool>() ? "true" : "false");
    } else {
      text = fmt::format("{}={}", f.key, leaf.get<double>());
    }
    apply_override(root, text);
  }
  // Derived Kerr values are rebuilt from material unless overridden.
  if (auto* k = root.get("kerr")) {
    (void)k;
    root.erase("kerr");
  }
  for (const auto& o : overrides) apply_override(root, o);
  return build(root, "defaults");
}

std::string resolved_config_json(const RunConfig& cfg) {
  nlohmann::json root = nlohmann::json::object();
  for (const auto& f : schema()) {
    nlohmann::json* v = &root;
    std::string rest = f.key;
    for (auto dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
      v = &(*v)[rest.substr(0, dot)];
      rest = rest.substr(dot + 1);
    }
    (*v)[rest] = f.get(cfg);
  }
  return root.dump(2);
}

std::optional<DriveConfig> parse_drive_spec(std::string_view spec, const DriveConfig& base) {
  if (spec == "none") return std::nullopt;
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : spec) {
    if (ch == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(cur);
  if (parts.size() != 3) {
    throw UsageError(fmt::format("drive spec '{}' must look like kittel:9800MHz:25dBm or none", spec));
  }
  DriveConfig d = base;
  if (parts[0] == "kittel") {
    d.target = DriveTarget::Kittel;
  } else if (parts[0] == "hms") {
    d.target = DriveTarget::HMS;
  } else {
    throw UsageError(fmt::format("drive target '{}' must be kittel or hms", parts[0]));
  }
  auto number_with_unit = [&](const std::string& text, std::initializer_list<std::pair<const char*, double>> units,
                              const char* what) {
    for (auto [unit, scale] : units) {
      const std::string u(unit);
      if (text.size() > u.size() && text.compare(text.size() - u.size(), u.size(), u) == 0) {
        const std::string num = text.substr(0, text.size() - u.size());
        double v = 0.0;
        auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
        if (ec == std::errc() && p == num.data() + num.size() && std::isfinite(v)) return v * scale;
      }
    }
    throw UsageError(fmt::format("cannot parse drive {} '{}'", what, text));
  };
  d.frequency = number_with_unit(parts[1], {{"GHz", 1e3}, {"MHz", 1.0}}, "frequency");
  d.power_dbm = number_with_unit(parts[2], {{"dBm", 1.0}}, "power");
  if (!(d.frequency > 0.0)) throw UsageError("drive frequency must be positive");
  return d;
}

std::string format_drive_spec(const std::optional<DriveConfig>& drive) {
  if (!drive) return "none";
  return fmt::format("{}:{}MHz:{}dBm", to_string(drive->target), drive->frequency, drive->power_dbm);
}

GridSpec parse_grid_spec(std::string_view spec) {
  GridSpec g;
  double* slots[3] = {&g.lo, &g.hi, &g.step};
  size_t start = 0;
  for (int k = 0; k < 3; ++k) {
    const size_t end = k < 2 ? spec.find(':', start) : spec.size();
    if (end == std::string_view::npos) {
      throw UsageError(fmt::format("grid '{}' must be lo:hi:step", spec));
    }
    const std::string_view part = spec.substr(start, end - start);
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), *slots[k]);
    if (ec != std::errc() || p != part.data() + part.size() || !std::isfinite(*slots[k])) {
      throw UsageError(fmt::format("grid '{}': cannot parse '{}'", spec, part));
    }
    start = end + 1;
  }
  if (!(g.step > 0.0)) throw UsageError(fmt::format("grid '{}': step must be > 0", spec));
  if (g.hi < g.lo) throw UsageError(fmt::format("grid '{}' is empty (hi < lo)", spec));
  return g;
}

}  // namespace cmkerr

#include "cmkerr/spectrum_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cmkerr/error.hpp"

namespace cmkerr {
namespace {

constexpr std::array<char, 4> kMagic{'C', 'M', 'S', 'M'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::array<unsigned char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    std::reverse(b.begin(), b.end());
    std::memcpy(&v, b.data(), sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw IoError(fmt::format("binary map truncated while reading {}", what));
  }
  return to_little(v);
}

bool uniform(const std::vector<double>& g) {
  if (g.size() < 3) return true;
  const double step = (g.back() - g.front()) / static_cast<double>(g.size() - 1);
  for (size_t i = 0; i < g.size(); ++i) {
    const double expect = g.front() + step * static_cast<double>(i);
    if (g[i] != expect) return false;
  }
  return true;
}

std::vector<double> uniform_grid(double lo, double hi, size_t n) {
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (size_t i = 0; i < n; ++i) g[i] = lo + step * static_cast<double>(i);
  return g;
}

double parse_double(const std::string& s, const char* what, size_t line) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(fmt::format("line {}: cannot parse {} from '{}'", line, what, s));
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t\r"));
    cell.erase(cell.find_last_not_of(" \t\r") + 1);
    out.push_back(cell);
  }
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

void write_map_csv(std::ostream& os, const SpectrumMap& map, std::uint64_t manifest_hash) {
  os << fmt::format("# manifest {:016x}\n", manifest_hash);
  os << "current,probe_MHz,s21_sq\n";
  for (size_t i = 0; i < map.n_controls(); ++i) {
    const auto row = map.row(i);
    for (size_t j = 0; j < map.n_probe(); ++j) {
      os << fmt::format("{},{},{}\n", map.controls[i], map.probe[j], row[j]);
    }
  }
}

LoadedMap read_map_csv(std::istream& is) {
  LoadedMap out;
  std::string line;
  size_t lineno = 0;
  bool header_seen = false;
  std::vector<double> controls;
  std::vector<double> probe;
  std::vector<double> data;
  size_t col = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string key, value;
      ss >> key >> value;
      if (key == "manifest" && !value.empty()) {
        try {
          out.manifest_hash = std::stoull(value, nullptr, 16);
        } catch (const std::exception&) {
          throw IoError(fmt::format("line {}: bad manifest hash '{}'", lineno, value));
        }
      }
      continue;
    }
    const auto cells = split_csv(line);
    if (!header_seen) {
      if (cells.size() != 3 || cells[0] != "current" || cells[1] != "probe_MHz" ||
          cells[2] != "s21_sq") {
        throw IoError(fmt::format("line {}: expected header current,probe_MHz,s21_sq", lineno));
      }
      header_seen = true;
      continue;
    }
    if (cells.size() != 3) throw IoError(fmt::format("line {}: expected 3 columns", lineno));
    const double c = parse_double(cells[0], "current", lineno);
    const double f = parse_double(cells[1], "probe_MHz", lineno);
    const double v = parse_double(cells[2], "s21_sq", lineno);
    if (controls.empty() || controls.back() != c) {
      if (!controls.empty() && col != probe.size()) {
        throw IoError(fmt::format("line {}: trace at {} A has {} points, expected {}", lineno,
                                  controls.back(), col, probe.size()));
      }
      controls.push_back(c);
      col = 0;
    }
    if (controls.size() == 1) {
      probe.push_back(f);
    } else if (col >= probe.size() || probe[col] != f) {
      throw IoError(fmt::format("line {}: probe grid differs between traces", lineno));
    }
    ++col;
    data.push_back(v);
  }
  if (!header_seen || controls.empty()) throw IoError("map CSV holds no data");
  if (col != probe.size()) throw IoError("last trace is incomplete");
  out.map.controls = std::move(controls);
  out.map.probe = std::move(probe);
  out.map.data = std::move(data);
  return out;
}

void write_map_binary(std::ostream& os, const SpectrumMap& map, std::uint64_t manifest_hash) {
  if (map.n_probe() == 0 || map.n_controls() == 0) throw DomainError("cannot write an empty map");
  std::uint32_t flags = 0;
  if (map.drive) flags |= kMapFlagDriven;
  const bool explicit_probe = !uniform(map.probe);
  if (explicit_probe) flags |= kMapFlagExplicitProbe;
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(map.n_controls()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(map.n_probe()));
  put<std::uint32_t>(os, flags);
  put<double>(os, map.probe.front());
  put<double>(os, map.probe.back());
  for (double c : map.controls) put<double>(os, c);
  if (explicit_probe) {
    for (double f : map.probe) put<double>(os, f);
  }
  for (double v : map.data) put<double>(os, v);
  put<std::uint64_t>(os, manifest_hash);
}

LoadedMap read_map_binary(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw IoError("not a binary spectrum map (bad magic)");
  }
  const auto nc = get<std::uint32_t>(is, "header");
  const auto np = get<std::uint32_t>(is, "header");
  const auto flags = get<std::uint32_t>(is, "header");
  const auto lo = get<double>(is, "header");
  const auto hi = get<double>(is, "header");
  if (nc == 0 || np == 0) throw IoError("binary map has an empty dimension");
  LoadedMap out;
  out.map.controls.resize(nc);
  for (auto& c : out.map.controls) c = get<double>(is, "controls");
  if (flags & kMapFlagExplicitProbe) {
    out.map.probe.resize(np);
    for (auto& f : out.map.probe) f = get<double>(is, "probe grid");
  } else {
    out.map.probe = uniform_grid(lo, hi, np);
  }
  out.map.data.resize(static_cast<size_t>(nc) * np);
  for (auto& v : out.map.data) v = get<double>(is, "data");
  out.manifest_hash = get<std::uint64_t>(is, "manifest hash");
  return out;
}

LoadedMap read_map_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::array<char, 4> head{};
  in.read(head.data(), head.size());
  const bool binary = in.gcount() == 4 && head == kMagic;
  in.clear();
  in.seekg(0);
  try {
    return binary ? read_map_binary(in) : read_map_csv(in);
  } catch (const IoError& e) {
    throw IoError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_map_csv_file(const std::filesystem::path& path, const SpectrumMap& map,
                        std::uint64_t manifest_hash) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  write_map_csv(out, map, manifest_hash);
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

void write_map_binary_file(const std::filesystem::path& path, const SpectrumMap& map,
                           std::uint64_t manifest_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  write_map_binary(out, map, manifest_hash);
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

std::optional<double> control_from_filename(const std::string& stem) {
  static const std::regex number(R"([-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)");
  std::optional<double> last;
  for (auto it = std::sregex_iterator(stem.begin(), stem.end(), number);
       it != std::sregex_iterator(); ++it) {
    last = std::stod(it->str());
  }
  return last;
}

SpectrumMap read_vna_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError(fmt::format("'{}' is not a directory", dir.string()));
  std::map<double, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || lower(entry.path().extension().string()) != ".csv") continue;
    const auto control = control_from_filename(entry.path().stem().string());
    if (!control) {
      throw IoError(fmt::format("no control value in file name '{}'", entry.path().string()));
    }
    if (!files.emplace(*control, entry.path()).second) {
      throw IoError(fmt::format("two files encode control value {}", *control));
    }
  }
  if (files.empty()) throw IoError(fmt::format("no VNA CSV files in '{}'", dir.string()));

  SpectrumMap map;
  for (const auto& [control, path] : files) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
    std::string line;
    size_t lineno = 0;
    int fcol = -1;
    int scol = -1;
    std::vector<double> freq;
    std::vector<double> vals;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#' || line[0] == '!') continue;
      const auto cells = split_csv(line);
      if (fcol < 0) {
        for (size_t k = 0; k < cells.size(); ++k) {
          const std::string name = lower(cells[k]);
          if (name == "frequency_hz") fcol = static_cast<int>(k);
          if (name == "s21_db") scol = static_cast<int>(k);
        }
        if (fcol < 0 || scol < 0) {
          throw IoError(fmt::format("{}: header must name frequency_Hz and s21_db", path.string()));
        }
        continue;
      }
      const auto need = static_cast<size_t>(std::max(fcol, scol));
      if (cells.size() <= need) throw IoError(fmt::format("{}:{}: short row", path.string(), lineno));
      freq.push_back(parse_double(cells[static_cast<size_t>(fcol)], "frequency_Hz", lineno) * 1e-6);
      vals.push_back(std::pow(10.0, parse_double(cells[static_cast<size_t>(scol)], "s21_db", lineno) / 10.0));
    }
    if (freq.empty()) throw IoError(fmt::format("{}: no data rows", path.string()));
    for (size_t k = 1; k < freq.size(); ++k) {
      if (!(freq[k] > freq[k - 1])) {
        throw IoError(fmt::format("{}: frequencies not strictly increasing", path.string()));
      }
    }
    if (map.probe.empty()) {
      map.probe = freq;
    } else if (freq.size() != map.probe.size() ||
               !std::equal(freq.begin(), freq.end(), map.probe.begin(),
                           [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::abs(b); })) {
      throw IoError(fmt::format("{}: frequency grid differs from the other traces", path.string()));
    }
    map.controls.push_back(control);
    map.data.insert(map.data.end(), vals.begin(), vals.end());
  }
  return map;
}

}  // namespace cmkerr

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "cmkerr/spectrum.hpp"

namespace cmkerr {

/// Binary grid: 32-byte little-endian header
///   "CMSM" | u32 n_controls | u32 n_probe | u32 flags | f64 probe_min | f64 probe_max
/// then n_controls f64 control values, the explicit probe grid when
/// flags & kExplicitProbe, the row-major |S21|^2 doubles and a u64 manifest hash.
inline constexpr std::uint32_t kMapFlagDriven = 1u;
inline constexpr std::uint32_t kMapFlagExplicitProbe = 2u;

struct LoadedMap {
  SpectrumMap map;
  std::optional<std::uint64_t> manifest_hash;
};

/// Long form: current,probe_MHz,s21_sq with a "# manifest <hex>" first line.
void write_map_csv(std::ostream& os, const SpectrumMap& map, std::uint64_t manifest_hash);
LoadedMap read_map_csv(std::istream& is);

void write_map_binary(std::ostream& os, const SpectrumMap& map, std::uint64_t manifest_hash);
LoadedMap read_map_binary(std::istream& is);

/// Dispatches on the file's leading bytes. Throws IoError.
LoadedMap read_map_file(const std::filesystem::path& path);
void write_map_csv_file(const std::filesystem::path& path, const SpectrumMap& map,
                        std::uint64_t manifest_hash);
void write_map_binary_file(const std::filesystem::path& path, const SpectrumMap& map,
                           std::uint64_t manifest_hash);

/// One CSV per control value (columns frequency_Hz, s21_db; the last number
/// in the file name is the current in A). Traces must share one frequency grid.
SpectrumMap read_vna_directory(const std::filesystem::path& dir);

/// Control value encoded in a file name such as "I_4.750A.csv".
std::optional<double> control_from_filename(const std::string& stem);

}  // namespace cmkerr

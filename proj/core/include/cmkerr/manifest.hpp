#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cmkerr {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hash_hex(std::uint64_t h);

/// Hash of a file's bytes; throws IoError.
std::uint64_t file_hash(const std::filesystem::path& path);

struct ManifestInput {
  std::string path;
  std::uint64_t hash = 0;
};

struct RunManifest {
  std::string command;
  std::string config_path;               // empty for built-in defaults
  std::vector<std::string> overrides;
  std::string output_dir;
  std::uint64_t seed = 0;
  std::string resolved_config;           // JSON text
  std::vector<std::string> arguments;    // resolved subcommand arguments (grids, drives)
  std::vector<ManifestInput> inputs;
  std::string version;
};

/// Hash of everything that determines the outputs. Paths, output directory
/// and worker count are excluded so reruns elsewhere give the same hash.
std::uint64_t manifest_hash(const RunManifest& m);

/// Full manifest as JSON, including the hash.
std::string manifest_json(const RunManifest& m);

}  // namespace cmkerr

#include "cmkerr/manifest.hpp"

#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <json.hpp>

#include "cmkerr/error.hpp"

namespace cmkerr {
namespace {

nlohmann::json hashed_part(const RunManifest& m) {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& in : m.inputs) inputs.push_back(hash_hex(in.hash));
  return {{"command", m.command},
          {"overrides", m.overrides},
          {"seed", m.seed},
          {"config", nlohmann::json::parse(m.resolved_config.empty() ? "null" : m.resolved_config)},
          {"arguments", m.arguments},
          {"inputs", inputs},
          {"version", m.version}};
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) { return fmt::format("{:016x}", h); }

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes);
}

std::uint64_t manifest_hash(const RunManifest& m) { return fnv1a64(hashed_part(m).dump()); }

std::string manifest_json(const RunManifest& m) {
  nlohmann::json j = hashed_part(m);
  j["config_path"] = m.config_path;
  j["output_dir"] = m.output_dir;
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& in : m.inputs) inputs.push_back({{"path", in.path}, {"hash", hash_hex(in.hash)}});
  j["inputs"] = inputs;
  j["manifest_hash"] = hash_hex(manifest_hash(m));
  return j.dump(2);
}

}  // namespace cmkerr

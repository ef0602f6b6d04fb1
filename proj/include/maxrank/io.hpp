#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "maxrank/errors.hpp"
#include "maxrank/version.hpp"

namespace maxrank {

// FNV-1a over a byte string; used for output digests in run manifests.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string hex64(std::uint64_t v) {
  static const char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

inline std::uint64_t file_digest(const std::filesystem::path& path) {
  return fnv1a64(read_file(path));
}

// Reproducibility record emitted alongside every output file: the command,
// the fully resolved config, the master seed and digests of what was
// written. Re-running with the recorded config reproduces the outputs
// byte for byte.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t master_seed = 0;
  double duration_seconds = 0.0;
  std::vector<std::filesystem::path> outputs;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config;
    j["master_seed"] = master_seed;
    j["artifact_version"] = kVersion;
    j["duration_seconds"] = duration_seconds;
    j["outputs"] = nlohmann::json::array();
    for (const auto& p : outputs) {
      j["outputs"].push_back({{"path", p.string()},
                              {"digest_fnv1a64", hex64(file_digest(p))}});
    }
    return j;
  }
};

inline std::filesystem::path manifest_path_for(
    const std::filesystem::path& output) {
  std::filesystem::path p = output;
  p += ".manifest.json";
  return p;
}

inline void write_manifest(const RunManifest& manifest,
                           const std::filesystem::path& primary_output) {
  const auto path = manifest_path_for(primary_output);
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest: " + path.string());
  out << manifest.to_json().dump(2) << "\n";
}

}  // namespace maxrank

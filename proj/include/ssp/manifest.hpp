#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ssp {

/// Reproducibility record emitted by every CLI run: the seed, an echo of the
/// effective configuration, and digests of every input file. Two runs with
/// identical manifests produce identical outputs.
struct RunManifest {
  std::string tool_version;
  std::string command;
  uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;  // key, value
  std::vector<std::pair<std::string, std::string>> inputs;  // path, digest

  bool operator==(const RunManifest&) const = default;
};

/// FNV-1a 64-bit digest of a file's bytes, as 16 hex characters.
std::string fnv1a64_file(const std::string& path);

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);

void save_manifest(const std::string& path, const RunManifest& m);
RunManifest load_manifest(const std::string& path);

}  // namespace ssp

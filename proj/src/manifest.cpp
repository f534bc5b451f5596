#include "ssp/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ssp/errors.hpp"

namespace ssp {

std::string fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw load_error(load_errc::missing_file, path + ": cannot open file");
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<uint8_t>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

std::string manifest_to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["tool_version"] = m.tool_version;
  j["command"] = m.command;
  j["seed"] = m.seed;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::array();
  for (const auto& [k, v] : m.config) cfg.push_back({{"key", k}, {"value", v}});
  j["config"] = cfg;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  for (const auto& [p, d] : m.inputs) inputs.push_back({{"path", p}, {"digest", d}});
  j["inputs"] = inputs;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  RunManifest m;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    m.tool_version = j.at("tool_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    for (const auto& e : j.at("config"))
      m.config.emplace_back(e.at("key").get<std::string>(),
                            e.at("value").get<std::string>());
    for (const auto& e : j.at("inputs"))
      m.inputs.emplace_back(e.at("path").get<std::string>(),
                            e.at("digest").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("manifest: ") + e.what());
  }
  return m;
}

void save_manifest(const std::string& path, const RunManifest& m) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw format_error(path + ": cannot open for writing");
  out << manifest_to_json(m);
  if (!out) throw format_error(path + ": write failed");
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw load_error(load_errc::missing_file, path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str());
}

}  // namespace ssp

#include "densopt/manifest.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>

namespace densopt {

std::string content_hash(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void RunManifest::add_output(const std::string& path, const std::string& content) {
  outputs.emplace_back(path, content_hash(content));
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["kind"] = "run_manifest";
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["degrees"] = degrees;
  j["seed"] = seed;
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& [path, hash] : outputs) outs.push_back({{"path", path}, {"hash", hash}});
  j["outputs"] = outs;
  j["wall_time_seconds"] = wall_time_seconds;
  j["solver_summary"] = solver_summary;
  return j.dump(2);
}

}  // namespace densopt

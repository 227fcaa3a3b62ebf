#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace densopt {

/// Reproducibility record emitted next to every command's artifacts: the
/// command line, a hash of the config text, degrees, seeds, and the output
/// files with their content hashes. Replaying the command with the same
/// binary reproduces files with identical hashes.
struct RunManifest {
  std::string command;
  std::string config_hash;
  std::vector<int> degrees;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> outputs;  // path, content hash
  double wall_time_seconds = 0.0;
  std::string solver_summary;

  void add_output(const std::string& path, const std::string& content);
  std::string to_json() const;
};

/// FNV-1a 64-bit content hash, hex-encoded.
std::string content_hash(const std::string& data);

}  // namespace densopt

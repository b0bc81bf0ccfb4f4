#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace stance {

// Provenance record written next to a command's outputs as
// "<command>.manifest.json". Paths are stored relative to the manifest's
// directory.
class RunManifest {
 public:
  RunManifest(std::string command, std::string config_hash, std::uint64_t seed);

  void param(const std::string& key, const std::string& value) { params_[key] = value; }
  void input(const std::filesystem::path& path);
  void output(const std::filesystem::path& path);

  // Hashes every registered file and writes "<name>.manifest.json" into
  // `dir`; the name defaults to the command.
  std::filesystem::path write(const std::filesystem::path& dir, const std::string& name = {}) const;

 private:
  std::string command_;
  std::string config_hash_;
  std::uint64_t seed_;
  std::string started_at_;
  std::chrono::steady_clock::time_point start_;
  std::map<std::string, std::string> params_;
  std::vector<std::filesystem::path> inputs_;
  std::vector<std::filesystem::path> outputs_;
};

// Files under `dir` (recursively) that no manifest in their own directory
// lists. Manifests themselves and anything below an excluded top-level
// directory name are skipped.
std::vector<std::filesystem::path> orphan_outputs(const std::filesystem::path& dir,
                                                  const std::vector<std::string>& excluded = {});

}  // namespace stance

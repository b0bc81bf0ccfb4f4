#include "stance/manifest.h"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "stance/annotation.h"
#include "stance/errors.h"
#include "stance/fsutil.h"

namespace stance {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

RunManifest::RunManifest(std::string command, std::string config_hash, std::uint64_t seed)
    : command_(std::move(command)),
      config_hash_(std::move(config_hash)),
      seed_(seed),
      started_at_(utc_timestamp()),
      start_(std::chrono::steady_clock::now()) {}

void RunManifest::input(const fs::path& path) { inputs_.push_back(path); }
void RunManifest::output(const fs::path& path) { outputs_.push_back(path); }

namespace {

std::string display_path(const fs::path& p, const fs::path& dir) {
  const auto rel = fs::weakly_canonical(p).lexically_relative(fs::weakly_canonical(dir));
  return rel.empty() ? fs::weakly_canonical(p).generic_string() : rel.generic_string();
}

}  // namespace

fs::path RunManifest::write(const fs::path& dir, const std::string& name) const {
  ordered_json j;
  j["command"] = command_;
  j["config_hash"] = config_hash_;
  j["seed"] = seed_;
  j["params"] = params_;
  auto files = [&](const std::vector<fs::path>& paths) {
    ordered_json out = ordered_json::object();
    for (const auto& p : paths) {
      if (fs::is_regular_file(p)) out[display_path(p, dir)] = sha256_file(p);
    }
    return out;
  };
  j["inputs"] = files(inputs_);
  j["outputs"] = files(outputs_);
  j["started_at"] = started_at_;
  j["finished_at"] = utc_timestamp();
  j["duration_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
  fs::create_directories(dir);
  const fs::path path = dir / ((name.empty() ? command_ : name) + ".manifest.json");
  atomic_write(path, j.dump(2) + "\n");
  return path;
}

std::vector<fs::path> orphan_outputs(const fs::path& dir, const std::vector<std::string>& excluded) {
  std::vector<fs::path> orphans;
  if (!fs::exists(dir)) return orphans;
  std::map<fs::path, std::set<std::string>> listed;  // directory -> names listed there
  std::vector<fs::path> files;
  for (auto it = fs::recursive_directory_iterator(dir); it != fs::recursive_directory_iterator(); ++it) {
    const auto rel = it->path().lexically_relative(dir);
    if (it->is_directory() && it.depth() == 0 &&
        std::find(excluded.begin(), excluded.end(), rel.generic_string()) != excluded.end()) {
      it.disable_recursion_pending();
      continue;
    }
    if (!it->is_regular_file()) continue;
    const std::string name = it->path().filename().string();
    if (name.size() > 14 && name.ends_with(".manifest.json")) {
      try {
        const auto j = nlohmann::json::parse(read_file(it->path()));
        for (const auto& [path, digest] : j.at("outputs").items()) {
          listed[it->path().parent_path()].insert(
              fs::weakly_canonical(it->path().parent_path() / path).filename().string());
        }
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("unreadable manifest " + it->path().string() + ": " + e.what());
      }
      continue;
    }
    files.push_back(it->path());
  }
  for (const auto& f : files) {
    const auto& names = listed[f.parent_path()];
    if (!names.count(f.filename().string())) orphans.push_back(f);
  }
  std::sort(orphans.begin(), orphans.end());
  return orphans;
}

}  // namespace stance

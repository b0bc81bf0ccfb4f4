#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stance/annotation.h"
#include "stance/dates.h"
#include "stance/embedding_cache.h"
#include "stance/remote.h"
#include "stance/zeroshot.h"

namespace stance {

// Flat key/value document with [section] headers. Values are quoted strings,
// numbers, true/false, or single-line arrays of quoted strings. Keys are
// addressed as "section.key".
class ConfigDocument {
 public:
  static ConfigDocument parse(std::string_view text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> string(const std::string& key) const;
  std::optional<double> number(const std::string& key) const;
  std::optional<std::int64_t> integer(const std::string& key) const;
  std::optional<bool> boolean(const std::string& key) const;
  std::optional<std::vector<std::string>> list(const std::string& key) const;
  std::vector<std::string> keys() const;

 private:
  struct Value {
    std::string raw;
    std::size_t line = 0;
  };
  const Value* find(const std::string& key) const;
  std::map<std::string, Value> values_;
};

struct AnnotationSettings {
  std::string guideline_version = "v1";
  std::vector<std::string> annotators;
  std::string third;
  std::size_t overlap = 0;
  SplitMode split = SplitMode::kDisjoint;
  Precedence precedence = Precedence::kFirstAnnotator;
};

struct ServiceSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string token_env;  // shared bearer token; empty disables auth
  std::size_t workers = 2;
};

struct PipelineConfig {
  std::filesystem::path data_dir = "stance-data";
  std::filesystem::path lexicon;  // empty: shipped default
  std::vector<std::string> publishers{"MainstreamGroup", "RadicalRightPortal"};
  std::vector<std::string> languages{"et"};
  std::optional<Date> window_start;
  std::optional<Date> window_end;
  std::uint64_t seed = 13;
  double threshold = 0.70;
  double nb_alpha = 1.0;
  std::size_t sampling_cap = 500;
  RemoteConfig remote;
  ChatConfig chat;
  std::size_t zeroshot_batch_size = 10;
  int zeroshot_retry_limit = 5;
  std::size_t zeroshot_concurrency = 1;
  EmbeddingConfig embedding;
  AnnotationSettings annotation;
  ServiceSettings service;
};

// Throws ValidationError for unknown keys, mistyped values, or a threshold
// outside (1/3, 1].
PipelineConfig config_from_document(const ConfigDocument& doc);
PipelineConfig load_config(const std::filesystem::path& path);

// Canonical JSON of every setting; token values are never included, only the
// names of the variables that hold them.
std::string config_to_json(const PipelineConfig& config);
std::string config_hash(const PipelineConfig& config);

}  // namespace stance

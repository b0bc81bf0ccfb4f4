#include "stance/config.h"

#include <charconv>
#include <set>

#include <json.hpp>

#include "stance/errors.h"
#include "stance/fsutil.h"
#include "stance/text.h"
#include "stance/trends.h"

namespace stance {

namespace {

std::string unquote(std::string_view raw, std::size_t line) {
  if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"') {
    throw ValidationError("config line " + std::to_string(line) + ": expected a quoted string");
  }
  std::string out;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    char c = raw[i];
    if (c == '\\' && i + 2 < raw.size()) {
      c = raw[++i];
      if (c == 'n') c = '\n';
      else if (c == 't') c = '\t';
    }
    out.push_back(c);
  }
  return out;
}

// Strips a trailing comment that is not inside quotes.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

}  // namespace

ConfigDocument ConfigDocument::parse(std::string_view text) {
  ConfigDocument doc;
  std::string section;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = trim(strip_comment(text.substr(pos, nl - pos)));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ValidationError("config line " + std::to_string(line_no) + ": bad section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = (section.empty() ? "" : section + ".") + std::string(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (value.empty()) throw ValidationError("config line " + std::to_string(line_no) + ": empty value for " + key);
    if (!doc.values_.emplace(key, Value{std::string(value), line_no}).second) {
      throw ValidationError("config line " + std::to_string(line_no) + ": duplicate key " + key);
    }
  }
  return doc;
}

const ConfigDocument::Value* ConfigDocument::find(const std::string& key) const {
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::optional<std::string> ConfigDocument::string(const std::string& key) const {
  const auto* v = find(key);
  if (!v) return std::nullopt;
  return unquote(v->raw, v->line);
}

std::optional<double> ConfigDocument::number(const std::string& key) const {
  const auto* v = find(key);
  if (!v) return std::nullopt;
  double out = 0;
  const auto res = std::from_chars(v->raw.data(), v->raw.data() + v->raw.size(), out);
  if (res.ec != std::errc{} || res.ptr != v->raw.data() + v->raw.size()) {
    throw ValidationError("config line " + std::to_string(v->line) + ": " + key + " must be a number");
  }
  return out;
}

std::optional<std::int64_t> ConfigDocument::integer(const std::string& key) const {
  const auto* v = find(key);
  if (!v) return std::nullopt;
  std::int64_t out = 0;
  const auto res = std::from_chars(v->raw.data(), v->raw.data() + v->raw.size(), out);
  if (res.ec != std::errc{} || res.ptr != v->raw.data() + v->raw.size()) {
    throw ValidationError("config line " + std::to_string(v->line) + ": " + key + " must be an integer");
  }
  return out;
}

std::optional<bool> ConfigDocument::boolean(const std::string& key) const {
  const auto* v = find(key);
  if (!v) return std::nullopt;
  if (v->raw == "true") return true;
  if (v->raw == "false") return false;
  throw ValidationError("config line " + std::to_string(v->line) + ": " + key + " must be true or false");
}

std::optional<std::vector<std::string>> ConfigDocument::list(const std::string& key) const {
  const auto* v = find(key);
  if (!v) return std::nullopt;
  const std::string_view raw = v->raw;
  if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']') {
    throw ValidationError("config line " + std::to_string(v->line) + ": " + key + " must be a [list]");
  }
  std::vector<std::string> out;
  std::string_view rest = trim(raw.substr(1, raw.size() - 2));
  while (!rest.empty()) {
    if (rest.front() != '"') throw ValidationError("config line " + std::to_string(v->line) + ": list items must be quoted");
    std::size_t end = 1;
    while (end < rest.size() && rest[end] != '"') end += rest[end] == '\\' ? 2 : 1;
    if (end >= rest.size()) throw ValidationError("config line " + std::to_string(v->line) + ": unterminated string");
    out.push_back(unquote(rest.substr(0, end + 1), v->line));
    rest = trim(rest.substr(end + 1));
    if (!rest.empty()) {
      if (rest.front() != ',') throw ValidationError("config line " + std::to_string(v->line) + ": expected ','");
      rest = trim(rest.substr(1));
    }
  }
  return out;
}

std::vector<std::string> ConfigDocument::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

PipelineConfig config_from_document(const ConfigDocument& doc) {
  static const std::set<std::string> known = {
      "data_dir", "lexicon", "seed", "threshold", "publishers", "languages", "window_start", "window_end",
      "nb.alpha", "similarity.cap",
      "remote.base_url", "remote.path", "remote.model", "remote.token_env", "remote.max_batch", "remote.concurrency",
      "remote.max_attempts",
      "zeroshot.base_url", "zeroshot.path", "zeroshot.model", "zeroshot.token_env", "zeroshot.temperature",
      "zeroshot.batch_size", "zeroshot.retry_limit", "zeroshot.concurrency", "zeroshot.max_attempts",
      "embedding.provider", "embedding.base_url", "embedding.path", "embedding.token_env", "embedding.batch_limit",
      "embedding.concurrency", "embedding.max_attempts",
      "annotation.guideline_version", "annotation.annotators", "annotation.third", "annotation.overlap",
      "annotation.split", "annotation.precedence",
      "service.host", "service.port", "service.token_env", "service.workers"};
  for (const auto& k : doc.keys()) {
    if (!known.count(k)) throw ValidationError("unknown config key '" + k + "'");
  }

  PipelineConfig c;
  auto set_str = [&](const char* key, std::string& out) {
    if (auto v = doc.string(key)) out = *v;
  };
  auto set_size = [&](const char* key, std::size_t& out, std::int64_t min) {
    if (auto v = doc.integer(key)) {
      if (*v < min) throw ValidationError(std::string(key) + " must be at least " + std::to_string(min));
      out = static_cast<std::size_t>(*v);
    }
  };
  auto set_int = [&](const char* key, int& out, std::int64_t min) {
    std::size_t tmp = static_cast<std::size_t>(out);
    set_size(key, tmp, min);
    out = static_cast<int>(tmp);
  };
  auto set_date = [&](const char* key, std::optional<Date>& out) {
    if (auto v = doc.string(key)) {
      out = parse_date(*v);
      if (!out) throw ValidationError(std::string(key) + " is not a date");
    }
  };

  if (auto v = doc.string("data_dir")) c.data_dir = *v;
  if (auto v = doc.string("lexicon")) c.lexicon = *v;
  if (auto v = doc.integer("seed")) c.seed = static_cast<std::uint64_t>(*v);
  if (auto v = doc.number("threshold")) c.threshold = *v;
  validate_threshold(c.threshold);
  if (auto v = doc.list("publishers")) c.publishers = *v;
  if (c.publishers.empty()) throw ValidationError("publisher registry is empty");
  if (auto v = doc.list("languages")) c.languages = *v;
  set_date("window_start", c.window_start);
  set_date("window_end", c.window_end);
  if (auto v = doc.number("nb.alpha")) c.nb_alpha = *v;
  if (!(c.nb_alpha > 0)) throw ValidationError("nb.alpha must be positive");
  set_size("similarity.cap", c.sampling_cap, 1);

  set_str("remote.base_url", c.remote.base_url);
  set_str("remote.path", c.remote.path);
  set_str("remote.model", c.remote.model);
  set_str("remote.token_env", c.remote.token_env);
  set_size("remote.max_batch", c.remote.max_batch, 1);
  set_size("remote.concurrency", c.remote.concurrency, 1);
  set_int("remote.max_attempts", c.remote.retry.max_attempts, 1);

  set_str("zeroshot.base_url", c.chat.base_url);
  set_str("zeroshot.path", c.chat.path);
  set_str("zeroshot.model", c.chat.model);
  set_str("zeroshot.token_env", c.chat.token_env);
  if (auto v = doc.number("zeroshot.temperature")) c.chat.temperature = *v;
  set_size("zeroshot.batch_size", c.zeroshot_batch_size, 1);
  set_int("zeroshot.retry_limit", c.zeroshot_retry_limit, 1);
  set_size("zeroshot.concurrency", c.zeroshot_concurrency, 1);
  set_int("zeroshot.max_attempts", c.chat.retry.max_attempts, 1);

  set_str("embedding.provider", c.embedding.provider);
  set_str("embedding.base_url", c.embedding.base_url);
  set_str("embedding.path", c.embedding.path);
  set_str("embedding.token_env", c.embedding.token_env);
  set_size("embedding.batch_limit", c.embedding.batch_limit, 1);
  set_size("embedding.concurrency", c.embedding.concurrency, 1);
  set_int("embedding.max_attempts", c.embedding.retry.max_attempts, 1);

  set_str("annotation.guideline_version", c.annotation.guideline_version);
  if (auto v = doc.list("annotation.annotators")) c.annotation.annotators = *v;
  set_str("annotation.third", c.annotation.third);
  set_size("annotation.overlap", c.annotation.overlap, 0);
  if (auto v = doc.string("annotation.split")) {
    auto m = parse_split_mode(*v);
    if (!m) throw ValidationError("annotation.split must be disjoint or interleaved");
    c.annotation.split = *m;
  }
  if (auto v = doc.string("annotation.precedence")) {
    auto p = parse_precedence(*v);
    if (!p) throw ValidationError("annotation.precedence must be first-annotator or majority-with-third");
    c.annotation.precedence = *p;
  }

  set_str("service.host", c.service.host);
  set_int("service.port", c.service.port, 0);
  set_str("service.token_env", c.service.token_env);
  set_size("service.workers", c.service.workers, 1);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  PipelineConfig c = config_from_document(ConfigDocument::parse(read_file(path)));
  // Relative paths in a config file are relative to the file.
  const auto base = path.parent_path();
  if (c.data_dir.is_relative()) c.data_dir = base / c.data_dir;
  if (!c.lexicon.empty() && c.lexicon.is_relative()) c.lexicon = base / c.lexicon;
  return c;
}

std::string config_to_json(const PipelineConfig& c) {
  using nlohmann::ordered_json;
  auto date = [](const std::optional<Date>& d) { return d ? ordered_json(d->iso()) : ordered_json(nullptr); };
  ordered_json j;
  j["data_dir"] = c.data_dir.string();
  j["lexicon"] = c.lexicon.string();
  j["publishers"] = c.publishers;
  j["languages"] = c.languages;
  j["window_start"] = date(c.window_start);
  j["window_end"] = date(c.window_end);
  j["seed"] = c.seed;
  j["threshold"] = c.threshold;
  j["nb"] = {{"alpha", c.nb_alpha}};
  j["similarity"] = {{"cap", c.sampling_cap}};
  j["remote"] = {{"base_url", c.remote.base_url}, {"path", c.remote.path},           {"model", c.remote.model},
                 {"token_env", c.remote.token_env}, {"max_batch", c.remote.max_batch},
                 {"concurrency", c.remote.concurrency}, {"max_attempts", c.remote.retry.max_attempts}};
  j["zeroshot"] = {{"base_url", c.chat.base_url},         {"path", c.chat.path},
                   {"model", c.chat.model},               {"token_env", c.chat.token_env},
                   {"temperature", c.chat.temperature},   {"batch_size", c.zeroshot_batch_size},
                   {"retry_limit", c.zeroshot_retry_limit}, {"concurrency", c.zeroshot_concurrency},
                   {"max_attempts", c.chat.retry.max_attempts}};
  j["embedding"] = {{"provider", c.embedding.provider},       {"base_url", c.embedding.base_url},
                    {"path", c.embedding.path},               {"token_env", c.embedding.token_env},
                    {"batch_limit", c.embedding.batch_limit}, {"concurrency", c.embedding.concurrency},
                    {"max_attempts", c.embedding.retry.max_attempts}};
  j["annotation"] = {{"guideline_version", c.annotation.guideline_version},
                     {"annotators", c.annotation.annotators},
                     {"third", c.annotation.third},
                     {"overlap", c.annotation.overlap},
                     {"split", c.annotation.split == SplitMode::kDisjoint ? "disjoint" : "interleaved"},
                     {"precedence", c.annotation.precedence == Precedence::kFirstAnnotator ? "first-annotator"
                                                                                           : "majority-with-third"}};
  j["service"] = {{"host", c.service.host}, {"port", c.service.port}, {"token_env", c.service.token_env},
                  {"workers", c.service.workers}};
  return j.dump(2) + "\n";
}

std::string config_hash(const PipelineConfig& c) { return sha256_hex(config_to_json(c)); }

}  // namespace stance

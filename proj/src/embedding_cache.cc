#include "stance/embedding_cache.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <json.hpp>

#include "stance/errors.h"
#include "stance/fsutil.h"
#include "stance/parallel.h"

namespace stance {

using nlohmann::json;

namespace {

void append_le(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double read_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

std::string safe_name(const std::string& provider) {
  std::string out;
  for (char c : provider) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out.empty() ? "_" : out;
}

void check_vector(const std::string& provider, const std::vector<double>& v, std::size_t expected_dim) {
  if (expected_dim && v.size() != expected_dim) {
    throw BackendError("embedding provider '" + provider + "' returned dimension " + std::to_string(v.size()) +
                       ", expected " + std::to_string(expected_dim));
  }
  double norm = 0;
  for (double x : v) {
    if (!std::isfinite(x)) throw BackendError("embedding provider '" + provider + "' returned a non-finite value");
    norm += x * x;
  }
  if (v.empty() || norm == 0) throw BackendError("embedding provider '" + provider + "' returned a zero vector");
}

}  // namespace

EmbeddingCache::EmbeddingCache(std::filesystem::path dir, std::string provider)
    : provider_(std::move(provider)) {
  if (dir.empty()) return;
  dir_ = dir / safe_name(provider_);
  const auto manifest_path = dir_ / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) return;
  std::size_t count = 0;
  try {
    const json m = json::parse(read_file(manifest_path));
    if (m.at("provider").get<std::string>() != provider_) {
      throw ValidationError("embedding cache " + dir_.string() + " belongs to provider " + m.at("provider").dump());
    }
    dim_ = m.at("dim").get<std::size_t>();
    count = m.at("count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ValidationError("corrupt embedding cache manifest " + manifest_path.string() + ": " + e.what());
  }
  const std::string bin = read_file(dir_ / "vectors.bin");
  const std::string ids_text = read_file(dir_ / "ids.txt");
  std::size_t pos = 0;
  while (ids_.size() < count && pos < ids_text.size()) {
    auto nl = ids_text.find('\n', pos);
    if (nl == std::string::npos) break;
    ids_.push_back(json::parse(ids_text.substr(pos, nl - pos)).get<std::string>());
    pos = nl + 1;
  }
  if (ids_.size() < count || bin.size() < count * dim_ * 8) {
    throw ValidationError("embedding cache " + dir_.string() + " is shorter than its manifest");
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> v(dim_);
    for (std::size_t d = 0; d < dim_; ++d) v[d] = read_le(bin.data() + (i * dim_ + d) * 8);
    vectors_[ids_[i]] = std::move(v);
  }
  // Drop bytes written after the last committed manifest.
  if (bin.size() != count * dim_ * 8) std::filesystem::resize_file(dir_ / "vectors.bin", count * dim_ * 8);
  if (pos != ids_text.size()) std::filesystem::resize_file(dir_ / "ids.txt", pos);
}

std::size_t EmbeddingCache::dim() const {
  std::lock_guard lock(mu_);
  return dim_;
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mu_);
  return vectors_.size();
}

std::optional<std::vector<double>> EmbeddingCache::get(const std::string& sentence_id) const {
  std::lock_guard lock(mu_);
  auto it = vectors_.find(sentence_id);
  if (it == vectors_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::put(std::span<const std::pair<std::string, std::vector<double>>> entries) {
  std::lock_guard lock(mu_);
  std::string bin, ids;
  std::size_t dim = dim_;
  std::vector<const std::pair<std::string, std::vector<double>>*> fresh;
  for (const auto& e : entries) {
    if (!dim) dim = e.second.size();
    check_vector(provider_, e.second, dim);
    if (vectors_.count(e.first)) continue;
    fresh.push_back(&e);
    for (double x : e.second) append_le(bin, x);
    ids += json(e.first).dump() + "\n";
  }
  if (fresh.empty()) return;
  if (!dir_.empty()) {
    std::filesystem::create_directories(dir_);
    durable_append(dir_ / "vectors.bin", bin);
    durable_append(dir_ / "ids.txt", ids);
    const json manifest = {{"provider", provider_}, {"dim", dim}, {"count", ids_.size() + fresh.size()},
                           {"format", "float64-le"}};
    atomic_write(dir_ / "manifest.json", manifest.dump(2) + "\n");
  }
  dim_ = dim;
  for (const auto* e : fresh) {
    ids_.push_back(e->first);
    vectors_[e->first] = e->second;
  }
}

HttpEmbeddingProvider::HttpEmbeddingProvider(EmbeddingConfig config, std::shared_ptr<HttpTransport> transport,
                                             Sleeper sleep)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleep)) {}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed(const std::vector<std::string>& texts) {
  const std::string body = json{{"sentences", texts}}.dump();
  const HttpResponse response =
      with_retries(config_.retry, sleep_, [&] { return transport_->post_json(config_.path, body); });
  if (response.status != 200) {
    throw BackendError("embedding provider '" + config_.provider + "' answered HTTP " + std::to_string(response.status));
  }
  try {
    const json j = json::parse(response.body);
    const auto dim = j.at("dim").get<std::size_t>();
    auto vectors = j.at("vectors").get<std::vector<std::vector<double>>>();
    if (vectors.size() != texts.size()) {
      throw BackendError("embedding provider '" + config_.provider + "' returned " + std::to_string(vectors.size()) +
                         " vectors for " + std::to_string(texts.size()) + " sentences");
    }
    for (const auto& v : vectors) check_vector(config_.provider, v, dim);
    return vectors;
  } catch (const json::exception& e) {
    throw BackendError("embedding provider '" + config_.provider + "' payload unusable: " + e.what());
  }
}

EmbeddingTable fetch_embeddings(EmbeddingProvider& provider, EmbeddingCache& cache,
                                std::span<const SentenceText> sentences, std::size_t batch_limit,
                                std::size_t concurrency, FetchStats* stats) {
  if (batch_limit == 0) throw ValidationError("embedding batch limit must be at least 1");
  EmbeddingTable table;
  std::vector<const SentenceText*> misses;
  std::set<std::string> queued;
  FetchStats local;
  for (const auto& s : sentences) {
    if (table.count(s.id)) continue;
    if (auto v = cache.get(s.id)) {
      table.emplace(s.id, std::move(*v));
      ++local.cache_hits;
    } else if (queued.insert(s.id).second) {
      misses.push_back(&s);
    }
  }
  const std::size_t batches = (misses.size() + batch_limit - 1) / batch_limit;
  std::vector<std::vector<std::pair<std::string, std::vector<double>>>> results(batches);
  parallel_for(batches, concurrency, [&](std::size_t b) {
    std::vector<std::string> texts;
    const std::size_t begin = b * batch_limit;
    const std::size_t end = std::min(misses.size(), begin + batch_limit);
    for (std::size_t i = begin; i < end; ++i) texts.push_back(misses[i]->text);
    auto vectors = provider.embed(texts);
    if (vectors.size() != texts.size()) throw BackendError("embedding provider '" + provider.id() + "' miscounted vectors");
    for (std::size_t i = begin; i < end; ++i) results[b].emplace_back(misses[i]->id, std::move(vectors[i - begin]));
    cache.put(results[b]);
  });
  local.requests = batches;
  for (auto& batch : results) {
    for (auto& [id, v] : batch) {
      ++local.fetched;
      table.emplace(id, std::move(v));
    }
  }
  if (stats) *stats = local;
  return table;
}

}  // namespace stance

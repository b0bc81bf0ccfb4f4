#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stance/classifier.h"
#include "stance/http.h"
#include "stance/similarity.h"

namespace stance {

// Per-provider vector cache under <dir>/<provider>/: vectors.bin holds
// little-endian float64 vectors back to back, ids.txt one sentence id per
// line in the same order, and manifest.json {provider, dim, count}. The
// manifest is rewritten atomically after each append and is the commit
// point: entries past its count (from an interrupted write) are discarded on
// open. Single writer, concurrent readers.
class EmbeddingCache {
 public:
  EmbeddingCache(std::filesystem::path dir, std::string provider);

  const std::string& provider() const { return provider_; }
  std::size_t dim() const;  // 0 while empty
  std::size_t size() const;
  std::optional<std::vector<double>> get(const std::string& sentence_id) const;

  // Throws BackendError when a vector's dimension differs from the cache's.
  void put(std::span<const std::pair<std::string, std::vector<double>>> entries);

 private:
  std::filesystem::path dir_;
  std::string provider_;
  mutable std::mutex mu_;
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  // One vector per text, in order. Throws BackendError.
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

struct EmbeddingConfig {
  std::string provider = "default";
  std::string base_url;
  std::string path = "/embed";
  std::string token_env;
  std::size_t batch_limit = 100;
  std::size_t concurrency = 1;
  RetryPolicy retry;
};

// Request {"sentences": [...]}, response {"dim": d, "vectors": [[...], ...]}.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(EmbeddingConfig config, std::shared_ptr<HttpTransport> transport, Sleeper sleep = real_sleep);
  std::string id() const override { return config_.provider; }
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

 private:
  EmbeddingConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleep_;
};

struct FetchStats {
  std::size_t cache_hits = 0;
  std::size_t fetched = 0;
  std::size_t requests = 0;
};

// Serves cached vectors and fetches the rest in batches of at most
// batch_limit, storing them. Vectors must be finite, non-zero and match the
// cache's dimension; violations throw BackendError naming the provider.
EmbeddingTable fetch_embeddings(EmbeddingProvider& provider, EmbeddingCache& cache,
                                std::span<const SentenceText> sentences, std::size_t batch_limit = 100,
                                std::size_t concurrency = 1, FetchStats* stats = nullptr);

}  // namespace stance

#pragma once

#include <memory>
#include <string>

#include "stance/classifier.h"
#include "stance/http.h"

namespace stance {

struct RemoteConfig {
  std::string base_url;
  std::string path = "/predict";
  std::string model;
  std::string token_env;  // environment variable holding the bearer token
  std::size_t max_batch = 32;
  std::size_t concurrency = 1;
  RetryPolicy retry;
};

// Client for an externally hosted fine-tuned classifier.
// Request: {"model": ..., "sentences": [...]}.
// Response: {"model_version": ..., "predictions": [{"against", "neutral",
// "supportive"}, ...]} in input order.
// An entry whose probabilities are negative, non-finite or off 1 by more
// than 1e-6 becomes a failure for that sentence; sums within 1e-6 are
// renormalized. A batch whose transport retries run out, or whose response
// is unusable as a whole, fails every sentence in it.
class RemoteClassifier : public Classifier {
 public:
  RemoteClassifier(RemoteConfig config, std::shared_ptr<HttpTransport> transport, Sleeper sleep = real_sleep);
  std::string backend() const override { return "remote"; }
  ClassifyOutcome classify(std::span<const SentenceText> sentences) override;

 private:
  ClassifyOutcome classify_batch(std::span<const SentenceText> batch);

  RemoteConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleep_;
};

// HttplibTransport for config.base_url with the configured bearer token.
std::shared_ptr<HttpTransport> make_transport(const std::string& base_url, const std::string& token_env);

}  // namespace stance

#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <thread>

#include "stance/errors.h"

namespace stance {

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Connection failures, timeouts, 429 and 5xx responses. Retryable.
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

// JSON-over-HTTP POST. Implementations throw TransportError for retryable
// failures and return the response otherwise.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& path, const std::string& body) = 0;
};

// cpp-httplib backed transport. `base_url` is scheme://host[:port][/prefix];
// request paths are appended to the prefix.
class HttplibTransport : public HttpTransport {
 public:
  HttplibTransport(const std::string& base_url, std::map<std::string, std::string> headers,
                   std::chrono::seconds timeout = std::chrono::seconds(60));
  ~HttplibTransport() override;

  HttpResponse post_json(const std::string& path, const std::string& body) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Headers carrying a bearer token read from `token_env`; empty when the
// variable is unset.
std::map<std::string, std::string> bearer_headers(const std::string& token_env);

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{8000};

  std::chrono::milliseconds delay_before(int attempt) const;  // attempt >= 2
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
inline void real_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

// Runs `fn` until it completes without TransportError, at most
// policy.max_attempts times, sleeping with exponential backoff in between.
// Rethrows the last TransportError when attempts run out. `attempts`
// receives the number of calls made.
template <typename F>
auto with_retries(const RetryPolicy& policy, const Sleeper& sleep, F&& fn, int* attempts = nullptr) {
  for (int attempt = 1;; ++attempt) {
    if (attempts) *attempts = attempt;
    try {
      return fn();
    } catch (const TransportError&) {
      if (attempt >= policy.max_attempts) throw;
      sleep(policy.delay_before(attempt + 1));
    }
  }
}

}  // namespace stance

#include "stance/http.h"

#include <algorithm>
#include <cstdlib>

#include "httplib.h"

namespace stance {

struct HttplibTransport::Impl {
  std::unique_ptr<httplib::Client> client;
  std::string prefix;
  httplib::Headers headers;
};

HttplibTransport::HttplibTransport(const std::string& base_url, std::map<std::string, std::string> headers,
                                   std::chrono::seconds timeout)
    : impl_(std::make_unique<Impl>()) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint URL lacks a scheme: " + base_url);
  const auto path_start = base_url.find('/', scheme_end + 3);
  const std::string origin = base_url.substr(0, path_start);
  if (path_start != std::string::npos) impl_->prefix = base_url.substr(path_start);
  while (!impl_->prefix.empty() && impl_->prefix.back() == '/') impl_->prefix.pop_back();
  impl_->client = std::make_unique<httplib::Client>(origin);
  if (!impl_->client->is_valid()) throw ValidationError("unsupported endpoint URL: " + base_url);
  impl_->client->set_connection_timeout(timeout);
  impl_->client->set_read_timeout(timeout);
  impl_->client->set_write_timeout(timeout);
  for (auto& [k, v] : headers) impl_->headers.emplace(k, v);
}

HttplibTransport::~HttplibTransport() = default;

HttpResponse HttplibTransport::post_json(const std::string& path, const std::string& body) {
  auto res = impl_->client->Post(impl_->prefix + path, impl_->headers, body, "application/json");
  if (!res) throw TransportError("request to " + impl_->prefix + path + " failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("endpoint returned HTTP " + std::to_string(res->status));
  }
  return HttpResponse{res->status, res->body};
}

std::map<std::string, std::string> bearer_headers(const std::string& token_env) {
  std::map<std::string, std::string> h;
  if (token_env.empty()) return h;
  if (const char* tok = std::getenv(token_env.c_str()); tok && *tok) h["Authorization"] = std::string("Bearer ") + tok;
  return h;
}

std::chrono::milliseconds RetryPolicy::delay_before(int attempt) const {
  double ms = static_cast<double>(base_delay.count());
  for (int i = 2; i < attempt; ++i) ms *= multiplier;
  return std::min(std::chrono::milliseconds(static_cast<long long>(ms)), max_delay);
}

}  // namespace stance

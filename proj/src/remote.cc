#include "stance/remote.h"

#include <cmath>

#include <json.hpp>

#include "stance/errors.h"
#include "stance/parallel.h"

namespace stance {

using nlohmann::json;

RemoteClassifier::RemoteClassifier(RemoteConfig config, std::shared_ptr<HttpTransport> transport, Sleeper sleep)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleep)) {
  if (config_.max_batch == 0) throw ValidationError("remote max_batch must be at least 1");
}

ClassifyOutcome RemoteClassifier::classify(std::span<const SentenceText> sentences) {
  const std::size_t batches = (sentences.size() + config_.max_batch - 1) / config_.max_batch;
  std::vector<ClassifyOutcome> parts(batches);
  parallel_for(batches, config_.concurrency, [&](std::size_t b) {
    const std::size_t begin = b * config_.max_batch;
    parts[b] = classify_batch(sentences.subspan(begin, std::min(config_.max_batch, sentences.size() - begin)));
  });
  ClassifyOutcome out;
  for (auto& p : parts) {
    for (auto& x : p.predictions) out.predictions.push_back(std::move(x));
    for (auto& f : p.failures) out.failures.push_back(std::move(f));
  }
  return out;
}

ClassifyOutcome RemoteClassifier::classify_batch(std::span<const SentenceText> batch) {
  ClassifyOutcome out;
  json request = {{"model", config_.model}, {"sentences", json::array()}};
  for (const auto& s : batch) request["sentences"].push_back(s.text);
  const std::string body = request.dump();

  int attempts = 0;
  auto fail_all = [&](const std::string& reason) {
    for (const auto& s : batch) out.failures.push_back({s.id, reason, attempts});
    return out;
  };

  HttpResponse response;
  try {
    response = with_retries(config_.retry, sleep_, [&] { return transport_->post_json(config_.path, body); }, &attempts);
  } catch (const TransportError& e) {
    return fail_all(std::string("transport: ") + e.what());
  }
  if (response.status != 200) return fail_all("HTTP status " + std::to_string(response.status));

  json parsed;
  try {
    parsed = json::parse(response.body);
  } catch (const json::exception&) {
    return fail_all("response is not JSON");
  }
  if (!parsed.is_object() || !parsed.contains("predictions") || !parsed["predictions"].is_array()) {
    return fail_all("response lacks a predictions array");
  }
  const auto& preds = parsed["predictions"];
  if (preds.size() != batch.size()) {
    return fail_all("response has " + std::to_string(preds.size()) + " predictions for " +
                    std::to_string(batch.size()) + " sentences");
  }
  std::string version = config_.model;
  if (parsed.contains("model_version") && parsed["model_version"].is_string()) {
    version = parsed["model_version"].get<std::string>();
  }

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& p = preds[i];
    Probs probs{};
    bool ok = p.is_object();
    const char* keys[3] = {"against", "neutral", "supportive"};
    for (std::size_t c = 0; ok && c < 3; ++c) {
      ok = p.contains(keys[c]) && p[keys[c]].is_number();
      if (ok) probs[c] = p[keys[c]].get<double>();
    }
    if (!ok) {
      out.failures.push_back({batch[i].id, "prediction lacks numeric against/neutral/supportive", attempts});
      continue;
    }
    double sum = 0;
    bool finite = true;
    for (double x : probs) {
      finite = finite && std::isfinite(x) && x >= 0;
      sum += x;
    }
    if (!finite || std::abs(sum - 1.0) > 1e-6) {
      out.failures.push_back({batch[i].id, "probabilities invalid (sum " + std::to_string(sum) + ")", attempts});
      continue;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      for (auto& x : probs) x /= sum;
    }
    out.predictions.push_back(make_prediction(batch[i].id, probs, "remote", version));
  }
  return out;
}

std::shared_ptr<HttpTransport> make_transport(const std::string& base_url, const std::string& token_env) {
  if (base_url.empty()) throw ValidationError("endpoint base URL is not configured");
  return std::make_shared<HttplibTransport>(base_url, bearer_headers(token_env));
}

}  // namespace stance

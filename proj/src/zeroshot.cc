#include "stance/zeroshot.h"

#include <algorithm>
#include <map>
#include <regex>

#include <json.hpp>

#include "stance/errors.h"
#include "stance/fsutil.h"
#include "stance/parallel.h"
#include "stance/text.h"

namespace stance {

using nlohmann::json;

PromptTemplate PromptTemplate::standard() {
  PromptTemplate t;
  t.instruction =
      "Stance detection. Tag the following numbered sentences as being either \"supportive\", \"against\" or "
      "\"neutral\" towards the topic of immigration. \"Supportive\" means: \"supports immigration, friendly to "
      "foreigners, wants to help refugees and asylum seekers\". \"Against\" means: \"against immigration, dislikes "
      "foreigners, dislikes refugees and asylum seekers, dislikes people who help immigrants\". \"Neutral\" means: "
      "\"neutral stance, neutral facts about immigration, neutral reporting about foreigners, refugees, asylum "
      "seekers\". Don't explain, output only sentence number and stance tag.";
  t.batch_size = 10;
  return t;
}

void PromptTemplate::validate() const {
  if (batch_size == 0) throw ValidationError("prompt batch size must be at least 1");
  const std::string lower = to_lower_ascii(instruction);
  for (const char* def : {"\"supportive\" means", "\"against\" means", "\"neutral\" means"}) {
    if (lower.find(def) == std::string::npos) {
      throw ValidationError(std::string("prompt instruction lacks the definition ") + def);
    }
  }
}

std::string build_prompt(const PromptTemplate& tmpl, std::span<const std::string> sentences) {
  if (sentences.empty()) throw ValidationError("cannot build a prompt for an empty batch");
  if (sentences.size() > tmpl.batch_size) {
    throw ValidationError("batch of " + std::to_string(sentences.size()) + " exceeds the prompt batch size " +
                          std::to_string(tmpl.batch_size));
  }
  std::string out = tmpl.instruction + "\n\n";
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i) out += "\n";
    out += std::to_string(i + 1) + ". " + sentences[i];
  }
  return out;
}

ParseResult parse_llm_response(std::string_view text, std::size_t expected_n) {
  static const std::regex line_re(R"(^\s*(\d+)\s*[.):]\s*(.*?)\s*$)");
  std::map<std::size_t, StanceLabel> labels;
  std::size_t found = 0;
  bool duplicate_or_range = false;
  InvalidTag invalid;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (std::regex_match(line, m, line_re)) {
      ++found;
      const auto label = parse_label(m[2].str());
      if (!label || *label == StanceLabel::kAmbiguous || to_lower_ascii(m[2].str()) == "pro") {
        invalid.lines.push_back(line);
        continue;
      }
      const std::size_t number = std::stoul(m[1].str());
      if (number < 1 || number > expected_n || !labels.emplace(number, *label).second) duplicate_or_range = true;
    }
    if (nl == text.size()) break;
  }
  if (!invalid.lines.empty()) return invalid;
  if (found != expected_n || duplicate_or_range || labels.size() != expected_n) return CountMismatch{found, expected_n};
  std::vector<StanceLabel> out;
  for (const auto& [n, l] : labels) out.push_back(l);
  return out;
}

HttpChatClient::HttpChatClient(ChatConfig config, std::shared_ptr<HttpTransport> transport, Sleeper sleep)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleep)) {}

std::string HttpChatClient::complete(const std::string& prompt) {
  const json request = {{"model", config_.model},
                        {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                        {"temperature", config_.temperature}};
  const std::string body = request.dump();
  const HttpResponse response =
      with_retries(config_.retry, sleep_, [&] { return transport_->post_json(config_.path, body); });
  if (response.status != 200) throw BackendError("chat endpoint answered HTTP " + std::to_string(response.status));
  try {
    return json::parse(response.body).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("chat endpoint payload unusable: ") + e.what());
  }
}

namespace {

std::string describe(const ParseResult& r) {
  if (std::holds_alternative<InvalidTag>(r)) {
    return "invalid tag on " + std::to_string(std::get<InvalidTag>(r).lines.size()) + " line(s)";
  }
  if (const auto* c = std::get_if<CountMismatch>(&r)) {
    return "expected " + std::to_string(c->expected) + " tags, found " + std::to_string(c->found);
  }
  return "ok";
}

}  // namespace

ZeroShotResult zeroshot_classify(ChatClient& client, const PromptTemplate& tmpl,
                                 std::span<const SentenceText> sentences, const ZeroShotOptions& options) {
  tmpl.validate();
  if (options.retry_limit < 1) throw ValidationError("zero-shot retry limit must be at least 1");
  const std::size_t n_batches = (sentences.size() + tmpl.batch_size - 1) / tmpl.batch_size;
  std::vector<ClassifyOutcome> parts(n_batches);
  ZeroShotResult result;
  result.batches.resize(n_batches);
  std::mutex audit_mu;

  auto audit = [&](std::size_t batch, int attempt, const std::string& prompt, const std::string& response,
                   const std::string& outcome) {
    if (options.audit_log.empty()) return;
    const json entry = {{"ts", utc_timestamp()}, {"model", client.model()}, {"batch", batch},
                        {"attempt", attempt},    {"prompt", prompt},        {"response", response},
                        {"outcome", outcome}};
    std::lock_guard lock(audit_mu);
    durable_append(options.audit_log, entry.dump() + "\n");
  };

  parallel_for(n_batches, options.concurrency, [&](std::size_t b) {
    const std::size_t begin = b * tmpl.batch_size;
    const auto batch = sentences.subspan(begin, std::min(tmpl.batch_size, sentences.size() - begin));
    std::vector<std::string> texts;
    for (const auto& s : batch) texts.push_back(s.text);
    const std::string prompt = build_prompt(tmpl, texts);

    BatchLog& log = result.batches[b];
    log.index = b;
    log.size = batch.size();
    std::string last_problem;
    for (int attempt = 1; attempt <= options.retry_limit; ++attempt) {
      log.attempts = attempt;
      std::string response;
      try {
        response = client.complete(prompt);
      } catch (const BackendError& e) {
        last_problem = std::string("transport: ") + e.what();
        audit(b, attempt, prompt, "", last_problem);
        break;
      }
      const ParseResult parsed = parse_llm_response(response, batch.size());
      last_problem = describe(parsed);
      audit(b, attempt, prompt, response, last_problem);
      if (const auto* labels = std::get_if<std::vector<StanceLabel>>(&parsed)) {
        for (std::size_t i = 0; i < batch.size(); ++i) {
          parts[b].predictions.push_back(one_hot_prediction(batch[i].id, (*labels)[i], "zeroshot", client.model()));
        }
        log.ok = true;
        return;
      }
    }
    for (const auto& s : batch) parts[b].failures.push_back({s.id, last_problem, log.attempts});
  });

  for (auto& p : parts) {
    for (auto& x : p.predictions) result.outcome.predictions.push_back(std::move(x));
    for (auto& f : p.failures) result.outcome.failures.push_back(std::move(f));
  }
  return result;
}

}  // namespace stance

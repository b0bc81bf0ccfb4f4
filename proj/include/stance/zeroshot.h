#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stance/classifier.h"
#include "stance/http.h"

namespace stance {

struct PromptTemplate {
  std::string instruction;
  std::size_t batch_size = 10;

  // The instruction used for the published zero-shot experiment.
  static PromptTemplate standard();
  // Throws ValidationError when a label definition is missing or the batch
  // size is zero.
  void validate() const;
};

// Instruction, a blank line, then "1. <sentence>" lines. Throws
// ValidationError for an empty or oversized batch.
std::string build_prompt(const PromptTemplate& tmpl, std::span<const std::string> sentences);

struct InvalidTag {
  std::vector<std::string> lines;  // offending response lines
};
struct CountMismatch {
  std::size_t found = 0;
  std::size_t expected = 0;
};
using ParseResult = std::variant<std::vector<StanceLabel>, InvalidTag, CountMismatch>;

// Reads "<number>. <tag>" lines (also "<number>) <tag>" and "<number>: <tag>").
// Tags compare case-insensitively after trimming. Lines without a leading
// number are ignored. Succeeds only with exactly one valid tag for each of
// 1..expected_n; labels come back in sentence-number order.
ParseResult parse_llm_response(std::string_view text, std::size_t expected_n);

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Returns the assistant message text. Throws BackendError when the
  // endpoint cannot be reached or answers with an unusable payload.
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::string model() const = 0;
};

struct ChatConfig {
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string token_env;
  double temperature = 0.0;
  RetryPolicy retry;
};

// Chat-completion wire shape: {"model", "messages": [{"role": "user",
// "content"}], "temperature"} answered by {"choices": [{"message":
// {"content"}}]}.
class HttpChatClient : public ChatClient {
 public:
  HttpChatClient(ChatConfig config, std::shared_ptr<HttpTransport> transport, Sleeper sleep = real_sleep);
  std::string complete(const std::string& prompt) override;
  std::string model() const override { return config_.model; }

 private:
  ChatConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleep_;
};

struct ZeroShotOptions {
  int retry_limit = 5;            // requests per batch, first one included
  std::size_t concurrency = 1;    // batches in flight
  std::filesystem::path audit_log;  // JSONL; empty disables auditing
};

struct BatchLog {
  std::size_t index = 0;
  std::size_t size = 0;
  int attempts = 0;
  bool ok = false;
};

struct ZeroShotResult {
  ClassifyOutcome outcome;
  std::vector<BatchLog> batches;
};

// Chunks sentences into template-sized batches in input order and asks for
// each until the response parses or the retry limit is reached. Sentences of
// a batch that never parses become failure records.
ZeroShotResult zeroshot_classify(ChatClient& client, const PromptTemplate& tmpl,
                                 std::span<const SentenceText> sentences, const ZeroShotOptions& options = {});

class ZeroShotClassifier : public Classifier {
 public:
  ZeroShotClassifier(std::shared_ptr<ChatClient> client, PromptTemplate tmpl, ZeroShotOptions options)
      : client_(std::move(client)), template_(std::move(tmpl)), options_(std::move(options)) {}
  std::string backend() const override { return "zeroshot"; }
  ClassifyOutcome classify(std::span<const SentenceText> sentences) override {
    return zeroshot_classify(*client_, template_, sentences, options_).outcome;
  }

 private:
  std::shared_ptr<ChatClient> client_;
  PromptTemplate template_;
  ZeroShotOptions options_;
};

}  // namespace stance

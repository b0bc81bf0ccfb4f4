#pragma once

#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stance/config.h"
#include "stance/corpus.h"
#include "stance/dates.h"
#include "stance/http.h"
#include "stance/jobs.h"

namespace stance {

// Where every artifact lives under the data directory.
struct DataLayout {
  std::filesystem::path root;

  std::filesystem::path articles() const { return root / "articles"; }
  std::filesystem::path extract() const { return root / "extract"; }
  std::filesystem::path sentences() const { return extract() / "sentences.jsonl"; }
  std::filesystem::path hits() const { return extract() / "hits.jsonl"; }
  std::filesystem::path annotation() const { return root / "annotation"; }
  std::filesystem::path annotation_log() const { return annotation() / "log.jsonl"; }
  std::filesystem::path sample() const { return annotation() / "sample.csv"; }
  std::filesystem::path batches() const { return annotation() / "batches.json"; }
  std::filesystem::path models() const { return root / "models"; }
  std::filesystem::path nb_model() const { return models() / "nb.json"; }
  std::filesystem::path predictions() const { return root / "predictions"; }
  std::filesystem::path predictions_file(const std::string& backend) const {
    return predictions() / (backend + ".csv");
  }
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path trends() const { return root / "trends"; }
  std::filesystem::path similarity() const { return root / "similarity"; }
  std::filesystem::path embeddings() const { return root / "embeddings"; }
  std::filesystem::path jobs() const { return root / "jobs"; }
};

// Transports used instead of real HTTP clients when set (tests, mocks).
struct BackendOverrides {
  std::shared_ptr<HttpTransport> remote;
  std::shared_ptr<HttpTransport> chat;
  std::shared_ptr<HttpTransport> embedding;
  Sleeper sleep = real_sleep;
};

struct CommandContext {
  PipelineConfig config;
  BackendOverrides backends;
  JobContext* job = nullptr;  // progress and cancellation when run as a job

  DataLayout layout() const { return DataLayout{config.data_dir}; }
};

// Machine-readable result of a command; the CLI prints it, the service
// returns it.
using Summary = nlohmann::ordered_json;

Summary run_ingest(const CommandContext& ctx, std::istream& in, IngestFormat format, const std::string& publisher,
                   const std::string& source_label = "stdin");
// Format defaults from the file extension (.csv or .jsonl).
Summary run_ingest_file(const CommandContext& ctx, const std::filesystem::path& file,
                        std::optional<IngestFormat> format, const std::string& publisher);

Summary run_extract(const CommandContext& ctx);

Summary run_sample(const CommandContext& ctx, std::size_t n);

Summary run_annotate_export(const CommandContext& ctx, const std::filesystem::path& out);
Summary run_annotate_import(const CommandContext& ctx, const std::filesystem::path& in);

// Trains on a labeled CSV when given, otherwise on the resolved live
// annotations joined with the extracted sentence text.
Summary run_train_nb(const CommandContext& ctx, const std::optional<std::filesystem::path>& labeled);

struct ClassifyOptions {
  std::string backend = "nb";  // nb, remote or zeroshot
  std::optional<std::filesystem::path> model;  // nb only; default models/nb.json
};
// Failed sentences are written to predictions/<backend>.failures.csv. Throws
// BackendError when not a single sentence could be classified.
Summary run_classify(const CommandContext& ctx, const ClassifyOptions& options);

struct EvalOptions {
  std::string backend = "nb";
  std::size_t k = 5;
  double eval_fraction = 0.2;
  std::optional<std::filesystem::path> labeled;
  // Scores an existing prediction file against the labels instead of
  // cross-validating.
  std::optional<std::filesystem::path> predictions;
};
Summary run_eval(const CommandContext& ctx, const EvalOptions& options);

Summary run_compare(const CommandContext& ctx, const std::filesystem::path& first,
                    const std::filesystem::path& second);

struct TrendOptions {
  std::string backend = "nb";
  std::optional<std::filesystem::path> predictions;  // default predictions/<backend>.csv
  Granularity granularity = Granularity::kMonth;
  std::optional<double> threshold;
  bool plot_data = false;
};
Summary run_trends(const CommandContext& ctx, const TrendOptions& options);

struct SimilarityCommandOptions {
  std::string backend = "nb";
  std::optional<std::filesystem::path> predictions;
};
Summary run_similarity(const CommandContext& ctx, const SimilarityCommandOptions& options);

Summary run_emit_train_config(const CommandContext& ctx, const std::string& model,
                              const std::optional<std::filesystem::path>& out);

// Files under the data directory not listed by a manifest. Store-owned
// directories (jobs, embeddings) are exempt.
std::vector<std::filesystem::path> lint_data_dir(const DataLayout& layout);

}  // namespace stance

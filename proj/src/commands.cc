#include "stance/commands.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "stance/annotation.h"
#include "stance/article_store.h"
#include "stance/csv.h"
#include "stance/dataset.h"
#include "stance/embedding_cache.h"
#include "stance/errors.h"
#include "stance/eval.h"
#include "stance/extract.h"
#include "stance/fsutil.h"
#include "stance/lexicon.h"
#include "stance/manifest.h"
#include "stance/naive_bayes.h"
#include "stance/prediction.h"
#include "stance/remote.h"
#include "stance/similarity.h"
#include "stance/training_config.h"
#include "stance/trends.h"
#include "stance/zeroshot.h"

namespace stance {

namespace fs = std::filesystem;

namespace {

RunManifest start_manifest(const CommandContext& ctx, const std::string& command) {
  return RunManifest(command, config_hash(ctx.config), ctx.config.seed);
}

void emit(RunManifest& manifest, const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  atomic_write(path, content);
  manifest.output(path);
}

template <typename Writer>
std::string render(Writer&& writer) {
  std::ostringstream out;
  writer(out);
  return out.str();
}

void check_cancelled(const CommandContext& ctx) {
  if (ctx.job && ctx.job->cancelled()) throw std::runtime_error("cancelled");
}

void progress(const CommandContext& ctx, std::size_t done, std::size_t total) {
  if (ctx.job) ctx.job->progress(done, total);
}

const fs::path& require_file(const fs::path& path, const std::string& hint) {
  if (!fs::is_regular_file(path)) throw ValidationError("missing " + path.string() + " (" + hint + ")");
  return path;
}

std::string format_name(IngestFormat f) { return f == IngestFormat::kCsv ? "csv" : "jsonl"; }

struct ExtractData {
  std::vector<ExtractedSentence> sentences;
  std::vector<GroupHit> hits;
};

ExtractData load_extract(const DataLayout& layout, RunManifest& manifest) {
  ExtractData data;
  data.sentences = sentences_from_jsonl(read_file(require_file(layout.sentences(), "run extract first")));
  data.hits = hits_from_jsonl(read_file(require_file(layout.hits(), "run extract first")));
  manifest.input(layout.sentences());
  manifest.input(layout.hits());
  return data;
}

// Topical sentences in extraction order.
std::vector<SentenceText> topical_texts(const ExtractData& data) {
  const auto groups = groups_by_sentence(data.hits);
  std::vector<SentenceText> out;
  for (const auto& s : data.sentences) {
    std::string id = s.sentence.id();
    if (groups.count(id)) out.push_back({std::move(id), s.sentence.text});
  }
  return out;
}

std::vector<Prediction> load_predictions(const fs::path& path, RunManifest& manifest) {
  std::ifstream in(require_file(path, "run classify first"), std::ios::binary);
  manifest.input(path);
  return read_predictions_csv(in);
}

// Live annotations resolved to one label per sentence, joined with the text.
std::vector<LabeledSentence> annotated_sentences(const CommandContext& ctx, RunManifest& manifest) {
  const auto layout = ctx.layout();
  AnnotationStore store(require_file(layout.annotation_log(), "no annotations recorded"));
  manifest.input(layout.annotation_log());
  const auto data = load_extract(layout, manifest);
  const auto index = index_sentences(data.sentences);
  const auto live = store.live();
  const auto& a = ctx.config.annotation;
  std::vector<LabeledSentence> out;
  for (const auto& [id, label] : resolve_labels(live, a.precedence, a.annotators, a.third)) {
    auto it = index.find(id);
    if (it == index.end()) throw ValidationError("annotation for unknown sentence " + id);
    out.push_back({id, it->second->sentence.text, label});
  }
  return out;
}

std::vector<LabeledSentence> labeled_input(const CommandContext& ctx, const std::optional<fs::path>& labeled,
                                           RunManifest& manifest) {
  if (!labeled) return annotated_sentences(ctx, manifest);
  std::ifstream in(require_file(*labeled, "labeled CSV"), std::ios::binary);
  manifest.input(*labeled);
  return read_labeled_csv(in);
}

std::shared_ptr<HttpTransport> transport_for(const std::shared_ptr<HttpTransport>& injected, const std::string& base_url,
                                             const std::string& token_env, const std::string& what) {
  if (injected) return injected;
  if (base_url.empty()) throw ValidationError("no base_url configured for the " + what + " endpoint");
  return make_transport(base_url, token_env);
}


void check_backend(const std::string& backend) {
  if (backend != "nb" && backend != "remote" && backend != "zeroshot") {
    throw ValidationError("unknown backend '" + backend + "' (expected nb, remote or zeroshot)");
  }
}

ZeroShotOptions zeroshot_options(const PipelineConfig& c, fs::path audit) {
  ZeroShotOptions opts;
  opts.retry_limit = c.zeroshot_retry_limit;
  opts.concurrency = c.zeroshot_concurrency;
  opts.audit_log = std::move(audit);
  return opts;
}

PromptTemplate zeroshot_template(const PipelineConfig& c) {
  PromptTemplate tmpl = PromptTemplate::standard();
  tmpl.batch_size = c.zeroshot_batch_size;
  tmpl.validate();
  return tmpl;
}

// Factories for the stateless network backends; nb is handled by callers.
ClassifierFactory network_factory(const CommandContext& ctx, const std::string& backend, const fs::path& audit) {
  const auto& c = ctx.config;
  const Sleeper sleep = ctx.backends.sleep;
  if (backend == "remote") {
    auto transport = transport_for(ctx.backends.remote, c.remote.base_url, c.remote.token_env, "remote inference");
    const RemoteConfig cfg = c.remote;
    return [cfg, transport, sleep](std::span<const LabeledSentence>) {
      return std::make_unique<RemoteClassifier>(cfg, transport, sleep);
    };
  }
  auto transport = transport_for(ctx.backends.chat, c.chat.base_url, c.chat.token_env, "chat");
  auto client = std::make_shared<HttpChatClient>(c.chat, transport, sleep);
  const PromptTemplate tmpl = zeroshot_template(c);
  const ZeroShotOptions opts = zeroshot_options(c, audit);
  return [client, tmpl, opts](std::span<const LabeledSentence>) {
    return std::make_unique<ZeroShotClassifier>(client, tmpl, opts);
  };
}

std::size_t chunk_size(const PipelineConfig& c, const std::string& backend) {
  std::size_t unit = 1;
  if (backend == "remote") unit = std::max<std::size_t>(1, c.remote.max_batch);
  if (backend == "zeroshot") unit = std::max<std::size_t>(1, c.zeroshot_batch_size);
  return std::max<std::size_t>(1, 1000 / unit) * unit;
}

Summary label_counts(std::span<const Prediction> predictions) {
  std::array<std::size_t, 3> counts{};
  for (const auto& p : predictions) ++counts[static_cast<std::size_t>(p.label)];
  Summary j;
  for (std::size_t c = 0; c < 3; ++c) j[std::string(label_name(kStanceClasses[c]))] = counts[c];
  return j;
}

Summary metrics_summary(const EvalReport& r) {
  Summary j;
  j["macro_f1"] = r.macro.f1;
  j["weighted_f1"] = r.weighted.f1;
  j["accuracy"] = r.accuracy;
  for (std::size_t c = 0; c < 3; ++c) j["f1"][std::string(label_name(kStanceClasses[c]))] = r.per_class[c].f1;
  return j;
}

void add_article_files(RunManifest& manifest, const DataLayout& layout, bool as_output) {
  if (!fs::exists(layout.articles())) return;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(layout.articles())) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".jsonl" || ext == ".idx")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) as_output ? manifest.output(f) : manifest.input(f);
}

Summary ingest_impl(const CommandContext& ctx, std::istream& in, IngestFormat format, const std::string& publisher,
                    const std::string& source_label, const fs::path* input) {
  const auto layout = ctx.layout();
  const auto& c = ctx.config;
  RunManifest manifest = start_manifest(ctx, "ingest");
  manifest.param("publisher", publisher);
  manifest.param("format", format_name(format));
  manifest.param("source", source_label);
  if (input) manifest.input(*input);

  ArticleStore store(layout.root);
  IngestOptions opts;
  opts.publishers = c.publishers;
  opts.languages = c.languages;
  opts.window_start = c.window_start;
  opts.window_end = c.window_end;
  const IngestReport report = ingest_articles(in, format, publisher, store, opts);
  store.flush();
  add_article_files(manifest, layout, true);
  fs::create_directories(layout.articles());
  manifest.write(layout.articles());

  Summary s;
  s["accepted"] = report.accepted;
  s["rejected"] = report.rejects.size();
  s["rejects"] = Summary::array();
  for (const auto& r : report.rejects) s["rejects"].push_back({{"row", r.row}, {"id", r.id}, {"reason", r.reason}});
  s["articles_in_store"] = store.size();
  return s;
}

}  // namespace

Summary run_ingest(const CommandContext& ctx, std::istream& in, IngestFormat format, const std::string& publisher,
                   const std::string& source_label) {
  return ingest_impl(ctx, in, format, publisher, source_label, nullptr);
}

Summary run_ingest_file(const CommandContext& ctx, const fs::path& file, std::optional<IngestFormat> format,
                        const std::string& publisher) {
  if (!format) {
    format = parse_ingest_format(file.extension().string().substr(file.extension().empty() ? 0 : 1));
    if (!format) throw ValidationError("cannot tell the format of " + file.string() + "; pass --format");
  }
  std::ifstream in(require_file(file, "ingest input"), std::ios::binary);
  return ingest_impl(ctx, in, *format, publisher, file.filename().string(), &file);
}

Summary run_extract(const CommandContext& ctx) {
  const auto layout = ctx.layout();
  RunManifest manifest = start_manifest(ctx, "extract");
  manifest.param("lexicon", ctx.config.lexicon.empty() ? "default" : ctx.config.lexicon.string());
  if (!ctx.config.lexicon.empty()) manifest.input(ctx.config.lexicon);
  std::optional<Lexicon> custom;
  if (!ctx.config.lexicon.empty()) custom.emplace(load_lexicon(ctx.config.lexicon));
  const Lexicon& lexicon = custom ? *custom : default_lexicon();

  ArticleStore store(layout.root);
  if (store.size() == 0) throw ValidationError("no articles in " + layout.articles().string() + "; run ingest first");
  add_article_files(manifest, layout, false);
  progress(ctx, 0, store.size());
  const ExtractResult result = stance::run_extract(store, lexicon);
  check_cancelled(ctx);
  progress(ctx, store.size(), store.size());

  emit(manifest, layout.sentences(), sentences_to_jsonl(result.sentences));
  emit(manifest, layout.hits(), hits_to_jsonl(result.hits));
  manifest.write(layout.extract());

  std::map<std::string, std::size_t> per_group;
  for (const auto& h : result.hits) ++per_group[h.group];
  Summary s;
  s["articles"] = result.articles;
  s["sentences"] = result.sentences.size();
  s["topical"] = result.topical;
  s["hits"] = result.hits.size();
  Summary groups;
  for (auto name : kKeywordGroups) groups[std::string(name)] = per_group[std::string(name)];
  s["sentences_per_group"] = groups;
  return s;
}

Summary run_sample(const CommandContext& ctx, std::size_t n) {
  const auto layout = ctx.layout();
  const auto& c = ctx.config;
  RunManifest manifest = start_manifest(ctx, "sample");
  manifest.param("n", std::to_string(n));
  const auto data = load_extract(layout, manifest);
  const auto groups = groups_by_sentence(data.hits);

  std::vector<SamplingCandidate> candidates;
  std::map<std::string, const ExtractedSentence*> by_id;
  for (const auto& s : data.sentences) {
    auto it = groups.find(s.sentence.id());
    if (it == groups.end()) continue;
    candidates.push_back({it->first, s.publisher, it->second, s.sentence.flagged});
    by_id[it->first] = &s;
  }
  const std::vector<std::string> order(kKeywordGroups.begin(), kKeywordGroups.end());
  const SampleResult sample = sample_for_annotation(candidates, n, c.seed, order);

  emit(manifest, layout.sample(), render([&](std::ostream& out) {
         write_csv_row(out, {"sentence_id", "publisher", "group", "text"});
         for (const auto& cell : sample.cells) {
           for (const auto& id : cell.sentence_ids) {
             write_csv_row(out, {id, cell.publisher, cell.group, by_id.at(id)->sentence.text});
           }
         }
       }));

  Summary s;
  s["sampled"] = sample.sentence_ids.size();
  s["cells"] = Summary::array();
  for (const auto& cell : sample.cells) {
    s["cells"].push_back({{"publisher", cell.publisher}, {"group", cell.group}, {"quota", cell.quota}});
  }
  if (!c.annotation.annotators.empty()) {
    AssignmentPlan plan;
    plan.primary = c.annotation.annotators;
    plan.third = c.annotation.third;
    plan.overlap = c.annotation.overlap;
    plan.mode = c.annotation.split;
    const auto batches = plan_batches(sample.sentence_ids, plan, c.seed);
    emit(manifest, layout.batches(), batches_to_json(batches));
    s["batches"] = batches.size();
  } else {
    s["batches"] = 0;
    s["note"] = "no annotators configured; batches.json not written";
  }
  manifest.write(layout.annotation());
  return s;
}

Summary run_annotate_export(const CommandContext& ctx, const fs::path& out) {
  const auto layout = ctx.layout();
  RunManifest manifest = start_manifest(ctx, "annotate-export");
  AnnotationStore store(layout.annotation_log());
  if (fs::exists(layout.annotation_log())) manifest.input(layout.annotation_log());
  const auto live = store.live();
  emit(manifest, out, render([&](std::ostream& o) { write_annotations_csv(o, live); }));
  manifest.write(out.has_parent_path() ? out.parent_path() : fs::path("."));
  Summary s;
  s["records"] = live.size();
  s["path"] = out.string();
  return s;
}

Summary run_annotate_import(const CommandContext& ctx, const fs::path& in_path) {
  const auto layout = ctx.layout();
  RunManifest manifest = start_manifest(ctx, "annotate-import");
  std::ifstream in(require_file(in_path, "annotation CSV"), std::ios::binary);
  manifest.input(in_path);
  const AnnotationImport imported = read_annotations_csv(in);
  fs::create_directories(layout.annotation());
  AnnotationStore store(layout.annotation_log());
  const std::size_t added = store.import(imported.records);
  manifest.output(layout.annotation_log());
  manifest.write(layout.annotation());
  Summary s;
  s["imported"] = added;
  s["rejected"] = imported.rejects.size();
  s["rejects"] = Summary::array();
  for (const auto& r : imported.rejects) s["rejects"].push_back({{"row", r.row}, {"reason", r.reason}});
  s["live_records"] = store.live().size();
  return s;
}

Summary run_train_nb(const CommandContext& ctx, const std::optional<fs::path>& labeled) {
  const auto layout = ctx.layout();
  RunManifest manifest = start_manifest(ctx, "train-nb");
  manifest.param("alpha", format_double(ctx.config.nb_alpha));
  const auto examples = training_examples(labeled_input(ctx, labeled, manifest));
  const NBModel model = nb_train(examples, ctx.config.nb_alpha);
  emit(manifest, layout.nb_model(), nb_to_json(model));
  manifest.write(layout.models());
  Summary s;
  s["examples"] = examples.size();
  s["vocabulary"] = model.vocabulary.size();
  for (std::size_t c = 0; c < 3; ++c) s["documents"][std::string(label_name(kStanceClasses[c]))] = model.documents[c];
  s["model"] = layout.nb_model().string();
  return s;
}

Summary run_classify(const CommandContext& ctx, const ClassifyOptions& options) {
  check_backend(options.backend);
  const auto layout = ctx.layout();
  const auto& c = ctx.config;
  RunManifest manifest = start_manifest(ctx, "classify");
  manifest.param("backend", options.backend);
  const auto data = load_extract(layout, manifest);
  const auto texts = topical_texts(data);
  const fs::path audit = layout.predictions() / "zeroshot.audit.jsonl";

  std::unique_ptr<Classifier> classifier;
  if (options.backend == "nb") {
    const fs::path model_path = options.model.value_or(layout.nb_model());
    const std::string json = read_file(require_file(model_path, "run train-nb first"));
    manifest.input(model_path);
    classifier = std::make_unique<NaiveBayesClassifier>(nb_from_json(json), "nb-" + sha256_hex(json).substr(0, 12));
  } else {
    if (options.backend == "remote") manifest.param("model", c.remote.model);
    if (options.backend == "zeroshot") manifest.param("model", c.chat.model);
    fs::create_directories(layout.predictions());
    classifier = network_factory(ctx, options.backend, audit)({});
  }

  ClassifyOutcome outcome;
  const std::size_t chunk = chunk_size(c, options.backend);
  progress(ctx, 0, texts.size());
  for (std::size_t start = 0; start < texts.size(); start += chunk) {
    check_cancelled(ctx);
    const std::size_t len = std::min(chunk, texts.size() - start);
    auto part = classifier->classify(std::span<const SentenceText>(texts).subspan(start, len));
    for (auto& p : part.predictions) outcome.predictions.push_back(std::move(p));
    for (auto& f : part.failures) outcome.failures.push_back(std::move(f));
    progress(ctx, start + len, texts.size());
  }

  emit(manifest, layout.predictions_file(options.backend),
       render([&](std::ostream& out) { write_predictions_csv(out, outcome.predictions); }));
  emit(manifest, layout.predictions() / (options.backend + ".failures.csv"), render([&](std::ostream& out) {
         write_csv_row(out, {"sentence_id", "reason", "attempts"});
         for (const auto& f : outcome.failures) write_csv_row(out, {f.sentence_id, f.reason, std::to_string(f.attempts)});
       }));
  if (options.backend == "zeroshot" && fs::exists(audit)) manifest.output(audit);
  manifest.write(layout.predictions(), "classify-" + options.backend);
  if (outcome.predictions.empty() && !outcome.failures.empty()) {
    throw BackendError("no sentence could be classified; first failure: " + outcome.failures.front().reason);
  }

  Summary s;
  s["sentences"] = texts.size();
  s["predictions"] = outcome.predictions.size();
  s["failures"] = outcome.failures.size();
  s["labels"] = label_counts(outcome.predictions);
  s["path"] = layout.predictions_file(options.backend).string();
  return s;
}

Summary run_eval(const CommandContext& ctx, const EvalOptions& options) {
  const auto layout = ctx.layout();
  RunManifest manifest = start_manifest(ctx, "eval");
  const auto labeled = training_examples(labeled_input(ctx, options.labeled, manifest));
  if (labeled.empty()) throw ValidationError("no labeled Against/Neutral/Supportive sentences to evaluate on");
  const fs::path dir = layout.reports();

  if (options.predictions) {
    const auto predictions = load_predictions(*options.predictions, manifest);
    std::map<std::string, const Prediction*> by_id;
    for (const auto& p : predictions) by_id[p.sentence_id] = &p;
    std::vector<StanceLabel> truth, predicted;
    std::vector<Prediction> joined;
    std::size_t missing = 0;
    for (const auto& l : labeled) {
      auto it = by_id.find(l.id);
      if (it == by_id.end()) {
        ++missing;
        continue;
      }
      truth.push_back(l.label);
      predicted.push_back(it->second->label);
      joined.push_back(*it->second);
    }
    if (truth.empty()) throw ValidationError("no labeled sentence has a prediction in " + options.predictions->string());
    const std::string name = options.predictions->stem().string();
    manifest.param("predictions", name);
    const ConfusionMatrix matrix = confusion(truth, predicted);
    EvalReport report = metrics(matrix);
    report.backend = predictions.empty() ? name : predictions.front().backend;
    if (missing) report.warnings.push_back(std::to_string(missing) + " labeled sentences without a prediction");
    const std::vector<EvalReport> reports{report};
    emit(manifest, dir / ("eval-" + name + ".csv"), render([&](std::ostream& o) { write_report_csv(o, reports); }));
    emit(manifest, dir / ("eval-" + name + ".json"), report_to_json(report));
    emit(manifest, dir / ("confusion-" + name + ".csv"),
         render([&](std::ostream& o) { write_confusion_csv(o, matrix); }));
    emit(manifest, dir / ("confusion-" + name + "-pct.csv"),
         render([&](std::ostream& o) { write_confusion_csv(o, matrix, true); }));
    const auto rows = export_misclassified(labeled, joined);
    emit(manifest, dir / ("misclassified-" + name + ".csv"),
         render([&](std::ostream& o) { write_misclassified_csv(o, rows); }));
    manifest.write(dir, "eval-" + name);
    Summary s = metrics_summary(report);
    s["evaluated"] = truth.size();
    s["missing"] = missing;
    return s;
  }

  check_backend(options.backend);
  manifest.param("backend", options.backend);
  manifest.param("k", std::to_string(options.k));
  const double expected = 1.0 / static_cast<double>(options.k);
  if (std::abs(options.eval_fraction - expected) > 1e-9) {
    throw ValidationError("eval fraction " + format_double(options.eval_fraction) + " does not match k=" +
                          std::to_string(options.k) + " (expected " + format_double(expected) + ")");
  }
  ClassifierFactory factory;
  std::size_t concurrency = 1;
  if (options.backend == "nb") {
    factory = nb_factory(ctx.config.nb_alpha);
    concurrency = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, options.k);
  } else {
    fs::create_directories(dir);
    factory = network_factory(ctx, options.backend, dir / "zeroshot.audit.jsonl");
  }
  progress(ctx, 0, options.k);
  const CrossValidation cv = cross_validate(factory, labeled, options.k, ctx.config.seed, options.backend, concurrency);
  progress(ctx, options.k, options.k);
  check_cancelled(ctx);

  const std::string& b = options.backend;
  std::vector<EvalReport> reports = cv.folds;
  reports.push_back(cv.mean);
  reports.push_back(cv.stddev);
  ConfusionMatrix pooled;
  for (const auto& m : cv.matrices) {
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t col = 0; col < 3; ++col) pooled.counts[r][col] += m.counts[r][col];
    }
  }
  emit(manifest, dir / ("eval-" + b + ".csv"), render([&](std::ostream& o) { write_report_csv(o, reports); }));
  Summary doc;
  doc["folds"] = Summary::array();
  for (const auto& f : cv.folds) doc["folds"].push_back(Summary::parse(report_to_json(f)));
  doc["mean"] = Summary::parse(report_to_json(cv.mean));
  doc["std"] = Summary::parse(report_to_json(cv.stddev));
  emit(manifest, dir / ("eval-" + b + ".json"), doc.dump(2) + "\n");
  emit(manifest, dir / ("confusion-" + b + ".csv"), render([&](std::ostream& o) { write_confusion_csv(o, pooled); }));
  emit(manifest, dir / ("confusion-" + b + "-pct.csv"),
       render([&](std::ostream& o) { write_confusion_csv(o, pooled, true); }));
  emit(manifest, dir / ("cv-predictions-" + b + ".csv"),
       render([&](std::ostream& o) { write_predictions_csv(o, cv.predictions); }));
  const auto rows = export_misclassified(labeled, cv.predictions);
  emit(manifest, dir / ("misclassified-" + b + ".csv"),
       render([&](std::ostream& o) { write_misclassified_csv(o, rows); }));
  if (b == "zeroshot" && fs::exists(dir / "zeroshot.audit.jsonl")) manifest.output(dir / "zeroshot.audit.jsonl");
  manifest.write(dir, "eval-" + b);

  Summary s = metrics_summary(cv.mean);
  s["macro_f1_std"] = cv.stddev.macro.f1;
  s["folds"] = cv.folds.size();
  s["records"] = labeled.size();
  return s;
}

Summary run_compare(const CommandContext& ctx, const fs::path& first, const fs::path& second) {
  const auto layout = ctx.layout();
  RunManifest manifest = start_manifest(ctx, "compare");
  const auto a = load_predictions(first, manifest);
  const auto b = load_predictions(second, manifest);
  const Comparison cmp = compare_predictions(a, b);
  const std::string name = "compare-" + first.stem().string() + "-" + second.stem().string();
  emit(manifest, layout.reports() / (name + ".csv"),
       render([&](std::ostream& o) { write_comparison_csv(o, cmp); }));
  manifest.write(layout.reports(), name);
  Summary s;
  s["kappa"] = cmp.kappa;
  s["joined"] = cmp.joined;
  s["only_first"] = cmp.only_first.size();
  s["only_second"] = cmp.only_second.size();
  return s;
}

Summary run_trends(const CommandContext& ctx, const TrendOptions& options) {
  const auto layout = ctx.layout();
  const auto& c = ctx.config;
  RunManifest manifest = start_manifest(ctx, "trends");
  manifest.param("granularity", std::string(granularity_name(options.granularity)));
  if (options.threshold) {
    validate_threshold(*options.threshold);
    manifest.param("threshold", format_double(*options.threshold));
  }
  const auto data = load_extract(layout, manifest);
  const auto predictions = load_predictions(options.predictions.value_or(layout.predictions_file(options.backend)),
                                            manifest);
  const DateWindow window{c.window_start, c.window_end};
  const fs::path dir = layout.trends();
  std::set<std::string> present;
  for (const auto& s : data.sentences) present.insert(s.publisher);
  std::vector<std::string> publishers;
  for (const auto& p : c.publishers) {
    if (present.count(p)) publishers.push_back(p);
  }
  for (const auto& p : present) {
    if (std::find(publishers.begin(), publishers.end(), p) == publishers.end()) publishers.push_back(p);
  }

  auto write_counts = [&](const std::string& file, Granularity g) {
    const auto pts = sentence_counts(data.sentences, data.hits, g, window);
    emit(manifest, dir / file, render([&](std::ostream& o) { write_count_csv(o, pts); }));
  };
  auto stance_for = [&](const std::vector<std::string>& pubs, Granularity g, std::optional<double> tau) {
    std::vector<TrendPoint> all;
    for (const auto& p : pubs) {
      auto pts = stance_shares(predictions, data.sentences, g, p, tau, window);
      all.insert(all.end(), std::make_move_iterator(pts.begin()), std::make_move_iterator(pts.end()));
    }
    return all;
  };
  auto write_points = [&](const std::string& file, const std::vector<TrendPoint>& pts,
                          std::optional<std::size_t> only = std::nullopt) {
    emit(manifest, dir / file, render([&](std::ostream& o) { write_trend_csv(o, pts, only); }));
  };

  write_counts("fig1.csv", Granularity::kMonth);
  const auto mentions = article_mention_share(data.sentences, data.hits, Granularity::kMonth, window);
  emit(manifest, dir / "fig3.csv", render([&](std::ostream& o) { write_mention_csv(o, mentions); }));
  const auto stance = stance_for(publishers, options.granularity, options.threshold);
  write_points("stance.csv", stance);
  const auto groups = group_stance_shares(predictions, data.sentences, data.hits, Granularity::kYear, window);
  write_points("groups.csv", groups);
  check_cancelled(ctx);

  Summary written = Summary::array({"fig1.csv", "fig3.csv", "stance.csv", "groups.csv"});
  Summary skipped = Summary::array();
  if (options.plot_data) {
    write_counts("s4.csv", Granularity::kWeek);
    written.push_back("s4.csv");
    const bool distributions = std::all_of(predictions.begin(), predictions.end(),
                                           [](const Prediction& p) { return p.has_distribution; });
    const double tau = options.threshold.value_or(c.threshold);
    const char* stance_files[2] = {"fig4.csv", "fig5.csv"};
    const char* against_files[2] = {"s6.csv", "s7.csv"};
    const char* group_files[2] = {"s8.csv", "s9.csv"};
    const char* threshold_files[2] = {"s10.csv", "s11.csv"};
    for (std::size_t i = 0; i < 2; ++i) {
      if (i >= publishers.size()) {
        for (const char* f : {stance_files[i], against_files[i], group_files[i], threshold_files[i]}) {
          skipped.push_back({{"file", f}, {"reason", "no publisher #" + std::to_string(i + 1)}});
        }
        continue;
      }
      const std::vector<std::string> one{publishers[i]};
      write_points(stance_files[i], stance_for(one, Granularity::kMonth, std::nullopt));
      std::vector<TrendPoint> mine;
      for (const auto& p : groups) {
        if (p.publisher == publishers[i]) mine.push_back(p);
      }
      write_points(against_files[i], mine, static_cast<std::size_t>(StanceLabel::kAgainst));
      write_points(group_files[i], mine);
      written.push_back(stance_files[i]);
      written.push_back(against_files[i]);
      written.push_back(group_files[i]);
      if (distributions) {
        write_points(threshold_files[i], stance_for(one, Granularity::kMonth, tau));
        written.push_back(threshold_files[i]);
      } else {
        skipped.push_back({{"file", threshold_files[i]}, {"reason", "predictions carry no probabilities"}});
      }
    }
  }
  manifest.write(dir);

  Summary s;
  s["publishers"] = publishers;
  s["predictions"] = predictions.size();
  s["written"] = written;
  s["skipped"] = skipped;
  return s;
}

Summary run_similarity(const CommandContext& ctx, const SimilarityCommandOptions& options) {
  const auto layout = ctx.layout();
  const auto& c = ctx.config;
  RunManifest manifest = start_manifest(ctx, "similarity");
  manifest.param("provider", c.embedding.provider);
  manifest.param("cap", std::to_string(c.sampling_cap));
  const auto data = load_extract(layout, manifest);
  const auto predictions = load_predictions(options.predictions.value_or(layout.predictions_file(options.backend)),
                                            manifest);
  const auto index = index_sentences(data.sentences);
  std::vector<SentenceText> texts;
  for (const auto& p : predictions) {
    auto it = index.find(p.sentence_id);
    if (it == index.end()) throw ValidationError("prediction for unknown sentence " + p.sentence_id);
    texts.push_back({p.sentence_id, it->second->sentence.text});
  }

  auto transport = transport_for(ctx.backends.embedding, c.embedding.base_url, c.embedding.token_env, "embedding");
  HttpEmbeddingProvider provider(c.embedding, transport, ctx.backends.sleep);
  EmbeddingCache cache(layout.embeddings(), c.embedding.provider);
  FetchStats stats;
  const EmbeddingTable table =
      fetch_embeddings(provider, cache, texts, c.embedding.batch_limit, c.embedding.concurrency, &stats);
  check_cancelled(ctx);

  const SimilaritySeries series = similarity_series(table, predictions, data.sentences, {c.sampling_cap, c.seed});
  const fs::path dir = layout.similarity();
  emit(manifest, dir / "similarity.csv", render([&](std::ostream& o) { write_similarity_csv(o, series.points); }));
  emit(manifest, dir / "missing.csv", render([&](std::ostream& o) {
         write_csv_row(o, {"month", "stance", "mode", "publisher"});
         for (const auto& m : series.missing) {
           write_csv_row(o, {m.month, std::string(label_name(m.stance)), std::string(mode_name(m.mode)), m.publisher});
         }
       }));
  manifest.write(dir);

  Summary s;
  s["points"] = series.points.size();
  s["missing"] = series.missing.size();
  s["cache_hits"] = stats.cache_hits;
  s["fetched"] = stats.fetched;
  s["requests"] = stats.requests;
  return s;
}

Summary run_emit_train_config(const CommandContext& ctx, const std::string& model,
                              const std::optional<fs::path>& out) {
  const auto layout = ctx.layout();
  RunManifest manifest = start_manifest(ctx, "emit-train-config");
  manifest.param("model", model);
  const TrainingConfig tc = emit_training_config(model);
  const fs::path path = out.value_or(layout.models() / ("train-config-" + model + ".json"));
  emit(manifest, path, training_config_to_json(tc));
  manifest.write(path.has_parent_path() ? path.parent_path() : fs::path("."), "emit-train-config-" + model);
  Summary s;
  s["path"] = path.string();
  s["config"] = nlohmann::ordered_json::parse(training_config_to_json(tc));
  return s;
}

std::vector<fs::path> lint_data_dir(const DataLayout& layout) {
  auto orphans = orphan_outputs(layout.root, {"jobs", "embeddings"});
  // The annotation log is a store that the service appends to.
  std::erase_if(orphans, [&](const fs::path& p) { return p == layout.annotation_log(); });
  return orphans;
}

}  // namespace stance

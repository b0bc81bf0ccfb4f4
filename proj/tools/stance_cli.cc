#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stance/commands.h"
#include "stance/errors.h"
#include "stance/service.h"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitBackend = 3;
constexpr int kExitInternal = 4;

std::optional<std::filesystem::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"News stance detection and media monitoring pipeline"};
  app.require_subcommand(1);

  std::string config_path, data_dir;
  app.add_option("-c,--config", config_path, "Pipeline config file")->check(CLI::ExistingFile);
  app.add_option("-d,--data-dir", data_dir, "Data directory (overrides the config)");

  std::string input, format, publisher;
  auto* ingest = app.add_subcommand("ingest", "Load articles from a CSV or JSONL file");
  ingest->add_option("input", input, "Input file")->required()->check(CLI::ExistingFile);
  ingest->add_option("-p,--publisher", publisher, "Publisher of rows without one")->required();
  ingest->add_option("-f,--format", format, "csv or jsonl (default: from extension)");

  auto* extract = app.add_subcommand("extract", "Segment articles and tag topical sentences");

  std::size_t sample_n = 0;
  auto* sample = app.add_subcommand("sample", "Draw a balanced annotation sample and plan batches");
  sample->add_option("-n,--size", sample_n, "Sentences to sample")->required()->check(CLI::PositiveNumber);

  std::string export_out = "annotations.csv";
  auto* annotate_export = app.add_subcommand("annotate-export", "Write live annotations as CSV");
  annotate_export->add_option("-o,--out", export_out, "Output CSV");

  std::string import_in;
  auto* annotate_import = app.add_subcommand("annotate-import", "Append annotations from CSV to the log");
  annotate_import->add_option("input", import_in, "Annotation CSV")->required()->check(CLI::ExistingFile);

  std::string labeled;
  auto* train_nb = app.add_subcommand("train-nb", "Train the Naive Bayes model");
  train_nb->add_option("--labeled", labeled, "Labeled CSV (default: resolved annotations)")
      ->check(CLI::ExistingFile);

  stance::ClassifyOptions classify_opts;
  std::string model_path;
  auto* classify = app.add_subcommand("classify", "Predict stance for every topical sentence");
  classify->add_option("-b,--backend", classify_opts.backend, "nb, remote or zeroshot")
      ->check(CLI::IsMember({"nb", "remote", "zeroshot"}));
  classify->add_option("--model", model_path, "NB model file")->check(CLI::ExistingFile);

  stance::EvalOptions eval_opts;
  std::string eval_labeled, eval_predictions;
  auto* eval = app.add_subcommand("eval", "Cross-validate a backend or score a prediction file");
  eval->add_option("-b,--backend", eval_opts.backend, "nb, remote or zeroshot")
      ->check(CLI::IsMember({"nb", "remote", "zeroshot"}));
  eval->add_option("-k,--k", eval_opts.k, "Folds")->check(CLI::Range(2, 100));
  auto* fraction = eval->add_option("--eval-fraction", eval_opts.eval_fraction, "Held-out share per fold (1/k)");
  eval->add_option("--labeled", eval_labeled, "Labeled CSV (default: resolved annotations)")
      ->check(CLI::ExistingFile);
  eval->add_option("--predictions", eval_predictions, "Score this prediction CSV instead")
      ->check(CLI::ExistingFile);

  std::string compare_a, compare_b;
  auto* compare = app.add_subcommand("compare", "Agreement between two prediction files");
  compare->add_option("first", compare_a, "Prediction CSV")->required()->check(CLI::ExistingFile);
  compare->add_option("second", compare_b, "Prediction CSV")->required()->check(CLI::ExistingFile);

  stance::TrendOptions trend_opts;
  std::string trend_predictions, granularity = "month";
  std::optional<double> threshold;
  auto* trends = app.add_subcommand("trends", "Stance and mention series");
  trends->add_option("-b,--backend", trend_opts.backend, "Backend whose predictions to use");
  trends->add_option("--predictions", trend_predictions, "Prediction CSV")->check(CLI::ExistingFile);
  trends->add_option("-g,--granularity", granularity, "week, month or year")
      ->check(CLI::IsMember({"week", "month", "year"}));
  trends->add_option("-t,--threshold", threshold, "Certainty threshold for the stance series");
  trends->add_flag("--plot-data", trend_opts.plot_data, "Also write one file per figure");

  stance::SimilarityCommandOptions sim_opts;
  std::string sim_predictions;
  auto* similarity = app.add_subcommand("similarity", "Monthly embedding similarity series");
  similarity->add_option("-b,--backend", sim_opts.backend, "Backend whose predictions to use");
  similarity->add_option("--predictions", sim_predictions, "Prediction CSV")->check(CLI::ExistingFile);

  std::string train_model = "default", train_out;
  auto* emit = app.add_subcommand("emit-train-config", "Write fine-tuning hyperparameters for an external trainer");
  emit->add_option("-m,--model", train_model, "default or xlm-roberta")
      ->check(CLI::IsMember({"default", "xlm-roberta"}));
  emit->add_option("-o,--out", train_out, "Output JSON");

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string host;
  int port = -1;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port")->check(CLI::Range(0, 65535));

  auto* lint = app.add_subcommand("lint", "List data files no manifest accounts for");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    stance::CommandContext ctx;
    if (!config_path.empty()) ctx.config = stance::load_config(config_path);
    if (!data_dir.empty()) ctx.config.data_dir = data_dir;
    stance::Summary summary;

    if (*ingest) {
      std::optional<stance::IngestFormat> f;
      if (!format.empty()) {
        f = stance::parse_ingest_format(format);
        if (!f) throw stance::ValidationError("format must be csv or jsonl");
      }
      summary = stance::run_ingest_file(ctx, input, f, publisher);
    } else if (*extract) {
      summary = stance::run_extract(ctx);
    } else if (*sample) {
      summary = stance::run_sample(ctx, sample_n);
    } else if (*annotate_export) {
      summary = stance::run_annotate_export(ctx, export_out);
    } else if (*annotate_import) {
      summary = stance::run_annotate_import(ctx, import_in);
    } else if (*train_nb) {
      summary = stance::run_train_nb(ctx, opt_path(labeled));
    } else if (*classify) {
      classify_opts.model = opt_path(model_path);
      summary = stance::run_classify(ctx, classify_opts);
    } else if (*eval) {
      if (fraction->count() == 0) eval_opts.eval_fraction = 1.0 / static_cast<double>(eval_opts.k);
      eval_opts.labeled = opt_path(eval_labeled);
      eval_opts.predictions = opt_path(eval_predictions);
      summary = stance::run_eval(ctx, eval_opts);
    } else if (*compare) {
      summary = stance::run_compare(ctx, compare_a, compare_b);
    } else if (*trends) {
      trend_opts.predictions = opt_path(trend_predictions);
      trend_opts.granularity = *stance::parse_granularity(granularity);
      trend_opts.threshold = threshold;
      summary = stance::run_trends(ctx, trend_opts);
    } else if (*similarity) {
      sim_opts.predictions = opt_path(sim_predictions);
      summary = stance::run_similarity(ctx, sim_opts);
    } else if (*emit) {
      summary = stance::run_emit_train_config(ctx, train_model, opt_path(train_out));
    } else if (*serve) {
      if (!host.empty()) ctx.config.service.host = host;
      if (port >= 0) ctx.config.service.port = port;
      stance::serve(ctx);
      return 0;
    } else if (*lint) {
      const auto orphans = stance::lint_data_dir(ctx.layout());
      for (const auto& p : orphans) std::cout << p.string() << "\n";
      if (!orphans.empty()) {
        std::cerr << orphans.size() << " file(s) without a manifest\n";
        return kExitValidation;
      }
      return 0;
    }
    std::cout << summary.dump(2) << "\n";
    return 0;
  } catch (const stance::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const stance::BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

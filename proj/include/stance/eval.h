#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stance/classifier.h"

namespace stance {

// Rows are true classes, columns predicted, both in Against, Neutral,
// Supportive order.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, 3>, 3> counts{};

  std::size_t total() const;
  std::size_t row_sum(std::size_t r) const;
  std::size_t col_sum(std::size_t c) const;
  // Each row as percentages of its sum in two decimals, apportioned by
  // largest remainder so a nonempty row sums to exactly 100. Empty rows stay
  // zero.
  std::array<std::array<double, 3>, 3> row_percentages() const;
};

// Throws ValidationError on a length mismatch or an Ambiguous label.
ConfusionMatrix confusion(std::span<const StanceLabel> truth, std::span<const StanceLabel> predicted);

struct ClassMetrics {
  double precision = 0, recall = 0, f1 = 0;
  double support = 0;
  // Set when the metric was forced to 0 by a zero denominator.
  bool precision_undefined = false, recall_undefined = false, f1_undefined = false;
};

struct AverageMetrics {
  double precision = 0, recall = 0, f1 = 0;
};

struct EvalReport {
  std::string backend;
  std::optional<int> fold;  // unset for across-fold aggregates
  std::string aggregate = "mean";  // fold label of an aggregate
  std::array<ClassMetrics, 3> per_class;
  AverageMetrics micro, macro, weighted;
  double accuracy = 0;
  double support = 0;
  std::vector<std::string> warnings;
};

// Throws ValidationError for an all-zero matrix.
EvalReport metrics(const ConfusionMatrix& matrix);

struct Fold {
  std::vector<std::size_t> train;  // ascending indices
  std::vector<std::size_t> eval;
};

// Stratified k-fold: each class is shuffled with the seed and dealt round
// robin to folds, continuing the deal across classes. eval_fraction must be
// 1/k. Throws ValidationError for fewer records than folds, a present class
// with fewer than k members, or an Ambiguous label.
std::vector<Fold> kfold_split(std::span<const StanceLabel> labels, std::size_t k, double eval_fraction,
                              std::uint64_t seed);

struct CrossValidation {
  std::vector<EvalReport> folds;
  std::vector<ConfusionMatrix> matrices;
  EvalReport mean;    // arithmetic mean of the fold metrics
  EvalReport stddev;  // population standard deviation of the fold metrics
  std::vector<Prediction> predictions;  // each record predicted once, by the fold holding it out
};

// Errors from the backend are rethrown with the fold number prefixed.
CrossValidation cross_validate(const ClassifierFactory& factory, std::span<const LabeledSentence> records,
                               std::size_t k, std::uint64_t seed, const std::string& backend,
                               std::size_t concurrency = 1);

struct Comparison {
  double kappa = 0;
  std::array<std::array<std::size_t, 3>, 3> table{};  // rows: first set, columns: second
  std::size_t joined = 0;
  std::vector<std::string> only_first;
  std::vector<std::string> only_second;
};

// Joins on sentence id. Throws ValidationError when nothing joins.
Comparison compare_predictions(std::span<const Prediction> first, std::span<const Prediction> second);

struct MisclassifiedRow {
  std::string sentence_id;
  std::string text;
  StanceLabel truth;
  StanceLabel predicted;
  Probs probs;
};

using ClassPair = std::pair<StanceLabel, StanceLabel>;  // (true, predicted)
inline const std::vector<ClassPair> kExtremeConfusions = {{StanceLabel::kAgainst, StanceLabel::kSupportive},
                                                          {StanceLabel::kSupportive, StanceLabel::kAgainst}};

// Rows whose (true, predicted) pair is listed, by predicted-class
// probability descending, then sentence id.
std::vector<MisclassifiedRow> export_misclassified(std::span<const LabeledSentence> truth,
                                                   std::span<const Prediction> predictions,
                                                   std::span<const ClassPair> pairs = kExtremeConfusions);

void write_misclassified_csv(std::ostream& out, std::span<const MisclassifiedRow> rows);
// Columns: backend, fold, class, precision, recall, f1-score, support, flags.
void write_report_csv(std::ostream& out, std::span<const EvalReport> reports);
std::string report_to_json(const EvalReport& report);
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& matrix, bool percentages = false);
void write_comparison_csv(std::ostream& out, const Comparison& comparison);

}  // namespace stance

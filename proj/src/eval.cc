#include "stance/eval.h"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "stance/csv.h"
#include "stance/errors.h"
#include "stance/parallel.h"
#include "stance/rng.h"

namespace stance {

namespace {

std::size_t class_index(StanceLabel l) {
  if (l == StanceLabel::kAmbiguous) throw ValidationError("Ambiguous label in a three-class evaluation");
  return static_cast<std::size_t>(l);
}

double ratio(std::size_t num, std::size_t den, bool& undefined) {
  undefined = den == 0;
  return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& row : counts) {
    for (auto c : row) t += c;
  }
  return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t r) const { return counts[r][0] + counts[r][1] + counts[r][2]; }
std::size_t ConfusionMatrix::col_sum(std::size_t c) const { return counts[0][c] + counts[1][c] + counts[2][c]; }

std::array<std::array<double, 3>, 3> ConfusionMatrix::row_percentages() const {
  std::array<std::array<double, 3>, 3> out{};
  for (std::size_t r = 0; r < 3; ++r) {
    const auto sum = row_sum(r);
    if (sum == 0) continue;
    // Largest remainder in hundredths of a percent, so the row is exactly 100.
    std::array<std::size_t, 3> units{};
    std::array<std::pair<std::size_t, std::size_t>, 3> rem{};  // (remainder, column)
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t scaled = 10000 * counts[r][c];
      units[c] = scaled / sum;
      rem[c] = {scaled % sum, c};
      assigned += units[c];
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    for (std::size_t k = 0; assigned < 10000; ++k, ++assigned) ++units[rem[k].second];
    for (std::size_t c = 0; c < 3; ++c) out[r][c] = static_cast<double>(units[c]) / 100.0;
  }
  return out;
}

ConfusionMatrix confusion(std::span<const StanceLabel> truth, std::span<const StanceLabel> predicted) {
  if (truth.size() != predicted.size()) {
    throw ValidationError("label lists differ in length (" + std::to_string(truth.size()) + " vs " +
                          std::to_string(predicted.size()) + ")");
  }
  ConfusionMatrix m;
  for (std::size_t i = 0; i < truth.size(); ++i) ++m.counts[class_index(truth[i])][class_index(predicted[i])];
  return m;
}

EvalReport metrics(const ConfusionMatrix& m) {
  const std::size_t total = m.total();
  if (total == 0) throw ValidationError("cannot compute metrics of an empty confusion matrix");
  EvalReport r;
  std::size_t trace = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    trace += m.counts[c][c];
    ClassMetrics& cm = r.per_class[c];
    const std::string name(label_name(kStanceClasses[c]));
    cm.support = static_cast<double>(m.row_sum(c));
    cm.precision = ratio(m.counts[c][c], m.col_sum(c), cm.precision_undefined);
    cm.recall = ratio(m.counts[c][c], m.row_sum(c), cm.recall_undefined);
    const double pr = cm.precision + cm.recall;
    cm.f1_undefined = pr == 0;
    cm.f1 = cm.f1_undefined ? 0.0 : 2 * cm.precision * cm.recall / pr;
    if (cm.precision_undefined) r.warnings.push_back(name + " precision undefined (never predicted); set to 0");
    if (cm.recall_undefined) r.warnings.push_back(name + " recall undefined (no true examples); set to 0");
    if (cm.f1_undefined) r.warnings.push_back(name + " f1 undefined; set to 0");
  }
  r.support = static_cast<double>(total);
  bool unused = false;
  r.accuracy = ratio(trace, total, unused);
  // Single-label multiclass: every false positive is some other class's
  // false negative, so micro precision, recall and F1 all equal accuracy.
  r.micro = {r.accuracy, r.accuracy, r.accuracy};
  for (const auto& cm : r.per_class) {
    r.macro.precision += cm.precision / 3;
    r.macro.recall += cm.recall / 3;
    r.macro.f1 += cm.f1 / 3;
    r.weighted.precision += cm.precision * cm.support / r.support;
    r.weighted.recall += cm.recall * cm.support / r.support;
    r.weighted.f1 += cm.f1 * cm.support / r.support;
  }
  return r;
}

std::vector<Fold> kfold_split(std::span<const StanceLabel> labels, std::size_t k, double eval_fraction,
                              std::uint64_t seed) {
  if (k < 2) throw ValidationError("k-fold needs k >= 2");
  if (std::abs(eval_fraction - 1.0 / static_cast<double>(k)) > 1e-9) {
    throw ValidationError("eval fraction " + format_double(eval_fraction) + " does not partition the data into " +
                          std::to_string(k) + " folds (expected 1/k)");
  }
  if (labels.size() < k) {
    throw ValidationError(std::to_string(labels.size()) + " records cannot fill " + std::to_string(k) + " folds");
  }
  std::array<std::vector<std::size_t>, 3> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[class_index(labels[i])].push_back(i);

  std::vector<std::size_t> fold_of(labels.size());
  std::size_t dealt = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    auto& members = by_class[c];
    if (!members.empty() && members.size() < k) {
      throw ValidationError("class " + std::string(label_name(kStanceClasses[c])) + " has " +
                            std::to_string(members.size()) + " records, fewer than " + std::to_string(k) + " folds");
    }
    Rng rng(derive_seed(seed, "kfold/" + std::string(label_name(kStanceClasses[c]))));
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t idx : members) fold_of[idx] = dealt++ % k;
  }
  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) (f == fold_of[i] ? folds[f].eval : folds[f].train).push_back(i);
  }
  return folds;
}

namespace {

template <typename Report, typename F>
void for_each_metric(Report& r, F&& f) {
  for (auto& cm : r.per_class) {
    f(cm.precision);
    f(cm.recall);
    f(cm.f1);
    f(cm.support);
  }
  for (auto* avg : {&r.micro, &r.macro, &r.weighted}) {
    f(avg->precision);
    f(avg->recall);
    f(avg->f1);
  }
  f(r.accuracy);
  f(r.support);
}

}  // namespace

CrossValidation cross_validate(const ClassifierFactory& factory, std::span<const LabeledSentence> records,
                               std::size_t k, std::uint64_t seed, const std::string& backend,
                               std::size_t concurrency) {
  std::vector<StanceLabel> labels;
  for (const auto& r : records) labels.push_back(r.label);
  const auto folds = kfold_split(labels, k, 1.0 / static_cast<double>(k), seed);

  CrossValidation cv;
  cv.folds.resize(k);
  cv.matrices.resize(k);
  std::vector<std::vector<Prediction>> fold_predictions(k);
  parallel_for(k, concurrency, [&](std::size_t f) {
    const std::string where = "fold " + std::to_string(f + 1) + ": ";
    try {
      std::vector<LabeledSentence> train;
      for (auto i : folds[f].train) train.push_back(records[i]);
      std::vector<SentenceText> eval;
      for (auto i : folds[f].eval) eval.push_back({records[i].id, records[i].text});
      auto clf = factory(train);
      auto outcome = clf->classify(eval);
      if (!outcome.failures.empty()) {
        throw BackendError(std::to_string(outcome.failures.size()) + " sentences unclassified, first: " +
                           outcome.failures.front().sentence_id + " (" + outcome.failures.front().reason + ")");
      }
      if (outcome.predictions.size() != eval.size()) throw BackendError("backend returned a wrong number of predictions");
      std::vector<StanceLabel> truth, predicted;
      for (std::size_t j = 0; j < eval.size(); ++j) {
        if (outcome.predictions[j].sentence_id != eval[j].id) throw BackendError("backend reordered predictions");
        truth.push_back(records[folds[f].eval[j]].label);
        predicted.push_back(outcome.predictions[j].label);
      }
      cv.matrices[f] = confusion(truth, predicted);
      cv.folds[f] = metrics(cv.matrices[f]);
      cv.folds[f].fold = static_cast<int>(f + 1);
      cv.folds[f].backend = backend;
      fold_predictions[f] = std::move(outcome.predictions);
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    } catch (const BackendError& e) {
      throw BackendError(where + e.what());
    }
  });

  const double n = static_cast<double>(k);
  cv.mean.backend = cv.stddev.backend = backend;
  cv.stddev.aggregate = "std";
  std::vector<double*> mean_fields, sd_fields;
  for_each_metric(cv.mean, [&](double& x) { mean_fields.push_back(&x); });
  for_each_metric(cv.stddev, [&](double& x) { sd_fields.push_back(&x); });
  for (const auto& fr : cv.folds) {
    std::size_t i = 0;
    for_each_metric(fr, [&](const double& x) { *mean_fields[i++] += x / n; });
  }
  for (const auto& fr : cv.folds) {
    std::size_t i = 0;
    for_each_metric(fr, [&](const double& x) {
      const double d = x - *mean_fields[i];
      *sd_fields[i++] += d * d / n;
    });
    for (std::size_t c = 0; c < 3; ++c) {
      cv.mean.per_class[c].precision_undefined |= fr.per_class[c].precision_undefined;
      cv.mean.per_class[c].recall_undefined |= fr.per_class[c].recall_undefined;
      cv.mean.per_class[c].f1_undefined |= fr.per_class[c].f1_undefined;
    }
    for (const auto& w : fr.warnings) cv.mean.warnings.push_back("fold " + std::to_string(*fr.fold) + ": " + w);
  }
  for (auto* x : sd_fields) *x = std::sqrt(*x);

  std::map<std::string, Prediction> by_id;
  for (auto& fp : fold_predictions) {
    for (auto& p : fp) by_id.emplace(p.sentence_id, std::move(p));
  }
  for (const auto& r : records) {
    if (auto it = by_id.find(r.id); it != by_id.end()) cv.predictions.push_back(it->second);
  }
  return cv;
}

Comparison compare_predictions(std::span<const Prediction> first, std::span<const Prediction> second) {
  std::map<std::string, StanceLabel> a, b;
  for (const auto& p : first) a.emplace(p.sentence_id, p.label);
  for (const auto& p : second) b.emplace(p.sentence_id, p.label);
  Comparison cmp;
  std::vector<StanceLabel> la, lb;
  for (const auto& [id, label] : a) {
    auto it = b.find(id);
    if (it == b.end()) {
      cmp.only_first.push_back(id);
      continue;
    }
    la.push_back(label);
    lb.push_back(it->second);
    ++cmp.table[class_index(label)][class_index(it->second)];
  }
  for (const auto& [id, label] : b) {
    if (!a.count(id)) cmp.only_second.push_back(id);
  }
  if (la.empty()) throw ValidationError("the prediction sets share no sentence ids");
  cmp.joined = la.size();
  cmp.kappa = cohen_kappa(la, lb);
  return cmp;
}

std::vector<MisclassifiedRow> export_misclassified(std::span<const LabeledSentence> truth,
                                                   std::span<const Prediction> predictions,
                                                   std::span<const ClassPair> pairs) {
  std::map<std::string, const LabeledSentence*> by_id;
  for (const auto& t : truth) by_id.emplace(t.id, &t);
  std::vector<MisclassifiedRow> rows;
  for (const auto& p : predictions) {
    auto it = by_id.find(p.sentence_id);
    if (it == by_id.end()) continue;
    const ClassPair pair{it->second->label, p.label};
    if (std::find(pairs.begin(), pairs.end(), pair) == pairs.end()) continue;
    rows.push_back({p.sentence_id, it->second->text, pair.first, pair.second, p.probs});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) {
    const double px = x.probs[static_cast<std::size_t>(x.predicted)];
    const double py = y.probs[static_cast<std::size_t>(y.predicted)];
    if (px != py) return px > py;
    return x.sentence_id < y.sentence_id;
  });
  return rows;
}

void write_misclassified_csv(std::ostream& out, std::span<const MisclassifiedRow> rows) {
  write_csv_row(out, {"sentence_id", "text", "true", "predicted", "p_against", "p_neutral", "p_supportive"});
  for (const auto& r : rows) {
    write_csv_row(out, {r.sentence_id, r.text, std::string(label_name(r.truth)), std::string(label_name(r.predicted)),
                        format_double(r.probs[0]), format_double(r.probs[1]), format_double(r.probs[2])});
  }
}

namespace {

std::string flags_of(const ClassMetrics& cm) {
  std::string f;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!f.empty()) f += ';';
    f += name;
  };
  add(cm.precision_undefined, "precision_zero_division");
  add(cm.recall_undefined, "recall_zero_division");
  add(cm.f1_undefined, "f1_zero_division");
  return f;
}

}  // namespace

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports) {
  write_csv_row(out, {"backend", "fold", "class", "precision", "recall", "f1-score", "support", "flags"});
  for (const auto& r : reports) {
    const std::string fold = r.fold ? std::to_string(*r.fold) : r.aggregate;
    for (std::size_t c = 0; c < 3; ++c) {
      const auto& cm = r.per_class[c];
      write_csv_row(out, {r.backend, fold, std::string(label_name(kStanceClasses[c])), format_fixed(cm.precision, 6),
                          format_fixed(cm.recall, 6), format_fixed(cm.f1, 6), format_double(cm.support), flags_of(cm)});
    }
    const std::pair<const char*, const AverageMetrics*> avgs[] = {
        {"micro avg", &r.micro}, {"macro avg", &r.macro}, {"weighted avg", &r.weighted}};
    for (const auto& [name, avg] : avgs) {
      write_csv_row(out, {r.backend, fold, name, format_fixed(avg->precision, 6), format_fixed(avg->recall, 6),
                          format_fixed(avg->f1, 6), format_double(r.support), ""});
    }
  }
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["backend"] = r.backend;
  j["fold"] = r.fold ? nlohmann::ordered_json(*r.fold) : nlohmann::ordered_json(r.aggregate);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto& cm = r.per_class[c];
    nlohmann::ordered_json row;
    row["precision"] = cm.precision;
    row["recall"] = cm.recall;
    row["f1-score"] = cm.f1;
    row["support"] = cm.support;
    row["flags"] = flags_of(cm);
    j[std::string(label_name(kStanceClasses[c]))] = row;
  }
  const std::pair<const char*, const AverageMetrics*> avgs[] = {
      {"micro avg", &r.micro}, {"macro avg", &r.macro}, {"weighted avg", &r.weighted}};
  for (const auto& [name, avg] : avgs) {
    j[name] = {{"precision", avg->precision}, {"recall", avg->recall}, {"f1-score", avg->f1}, {"support", r.support}};
  }
  j["accuracy"] = r.accuracy;
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& m, bool percentages) {
  write_csv_row(out, {"true\\predicted", "Against", "Neutral", "Supportive"});
  const auto pct = m.row_percentages();
  for (std::size_t r = 0; r < 3; ++r) {
    CsvRow row{std::string(label_name(kStanceClasses[r]))};
    for (std::size_t c = 0; c < 3; ++c) {
      row.push_back(percentages ? format_fixed(pct[r][c], 2) : std::to_string(m.counts[r][c]));
    }
    write_csv_row(out, row);
  }
}

void write_comparison_csv(std::ostream& out, const Comparison& cmp) {
  write_csv_row(out, {"first\\second", "Against", "Neutral", "Supportive"});
  for (std::size_t r = 0; r < 3; ++r) {
    write_csv_row(out, {std::string(label_name(kStanceClasses[r])), std::to_string(cmp.table[r][0]),
                        std::to_string(cmp.table[r][1]), std::to_string(cmp.table[r][2])});
  }
}

}  // namespace stance

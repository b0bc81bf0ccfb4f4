#include "stance/prediction.h"

#include <charconv>
#include <cmath>

#include "stance/csv.h"
#include "stance/errors.h"
#include "stance/text.h"

namespace stance {

double Prediction::max_prob() const { return std::max({probs[0], probs[1], probs[2]}); }

StanceLabel argmax_label(const Probs& probs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return kStanceClasses[best];
}

void validate_probs(const Probs& probs) {
  double sum = 0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0) throw ValidationError("probabilities must be finite and nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("probabilities sum to " + format_double(sum) + ", not 1");
}

Prediction make_prediction(std::string sentence_id, const Probs& probs, std::string backend,
                           std::string model_version) {
  validate_probs(probs);
  Prediction p;
  p.sentence_id = std::move(sentence_id);
  p.probs = probs;
  p.label = argmax_label(probs);
  p.has_distribution = backend_has_distribution(backend);
  p.backend = std::move(backend);
  p.model_version = std::move(model_version);
  return p;
}

Prediction one_hot_prediction(std::string sentence_id, StanceLabel label, std::string backend,
                              std::string model_version) {
  if (label == StanceLabel::kAmbiguous) throw ValidationError("a prediction cannot be Ambiguous");
  Prediction p;
  p.sentence_id = std::move(sentence_id);
  p.probs[static_cast<std::size_t>(label)] = 1.0;
  p.label = label;
  p.backend = std::move(backend);
  p.model_version = std::move(model_version);
  p.has_distribution = false;
  return p;
}

bool backend_has_distribution(std::string_view backend) { return backend != "zeroshot"; }

void write_predictions_csv(std::ostream& out, std::span<const Prediction> predictions) {
  write_csv_row(out, {"sentence_id", "p_against", "p_neutral", "p_supportive", "label", "backend", "model_version"});
  for (const auto& p : predictions) {
    write_csv_row(out, {p.sentence_id, format_double(p.probs[0]), format_double(p.probs[1]),
                        format_double(p.probs[2]), std::string(label_name(p.label)), p.backend, p.model_version});
  }
}

namespace {

double parse_prob(const std::string& text, std::size_t line) {
  const auto t = trim(text);
  double v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    throw ValidationError("predictions line " + std::to_string(line) + ": bad probability '" + text + "'");
  }
  return v;
}

}  // namespace

std::vector<Prediction> read_predictions_csv(std::istream& in) {
  CsvReader reader(in);
  auto header_row = reader.next();
  if (!header_row) return {};
  const CsvHeader header(*header_row);
  for (auto col : {"sentence_id", "p_against", "p_neutral", "p_supportive", "label", "backend", "model_version"}) {
    if (!header.has(col)) throw ValidationError(std::string("predictions CSV lacks column '") + col + "'");
  }
  std::vector<Prediction> out;
  while (auto row = reader.next()) {
    const std::size_t line = reader.line();
    if (row->size() == 1 && trim((*row)[0]).empty()) continue;
    const Probs probs = {parse_prob(header.get(*row, "p_against"), line), parse_prob(header.get(*row, "p_neutral"), line),
                         parse_prob(header.get(*row, "p_supportive"), line)};
    Prediction p;
    try {
      p = make_prediction(header.get(*row, "sentence_id"), probs, header.get(*row, "backend"),
                          header.get(*row, "model_version"));
    } catch (const ValidationError& e) {
      throw ValidationError("predictions line " + std::to_string(line) + ": " + e.what());
    }
    const auto label = parse_label(header.get(*row, "label"));
    if (!label || *label != p.label) {
      throw ValidationError("predictions line " + std::to_string(line) + ": label does not match probabilities");
    }
    if (p.sentence_id.empty()) throw ValidationError("predictions line " + std::to_string(line) + ": missing sentence_id");
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace stance

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stance/prediction.h"

namespace stance {

struct SentenceText {
  std::string id;
  std::string text;
};

struct LabeledSentence {
  std::string id;
  std::string text;
  StanceLabel label = StanceLabel::kNeutral;
};

// A sentence the backend could not classify.
struct PredictionFailure {
  std::string sentence_id;
  std::string reason;
  int attempts = 0;
};

struct ClassifyOutcome {
  std::vector<Prediction> predictions;  // input order, failed sentences omitted
  std::vector<PredictionFailure> failures;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::string backend() const = 0;
  virtual ClassifyOutcome classify(std::span<const SentenceText> sentences) = 0;
};

// Builds a classifier from a training split. Stateless backends ignore it.
using ClassifierFactory = std::function<std::unique_ptr<Classifier>(std::span<const LabeledSentence> train)>;

// Drops Ambiguous records unless asked to keep them.
std::vector<LabeledSentence> training_examples(std::span<const LabeledSentence> records, bool include_ambiguous = false);

}  // namespace stance

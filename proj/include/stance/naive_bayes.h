#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stance/classifier.h"

namespace stance {

// Lowercased runs of letters and digits; tokens shorter than two code points
// are dropped.
std::vector<std::string> nb_tokenize(std::string_view text);

// Multinomial Naive Bayes over unigram term frequencies.
struct NBModel {
  double alpha = 1.0;
  std::map<std::string, std::size_t> vocabulary;     // token -> column
  std::array<std::vector<double>, 3> token_counts;   // per class, per column
  std::array<double, 3> total_tokens{};
  std::array<std::size_t, 3> documents{};
  std::array<double, 3> log_priors{};
};

// Throws ValidationError when a class has no examples, an example is
// Ambiguous, or alpha is not positive.
NBModel nb_train(std::span<const LabeledSentence> examples, double alpha = 1.0);

// Tokens outside the vocabulary are ignored, so a sentence with no known
// tokens gets the class priors.
Prediction nb_predict(const NBModel& model, const std::string& sentence_id, std::string_view text,
                      const std::string& model_version = "nb");

std::string nb_to_json(const NBModel& model);
NBModel nb_from_json(std::string_view text);

class NaiveBayesClassifier : public Classifier {
 public:
  explicit NaiveBayesClassifier(NBModel model, std::string model_version = "nb")
      : model_(std::move(model)), version_(std::move(model_version)) {}
  std::string backend() const override { return "nb"; }
  ClassifyOutcome classify(std::span<const SentenceText> sentences) override;
  const NBModel& model() const { return model_; }

 private:
  NBModel model_;
  std::string version_;
};

ClassifierFactory nb_factory(double alpha = 1.0);

}  // namespace stance

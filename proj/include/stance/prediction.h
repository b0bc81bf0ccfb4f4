#pragma once

#include <array>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "stance/annotation.h"

namespace stance {

// Class order used for every probability triple: Against, Neutral, Supportive.
inline constexpr std::array<StanceLabel, 3> kStanceClasses = {StanceLabel::kAgainst, StanceLabel::kNeutral,
                                                              StanceLabel::kSupportive};
using Probs = std::array<double, 3>;

struct Prediction {
  std::string sentence_id;
  Probs probs{};
  StanceLabel label = StanceLabel::kNeutral;
  std::string backend;
  std::string model_version;
  // False for backends that only return a label (one-hot probs).
  bool has_distribution = true;

  double max_prob() const;
};

// Highest probability; ties go to the earliest class in Against, Neutral,
// Supportive order.
StanceLabel argmax_label(const Probs& probs);

// Throws ValidationError unless probs are finite, nonnegative and sum to
// 1 within 1e-9.
void validate_probs(const Probs& probs);

Prediction make_prediction(std::string sentence_id, const Probs& probs, std::string backend,
                           std::string model_version);
// Label-only prediction: probability 1 on the label, flagged distribution-free.
Prediction one_hot_prediction(std::string sentence_id, StanceLabel label, std::string backend,
                              std::string model_version);

// Backends whose outputs carry no probability distribution.
bool backend_has_distribution(std::string_view backend);

// CSV columns: sentence_id, p_against, p_neutral, p_supportive, label,
// backend, model_version.
void write_predictions_csv(std::ostream& out, std::span<const Prediction> predictions);
// Throws ValidationError on a malformed row, naming its line.
std::vector<Prediction> read_predictions_csv(std::istream& in);

}  // namespace stance

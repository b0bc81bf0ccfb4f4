#include "stance/naive_bayes.h"

#include <cmath>

#include <json.hpp>

#include "stance/errors.h"
#include "stance/text.h"

namespace stance {

std::vector<LabeledSentence> training_examples(std::span<const LabeledSentence> records, bool include_ambiguous) {
  std::vector<LabeledSentence> out;
  for (const auto& r : records) {
    if (include_ambiguous || r.label != StanceLabel::kAmbiguous) out.push_back(r);
  }
  return out;
}

std::vector<std::string> nb_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t cps = 0;
  auto flush = [&] {
    if (cps >= 2) tokens.push_back(current);
    current.clear();
    cps = 0;
  };
  const std::wstring wide = to_wide(text);
  for (wchar_t wc : wide) {
    const auto cp = static_cast<char32_t>(wc);
    if (is_alnum(cp)) {
      append_utf8(current, fold_case(cp));
      ++cps;
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

NBModel nb_train(std::span<const LabeledSentence> examples, double alpha) {
  if (!(alpha > 0) || !std::isfinite(alpha)) throw ValidationError("smoothing alpha must be positive");
  NBModel m;
  m.alpha = alpha;
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(examples.size());
  for (const auto& ex : examples) {
    if (ex.label == StanceLabel::kAmbiguous) throw ValidationError("Ambiguous example " + ex.id + " in training set");
    tokenized.push_back(nb_tokenize(ex.text));
    for (const auto& t : tokenized.back()) m.vocabulary.emplace(t, 0);
  }
  std::size_t col = 0;
  for (auto& [token, index] : m.vocabulary) index = col++;
  for (auto& c : m.token_counts) c.assign(m.vocabulary.size(), 0.0);

  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto c = static_cast<std::size_t>(examples[i].label);
    ++m.documents[c];
    for (const auto& t : tokenized[i]) {
      m.token_counts[c][m.vocabulary.at(t)] += 1;
      m.total_tokens[c] += 1;
    }
  }
  for (std::size_t c = 0; c < 3; ++c) {
    if (m.documents[c] == 0) {
      throw ValidationError("training set has no " + std::string(label_name(kStanceClasses[c])) + " examples");
    }
    m.log_priors[c] = std::log(static_cast<double>(m.documents[c]) / static_cast<double>(examples.size()));
  }
  return m;
}

Prediction nb_predict(const NBModel& model, const std::string& sentence_id, std::string_view text,
                      const std::string& model_version) {
  const double v = static_cast<double>(model.vocabulary.size());
  std::array<double, 3> score = model.log_priors;
  for (const auto& t : nb_tokenize(text)) {
    const auto it = model.vocabulary.find(t);
    if (it == model.vocabulary.end()) continue;
    for (std::size_t c = 0; c < 3; ++c) {
      score[c] += std::log((model.token_counts[c][it->second] + model.alpha) / (model.total_tokens[c] + model.alpha * v));
    }
  }
  const double top = std::max({score[0], score[1], score[2]});
  Probs probs{};
  double sum = 0;
  for (std::size_t c = 0; c < 3; ++c) sum += probs[c] = std::exp(score[c] - top);
  for (auto& p : probs) p /= sum;
  return make_prediction(sentence_id, probs, "nb", model_version);
}

std::string nb_to_json(const NBModel& m) {
  nlohmann::ordered_json j;
  j["alpha"] = m.alpha;
  j["classes"] = {"Against", "Neutral", "Supportive"};
  j["documents"] = m.documents;
  j["log_priors"] = m.log_priors;
  j["total_tokens"] = m.total_tokens;
  nlohmann::ordered_json vocab = nlohmann::ordered_json::array();
  for (const auto& [token, index] : m.vocabulary) {
    vocab.push_back({token, m.token_counts[0][index], m.token_counts[1][index], m.token_counts[2][index]});
  }
  j["vocabulary"] = std::move(vocab);
  return j.dump(1) + "\n";
}

NBModel nb_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    NBModel m;
    m.alpha = j.at("alpha").get<double>();
    m.documents = j.at("documents").get<std::array<std::size_t, 3>>();
    m.log_priors = j.at("log_priors").get<std::array<double, 3>>();
    m.total_tokens = j.at("total_tokens").get<std::array<double, 3>>();
    for (const auto& row : j.at("vocabulary")) {
      const std::size_t index = m.vocabulary.size();
      if (!m.vocabulary.emplace(row.at(0).get<std::string>(), index).second) {
        throw ValidationError("duplicate token in model vocabulary");
      }
      for (std::size_t c = 0; c < 3; ++c) m.token_counts[c].push_back(row.at(c + 1).get<double>());
    }
    if (!(m.alpha > 0)) throw ValidationError("model alpha must be positive");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed NB model: ") + e.what());
  }
}

ClassifyOutcome NaiveBayesClassifier::classify(std::span<const SentenceText> sentences) {
  ClassifyOutcome out;
  out.predictions.reserve(sentences.size());
  for (const auto& s : sentences) out.predictions.push_back(nb_predict(model_, s.id, s.text, version_));
  return out;
}

ClassifierFactory nb_factory(double alpha) {
  return [alpha](std::span<const LabeledSentence> train) -> std::unique_ptr<Classifier> {
    return std::make_unique<NaiveBayesClassifier>(nb_train(train, alpha));
  };
}

}  // namespace stance

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "stance/extract.h"
#include "stance/prediction.h"

namespace stance {

// dot(u, v) / (|u| |v|), clamped to [-1, 1]. Throws ValidationError for a
// dimension mismatch or a zero vector.
double cosine(std::span<const double> u, std::span<const double> v);

using EmbeddingTable = std::map<std::string, std::vector<double>>;

enum class SimilarityMode { kCrossPublisher, kWithinPublisher };
std::string_view mode_name(SimilarityMode mode);

struct SimilarityPoint {
  std::string month;
  StanceLabel stance = StanceLabel::kNeutral;
  SimilarityMode mode = SimilarityMode::kCrossPublisher;
  std::string publisher;  // within: the publisher; cross: "A|B", names sorted
  double mean_cosine = 0;
  std::size_t pair_count = 0;
  bool sampled = false;
};

struct SimilarityOptions {
  std::size_t cap = 500;  // sentences per side before sampling
  std::uint64_t seed = 0;
};

// Mean cosine over every (a, b) pair with a from one publisher and b from
// the other, both of the given stance and month. A side above the cap is
// replaced by a seeded uniform sample of cap sentences; the sample for a
// side depends only on (seed, month, stance, publisher), so the result is
// symmetric in the publishers. nullopt when a side is empty.
std::optional<SimilarityPoint> cross_publisher_similarity(const EmbeddingTable& embeddings,
                                                          std::span<const Prediction> predictions,
                                                          std::span<const ExtractedSentence> sentences,
                                                          const std::string& month, StanceLabel stance,
                                                          const std::string& publisher_a,
                                                          const std::string& publisher_b,
                                                          const SimilarityOptions& options = {});

// Mean over unordered pairs of distinct sentences. nullopt below two
// sentences.
std::optional<SimilarityPoint> within_publisher_similarity(const EmbeddingTable& embeddings,
                                                           std::span<const Prediction> predictions,
                                                           std::span<const ExtractedSentence> sentences,
                                                           const std::string& month, StanceLabel stance,
                                                           const std::string& publisher,
                                                           const SimilarityOptions& options = {});

struct MissingSimilarity {
  std::string month;
  StanceLabel stance;
  SimilarityMode mode;
  std::string publisher;
};

struct SimilaritySeries {
  std::vector<SimilarityPoint> points;
  std::vector<MissingSimilarity> missing;
};

// Every month with predictions, every stance, every publisher pair and every
// publisher.
SimilaritySeries similarity_series(const EmbeddingTable& embeddings, std::span<const Prediction> predictions,
                                   std::span<const ExtractedSentence> sentences, const SimilarityOptions& options = {});

// month, stance, mode, publisher, mean_cosine, pair_count, sampled
void write_similarity_csv(std::ostream& out, std::span<const SimilarityPoint> points);

}  // namespace stance

#include "stance/similarity.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "stance/csv.h"
#include "stance/errors.h"
#include "stance/rng.h"

namespace stance {

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ValidationError("cosine of vectors with dimensions " + std::to_string(u.size()) + " and " +
                          std::to_string(v.size()));
  }
  double dot = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0 || vv == 0) throw ValidationError("cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

std::string_view mode_name(SimilarityMode mode) {
  return mode == SimilarityMode::kCrossPublisher ? "cross_publisher" : "within_publisher";
}

namespace {

struct Side {
  std::vector<const std::vector<double>*> vectors;
  bool sampled = false;
};

Side collect(const EmbeddingTable& embeddings, std::span<const Prediction> predictions,
             const std::map<std::string, const ExtractedSentence*>& index, const std::string& month,
             StanceLabel stance, const std::string& publisher, const SimilarityOptions& options) {
  std::vector<std::string> ids;
  for (const auto& p : predictions) {
    if (p.label != stance) continue;
    auto it = index.find(p.sentence_id);
    if (it == index.end()) throw ValidationError("prediction for unknown sentence " + p.sentence_id);
    if (it->second->publisher != publisher || bucket_key(it->second->date, Granularity::kMonth) != month) continue;
    ids.push_back(p.sentence_id);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  Side side;
  if (options.cap > 0 && ids.size() > options.cap) {
    Rng rng(derive_seed(options.seed, month + "\x1f" + std::string(label_name(stance)) + "\x1f" + publisher));
    std::vector<std::string> kept;
    for (auto i : rng.sample_indices(ids.size(), options.cap)) kept.push_back(ids[i]);
    ids = std::move(kept);
    side.sampled = true;
  }
  for (const auto& id : ids) {
    auto it = embeddings.find(id);
    if (it == embeddings.end()) throw ValidationError("no embedding for sentence " + id);
    side.vectors.push_back(&it->second);
  }
  return side;
}

}  // namespace

std::optional<SimilarityPoint> cross_publisher_similarity(const EmbeddingTable& embeddings,
                                                          std::span<const Prediction> predictions,
                                                          std::span<const ExtractedSentence> sentences,
                                                          const std::string& month, StanceLabel stance,
                                                          const std::string& publisher_a,
                                                          const std::string& publisher_b,
                                                          const SimilarityOptions& options) {
  const auto& [first, second] = std::minmax(publisher_a, publisher_b);
  const auto index = index_sentences(sentences);
  const Side a = collect(embeddings, predictions, index, month, stance, first, options);
  const Side b = collect(embeddings, predictions, index, month, stance, second, options);
  if (a.vectors.empty() || b.vectors.empty()) return std::nullopt;
  double sum = 0;
  for (const auto* u : a.vectors) {
    for (const auto* v : b.vectors) sum += cosine(*u, *v);
  }
  SimilarityPoint p;
  p.month = month;
  p.stance = stance;
  p.mode = SimilarityMode::kCrossPublisher;
  p.publisher = first + "|" + second;
  p.pair_count = a.vectors.size() * b.vectors.size();
  p.mean_cosine = std::clamp(sum / static_cast<double>(p.pair_count), -1.0, 1.0);
  p.sampled = a.sampled || b.sampled;
  return p;
}

std::optional<SimilarityPoint> within_publisher_similarity(const EmbeddingTable& embeddings,
                                                           std::span<const Prediction> predictions,
                                                           std::span<const ExtractedSentence> sentences,
                                                           const std::string& month, StanceLabel stance,
                                                           const std::string& publisher,
                                                           const SimilarityOptions& options) {
  const auto index = index_sentences(sentences);
  const Side s = collect(embeddings, predictions, index, month, stance, publisher, options);
  if (s.vectors.size() < 2) return std::nullopt;
  double sum = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < s.vectors.size(); ++j, ++pairs) sum += cosine(*s.vectors[i], *s.vectors[j]);
  }
  SimilarityPoint p;
  p.month = month;
  p.stance = stance;
  p.mode = SimilarityMode::kWithinPublisher;
  p.publisher = publisher;
  p.pair_count = pairs;
  p.mean_cosine = std::clamp(sum / static_cast<double>(pairs), -1.0, 1.0);
  p.sampled = s.sampled;
  return p;
}

SimilaritySeries similarity_series(const EmbeddingTable& embeddings, std::span<const Prediction> predictions,
                                   std::span<const ExtractedSentence> sentences, const SimilarityOptions& options) {
  const auto index = index_sentences(sentences);
  std::set<std::string> months, publishers;
  for (const auto& s : sentences) publishers.insert(s.publisher);
  for (const auto& p : predictions) {
    auto it = index.find(p.sentence_id);
    if (it == index.end()) throw ValidationError("prediction for unknown sentence " + p.sentence_id);
    months.insert(bucket_key(it->second->date, Granularity::kMonth));
  }
  const std::vector<std::string> pubs(publishers.begin(), publishers.end());
  SimilaritySeries out;
  for (const auto& month : months) {
    for (auto stance : kStanceClasses) {
      for (std::size_t i = 0; i < pubs.size(); ++i) {
        for (std::size_t j = i + 1; j < pubs.size(); ++j) {
          if (auto p = cross_publisher_similarity(embeddings, predictions, sentences, month, stance, pubs[i], pubs[j],
                                                  options)) {
            out.points.push_back(*p);
          } else {
            out.missing.push_back({month, stance, SimilarityMode::kCrossPublisher, pubs[i] + "|" + pubs[j]});
          }
        }
      }
      for (const auto& pub : pubs) {
        if (auto p = within_publisher_similarity(embeddings, predictions, sentences, month, stance, pub, options)) {
          out.points.push_back(*p);
        } else {
          out.missing.push_back({month, stance, SimilarityMode::kWithinPublisher, pub});
        }
      }
    }
  }
  return out;
}

void write_similarity_csv(std::ostream& out, std::span<const SimilarityPoint> points) {
  write_csv_row(out, {"month", "stance", "mode", "publisher", "mean_cosine", "pair_count", "sampled"});
  for (const auto& p : points) {
    write_csv_row(out, {p.month, std::string(label_name(p.stance)), std::string(mode_name(p.mode)), p.publisher,
                        format_fixed(p.mean_cosine, 9), std::to_string(p.pair_count), p.sampled ? "true" : "false"});
  }
}

}  // namespace stance

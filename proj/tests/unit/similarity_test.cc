#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "stance/embedding_cache.h"
#include "stance/errors.h"
#include "stance/extract.h"
#include "stance/rng.h"
#include "stance/similarity.h"
#include "support/testing.h"

using namespace stance;

namespace {

struct World {
  std::vector<ExtractedSentence> sentences;
  std::vector<Prediction> predictions;
  EmbeddingTable embeddings;
};

// `per_side` sentences per publisher in March 2020, all Against, with
// random 8-dimensional embeddings.
World world(std::size_t per_side, std::uint64_t seed) {
  World w;
  Rng rng(seed);
  for (const std::string publisher : {"MainstreamGroup", "RadicalRightPortal"}) {
    for (std::size_t i = 0; i < per_side; ++i) {
      ExtractedSentence s;
      s.sentence.article_id = publisher.substr(0, 1) + std::to_string(i);
      s.sentence.text = "x";
      s.publisher = publisher;
      s.date = *parse_date("2020-03-15");
      std::vector<double> v(8);
      for (auto& x : v) x = static_cast<double>(rng.below(2001)) / 1000.0 - 1.0;
      v[0] += 3;  // never the zero vector
      w.embeddings[s.sentence.id()] = v;
      w.predictions.push_back(one_hot_prediction(s.sentence.id(), StanceLabel::kAgainst, "nb", "v"));
      w.sentences.push_back(std::move(s));
    }
  }
  return w;
}

double brute_cosine(const std::vector<double>& u, const std::vector<double>& v) {
  long double dot = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<long double>(u[i]) * v[i];
    uu += static_cast<long double>(u[i]) * u[i];
    vv += static_cast<long double>(v[i]) * v[i];
  }
  return static_cast<double>(dot / std::sqrt(uu * vv));
}

class CountingProvider : public EmbeddingProvider {
 public:
  std::string id() const override { return "fake"; }
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
    ++calls;
    std::vector<std::vector<double>> out;
    for (const auto& t : texts) out.push_back({static_cast<double>(t.size()), 1.0, bad ? NAN : 0.5});
    return out;
  }
  int calls = 0;
  bool bad = false;
};

}  // namespace

TEST_CASE("cosine on hand vectors") {
  CHECK(cosine(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == doctest::Approx(0.0));
  CHECK(cosine(std::vector<double>{1, 0}, std::vector<double>{-1, 0}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(cosine(std::vector<double>{1, 0}, std::vector<double>{1, 0, 0}), ValidationError);
  CHECK_THROWS_AS(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 0}), ValidationError);
}

TEST_CASE("mean cosine on small toys") {
  World w;
  const std::vector<std::pair<std::string, std::vector<double>>> vecs{
      {"a", {1, 0}}, {"b", {0, 1}}, {"c", {1, 1}}, {"d", {1, -1}}};
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    ExtractedSentence s;
    s.sentence.article_id = vecs[i].first;
    s.publisher = i < 2 ? "P" : "Q";
    s.date = *parse_date("2020-01-01");
    w.embeddings[s.sentence.id()] = vecs[i].second;
    w.predictions.push_back(one_hot_prediction(s.sentence.id(), StanceLabel::kNeutral, "nb", "v"));
    w.sentences.push_back(s);
  }
  // pairs (a,c) (a,d) (b,c) (b,d): 1/√2, 1/√2, 1/√2, -1/√2
  const auto cross =
      cross_publisher_similarity(w.embeddings, w.predictions, w.sentences, "2020-01", StanceLabel::kNeutral, "P", "Q");
  REQUIRE(cross);
  CHECK(cross->pair_count == 4);
  CHECK(cross->mean_cosine == doctest::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(cross->publisher == "P|Q");
  // within P: one pair, orthogonal
  const auto within =
      within_publisher_similarity(w.embeddings, w.predictions, w.sentences, "2020-01", StanceLabel::kNeutral, "P");
  REQUIRE(within);
  CHECK(within->pair_count == 1);
  CHECK(within->mean_cosine == doctest::Approx(0.0));
  CHECK_FALSE(
      cross_publisher_similarity(w.embeddings, w.predictions, w.sentences, "2020-01", StanceLabel::kAgainst, "P", "Q"));
}

TEST_CASE("cross-publisher mean matches brute force") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto w = world(10 * seed, seed);
    double sum = 0;
    std::size_t pairs = 0;
    for (const auto& a : w.sentences) {
      if (a.publisher != "MainstreamGroup") continue;
      for (const auto& b : w.sentences) {
        if (b.publisher != "RadicalRightPortal") continue;
        sum += brute_cosine(w.embeddings.at(a.sentence.id()), w.embeddings.at(b.sentence.id()));
        ++pairs;
      }
    }
    const auto p = cross_publisher_similarity(w.embeddings, w.predictions, w.sentences, "2020-03",
                                              StanceLabel::kAgainst, "MainstreamGroup", "RadicalRightPortal");
    REQUIRE(p);
    CHECK(p->pair_count == pairs);
    CHECK(std::abs(p->mean_cosine - sum / static_cast<double>(pairs)) <= 1e-9);
    CHECK_FALSE(p->sampled);
  }
}

TEST_CASE("similarity is symmetric and scale invariant") {
  auto w = world(30, 9);
  SimilarityOptions capped;
  capped.cap = 12;
  capped.seed = 4;
  const auto ab = cross_publisher_similarity(w.embeddings, w.predictions, w.sentences, "2020-03",
                                             StanceLabel::kAgainst, "MainstreamGroup", "RadicalRightPortal", capped);
  const auto ba = cross_publisher_similarity(w.embeddings, w.predictions, w.sentences, "2020-03",
                                             StanceLabel::kAgainst, "RadicalRightPortal", "MainstreamGroup", capped);
  REQUIRE(ab);
  REQUIRE(ba);
  CHECK(ab->mean_cosine == ba->mean_cosine);
  CHECK(ab->sampled);
  CHECK(ab->pair_count == 144);

  const auto before = cross_publisher_similarity(w.embeddings, w.predictions, w.sentences, "2020-03",
                                                 StanceLabel::kAgainst, "MainstreamGroup", "RadicalRightPortal");
  Rng rng(2);
  for (auto& [id, v] : w.embeddings) {
    const double k = 0.001 + static_cast<double>(rng.below(10000)) / 10.0;
    for (auto& x : v) x *= k;
  }
  const auto after = cross_publisher_similarity(w.embeddings, w.predictions, w.sentences, "2020-03",
                                                StanceLabel::kAgainst, "MainstreamGroup", "RadicalRightPortal");
  CHECK(std::abs(before->mean_cosine - after->mean_cosine) <= 1e-9);
}

TEST_CASE("capped sides draw the same sample for the same seed") {
  const auto w = world(40, 3);
  SimilarityOptions o;
  o.cap = 10;
  o.seed = 8;
  const auto first = within_publisher_similarity(w.embeddings, w.predictions, w.sentences, "2020-03",
                                                 StanceLabel::kAgainst, "MainstreamGroup", o);
  const auto second = within_publisher_similarity(w.embeddings, w.predictions, w.sentences, "2020-03",
                                                  StanceLabel::kAgainst, "MainstreamGroup", o);
  REQUIRE(first);
  CHECK(first->pair_count == 45);
  CHECK(first->mean_cosine == second->mean_cosine);
  o.seed = 9;
  const auto other = within_publisher_similarity(w.embeddings, w.predictions, w.sentences, "2020-03",
                                                 StanceLabel::kAgainst, "MainstreamGroup", o);
  CHECK(other->mean_cosine != first->mean_cosine);
}

TEST_CASE("series covers every month, stance and pairing") {
  const auto w = world(5, 1);
  const auto series = similarity_series(w.embeddings, w.predictions, w.sentences);
  // March 2020 x three stances x (one cross pair + two publishers)
  CHECK(series.points.size() + series.missing.size() == 9);
  CHECK(series.points.size() == 3);
  std::ostringstream csv;
  write_similarity_csv(csv, series.points);
  CHECK(csv.str().rfind("month,stance,mode,publisher,mean_cosine,pair_count,sampled\n", 0) == 0);
}

TEST_CASE("embedding cache persists and discards uncommitted entries") {
  testing::TempDir dir("emb");
  {
    EmbeddingCache cache(dir.path(), "fake");
    const std::vector<std::pair<std::string, std::vector<double>>> entries{{"s1", {1.0, 2.0}}, {"s2", {0.1, 0.3}}};
    cache.put(entries);
    CHECK(cache.size() == 2);
    CHECK(cache.dim() == 2);
    const std::vector<std::pair<std::string, std::vector<double>>> wrong{{"s3", {1.0, 2.0, 3.0}}};
    CHECK_THROWS_AS(cache.put(wrong), BackendError);
  }
  {
    // an interrupted append leaves bytes past the committed count
    std::ofstream(dir / "fake/vectors.bin", std::ios::app | std::ios::binary) << std::string(16, '\x01');
    std::ofstream(dir / "fake/ids.txt", std::ios::app) << "s9\n";
  }
  EmbeddingCache reopened(dir.path(), "fake");
  CHECK(reopened.size() == 2);
  CHECK(reopened.get("s2") == std::vector<double>{0.1, 0.3});
  CHECK_FALSE(reopened.get("s9"));
}

TEST_CASE("fetching serves cached vectors and batches the rest") {
  testing::TempDir dir("fetch");
  EmbeddingCache cache(dir.path(), "fake");
  CountingProvider provider;
  std::vector<SentenceText> texts;
  for (int i = 0; i < 25; ++i) texts.push_back({"s" + std::to_string(i), std::string(static_cast<std::size_t>(i + 1), 'a')});
  FetchStats stats;
  const auto table = fetch_embeddings(provider, cache, texts, 10, 1, &stats);
  CHECK(table.size() == 25);
  CHECK(stats.fetched == 25);
  CHECK(stats.requests == 3);
  CHECK(provider.calls == 3);

  FetchStats again;
  fetch_embeddings(provider, cache, texts, 10, 1, &again);
  CHECK(again.cache_hits == 25);
  CHECK(provider.calls == 3);

  provider.bad = true;
  const std::vector<SentenceText> fresh{{"new", "uus"}};
  CHECK_THROWS_AS(fetch_embeddings(provider, cache, fresh, 10), BackendError);
}

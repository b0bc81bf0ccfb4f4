#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "stance/annotation.h"
#include "stance/errors.h"
#include "stance/rng.h"
#include "support/testing.h"

using namespace stance;

namespace {

std::vector<RawRating> ratings(std::string_view codes) {
  std::vector<RawRating> out;
  for (char c : codes) out.push_back(*parse_raw_rating(std::string(1, c)));
  return out;
}

AnnotationRecord rec(const std::string& sid, const std::string& who, int rating, const std::string& at) {
  return make_record(sid, who, rating ? RawRating::scale(rating) : RawRating::ambiguous(), "v1", at);
}

std::vector<SamplingCandidate> candidates(const std::string& publisher, const std::string& group, int count,
                                          const std::string& prefix) {
  std::vector<SamplingCandidate> out;
  for (int i = 0; i < count; ++i) out.push_back({prefix + std::to_string(i), publisher, {group}, false});
  return out;
}

}  // namespace

TEST_CASE("ratings collapse to four labels") {
  CHECK(collapse_rating(RawRating::scale(1)) == StanceLabel::kAgainst);
  CHECK(collapse_rating(RawRating::scale(2)) == StanceLabel::kAgainst);
  CHECK(collapse_rating(RawRating::scale(3)) == StanceLabel::kNeutral);
  CHECK(collapse_rating(RawRating::scale(4)) == StanceLabel::kSupportive);
  CHECK(collapse_rating(RawRating::scale(5)) == StanceLabel::kSupportive);
  CHECK(collapse_rating(RawRating::ambiguous()) == StanceLabel::kAmbiguous);
  CHECK_THROWS_AS(RawRating::scale(6), ValidationError);
  CHECK_THROWS_AS(RawRating::scale(0), ValidationError);
  CHECK_FALSE(parse_raw_rating("7"));
  CHECK_FALSE(parse_raw_rating("12"));
  CHECK(parse_raw_rating(" na ")->is_ambiguous());
  CHECK(parse_raw_rating("Ambiguous")->is_ambiguous());
  CHECK(parse_label("PRO") == StanceLabel::kSupportive);
  CHECK_FALSE(parse_label("maybe"));
  CHECK(label_name(StanceLabel::kNeutral) == "Neutral");
}

TEST_CASE("kappa on hand-computed examples") {
  const std::vector<std::string> x{"x", "x", "y", "y"}, y{"x", "y", "x", "y"};
  CHECK(cohen_kappa(x, y) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cohen_kappa(x, x) == 1.0);
  const std::vector<std::string> a{"A", "A", "A", "N", "N", "S"}, b{"A", "A", "N", "N", "S", "S"};
  CHECK(cohen_kappa(a, b) == doctest::Approx(0.5).epsilon(1e-12));
  // constant raters agree trivially
  const std::vector<std::string> c{"A", "A", "A"};
  CHECK(cohen_kappa(c, c) == 1.0);
  CHECK_THROWS_AS(cohen_kappa(std::span<const std::string>{}, std::span<const std::string>{}), ValidationError);
  CHECK_THROWS_AS(cohen_kappa(x, std::vector<std::string>{"x"}), ValidationError);
}

TEST_CASE("kappa is symmetric, permutation invariant and bounded") {
  Rng rng(17);
  const std::vector<std::string> cats{"A", "N", "S", "?"};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    std::vector<std::string> a, b;
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back(cats[rng.below(cats.size())]);
      b.push_back(rng.below(3) ? a.back() : cats[rng.below(cats.size())]);
    }
    const double k = cohen_kappa(a, b);
    CHECK(k <= 1.0 + 1e-12);
    CHECK(k >= -1.0 - 1e-12);
    CHECK(cohen_kappa(b, a) == doctest::Approx(k).epsilon(1e-12));
    CHECK(cohen_kappa(a, a) == 1.0);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::string> pa, pb;
    for (auto i : order) {
      pa.push_back(a[i]);
      pb.push_back(b[i]);
    }
    CHECK(cohen_kappa(pa, pb) == doctest::Approx(k).epsilon(1e-12));
  }
}

TEST_CASE("kappa variants merge or drop categories") {
  const auto a = ratings("12345A1A");
  const auto b = ratings("21345314");
  CHECK(parse_kappa_variant("three-merged") == KappaVariant::kThreeMergedNeutral);
  CHECK(kappa_variant_name(KappaVariant::kTwoCategory) == "two");
  CHECK_FALSE(parse_kappa_variant("seven"));

  CHECK(variant_kappa(a, b, KappaVariant::kSixCategory).n == 8);
  CHECK(variant_kappa(a, b, KappaVariant::kFourCategory).n == 8);
  CHECK(variant_kappa(a, b, KappaVariant::kThreeMergedNeutral).n == 8);
  // pairs with an Ambiguous side are dropped
  CHECK(variant_kappa(a, b, KappaVariant::kThreeCategory).n == 6);
  // only Against/Supportive on both sides: (1,2) (2,1) (4,4) (5,5) (1,1)
  const auto two = variant_kappa(a, b, KappaVariant::kTwoCategory);
  CHECK(two.n == 5);
  CHECK(two.kappa == 1.0);

  // collapsing 1 and 2 can only help here
  CHECK(variant_kappa(a, b, KappaVariant::kFourCategory).kappa > variant_kappa(a, b, KappaVariant::kSixCategory).kappa);
  CHECK(variant_kappa(a, a, KappaVariant::kSixCategory).kappa == 1.0);
}

TEST_CASE("sampling fills cells in proportion to prevalence") {
  std::vector<SamplingCandidate> pool;
  for (const auto& p : {std::string("MainstreamGroup"), std::string("RadicalRightPortal")}) {
    for (auto& c : candidates(p, "migration", 30, p + ":m")) pool.push_back(c);
    for (auto& c : candidates(p, "refugees", 10, p + ":r")) pool.push_back(c);
  }
  const std::vector<std::string> order{"migration", "refugees"};
  const auto first = sample_for_annotation(pool, 8, 42, order);
  REQUIRE(first.cells.size() == 4);
  CHECK(first.cells[0].publisher == "MainstreamGroup");
  CHECK(first.cells[0].group == "migration");
  std::vector<std::size_t> sizes;
  for (const auto& c : first.cells) sizes.push_back(c.sentence_ids.size());
  CHECK(sizes == std::vector<std::size_t>{3, 1, 3, 1});
  CHECK(first.sentence_ids.size() == 8);
  CHECK(std::set<std::string>(first.sentence_ids.begin(), first.sentence_ids.end()).size() == 8);

  SUBCASE("same seed, same sample") {
    CHECK(sample_for_annotation(pool, 8, 42, order).sentence_ids == first.sentence_ids);
  }
  SUBCASE("other seeds keep the counts") {
    bool changed = false;
    for (std::uint64_t seed = 1; seed < 20; ++seed) {
      const auto other = sample_for_annotation(pool, 8, seed, order);
      for (std::size_t i = 0; i < 4; ++i) CHECK(other.cells[i].sentence_ids.size() == sizes[i]);
      changed = changed || other.sentence_ids != first.sentence_ids;
    }
    CHECK(changed);
  }
  SUBCASE("flagged sentences are never drawn") {
    for (auto& c : pool) c.flagged = c.sentence_id.back() == '1';
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      for (const auto& id : sample_for_annotation(pool, 8, seed, order).sentence_ids) CHECK(id.back() != '1');
    }
  }
  SUBCASE("a cell without enough sentences is an error") {
    std::vector<SamplingCandidate> thin = candidates("MainstreamGroup", "migration", 30, "m");
    thin.push_back({"r0", "RadicalRightPortal", {"refugees"}, false});
    try {
      sample_for_annotation(thin, 8, 1, order);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("RadicalRightPortal") != std::string::npos);
    }
    CHECK_THROWS_AS(sample_for_annotation(pool, 1000, 1, order), ValidationError);
  }
}

TEST_CASE("apportion uses largest remainders") {
  CHECK(apportion(4, std::vector<double>{3, 1}) == std::vector<std::size_t>{3, 1});
  CHECK(apportion(5, std::vector<double>{1, 1}) == std::vector<std::size_t>{3, 2});
  CHECK(apportion(10, std::vector<double>{1, 1, 1}) == std::vector<std::size_t>{4, 3, 3});
  CHECK(apportion(0, std::vector<double>{1, 2}) == std::vector<std::size_t>{0, 0});
}

TEST_CASE("batches split the sample and share an overlap subset") {
  std::vector<std::string> ids;
  for (int i = 0; i < 40; ++i) ids.push_back("s" + std::to_string(i));
  AssignmentPlan plan{{"ann1", "ann2"}, "ann3", 10, SplitMode::kDisjoint};
  const auto batches = plan_batches(ids, plan, 7);
  REQUIRE(batches.size() == 4);
  CHECK(batches[0].sentence_ids.size() == 20);
  CHECK(batches[1].sentence_ids.size() == 20);
  CHECK(batches[2].overlap);
  CHECK(batches[2].annotators == std::vector<std::string>{"ann1", "ann3"});
  CHECK(batches[2].sentence_ids.size() + batches[3].sentence_ids.size() == 10);
  const std::set<std::string> first(batches[0].sentence_ids.begin(), batches[0].sentence_ids.end());
  for (const auto& id : batches[2].sentence_ids) CHECK(first.count(id));

  CHECK(batches_from_json(batches_to_json(batches)).size() == 4);
  CHECK(batches_from_json(batches_to_json(batches))[3].sentence_ids == batches[3].sentence_ids);
  CHECK(plan_batches(ids, plan, 7)[2].sentence_ids == batches[2].sentence_ids);

  plan.mode = SplitMode::kInterleaved;
  const auto inter = plan_batches(ids, plan, 7);
  CHECK(inter[0].sentence_ids[1] == "s2");

  plan.third = "ann1";
  CHECK_THROWS_AS(plan_batches(ids, plan, 7), ValidationError);
  CHECK_THROWS_AS(batches_from_json("{"), ValidationError);
}

TEST_CASE("label resolution follows precedence") {
  const std::vector<AnnotationRecord> records{
      rec("s1", "ann2", 1, "2020-01-01T00:00:00Z"), rec("s1", "ann1", 4, "2020-01-01T00:00:00Z"),
      rec("s2", "ann1", 1, "2020-01-01T00:00:00Z"), rec("s2", "ann2", 4, "2020-01-01T00:00:00Z"),
      rec("s2", "ann3", 5, "2020-01-01T00:00:00Z"), rec("s3", "ann1", 3, "2020-01-01T00:00:00Z"),
      rec("s3", "ann3", 1, "2020-01-01T00:00:00Z"),
  };
  const std::vector<std::string> order{"ann1", "ann2"};
  const auto first = resolve_labels(records, Precedence::kFirstAnnotator, order);
  CHECK(first.at("s1") == StanceLabel::kSupportive);
  CHECK(first.at("s2") == StanceLabel::kAgainst);
  const auto majority = resolve_labels(records, Precedence::kMajorityWithThird, order, "ann3");
  CHECK(majority.at("s2") == StanceLabel::kSupportive);
  // one vote each: the third annotator breaks the tie
  CHECK(majority.at("s3") == StanceLabel::kAgainst);
  CHECK(majority.at("s1") == StanceLabel::kSupportive);
}

TEST_CASE("annotation CSV round-trips and rejects bad rows") {
  const std::vector<AnnotationRecord> records{rec("s1", "ann1", 2, "2020-02-01T10:00:00Z"),
                                              rec("s2", "ann1", 0, "2020-02-01T10:01:00Z")};
  std::stringstream buf;
  write_annotations_csv(buf, records);
  const auto back = read_annotations_csv(buf);
  CHECK(back.records == records);
  CHECK(back.rejects.empty());

  std::istringstream bad(
      "sentence_id,annotator_id,raw_rating,label,created_at,guideline_version\n"
      "s1,ann1,6,,2020-02-01T10:00:00Z,v1\n"
      "s2,ann1,4,Against,2020-02-01T10:00:00Z,v1\n"
      "s3,ann1,4,Supportive,2020-02-01T10:00:00Z,v1\n"
      "s4,,4,,2020-02-01T10:00:00Z,v1\n");
  const auto result = read_annotations_csv(bad);
  REQUIRE(result.records.size() == 1);
  CHECK(result.records[0].sentence_id == "s3");
  REQUIRE(result.rejects.size() == 3);
  CHECK(result.rejects[0].row == 1);
  CHECK(result.rejects[1].row == 2);
  CHECK(result.rejects[2].reason == "missing annotator_id");
}

TEST_CASE("annotation store is durable and keeps history") {
  testing::TempDir dir("annstore");
  const auto log = dir / "log.jsonl";
  {
    AnnotationStore store(log);
    store.submit(rec("s1", "ann1", 1, "2020-01-01T00:00:00Z"));
    store.submit(rec("s1", "ann1", 5, "2020-01-02T00:00:00Z"));
    store.submit(rec("s2", "ann1", 3, "2020-01-02T00:00:00Z"));
    CHECK(store.live().size() == 2);
    CHECK(store.live_record("s1", "ann1")->label == StanceLabel::kSupportive);
  }
  {
    AnnotationStore reopened(log);
    CHECK(reopened.log_size() == 3);
    CHECK(reopened.history("s1", "ann1").size() == 2);
    CHECK(reopened.live_record("s1", "ann1")->raw == RawRating::scale(5));
    CHECK_FALSE(reopened.live_record("s3", "ann1"));
  }
  SUBCASE("a torn final line is dropped") {
    std::ofstream(log, std::ios::app) << R"({"sentence_id":"s9","annot)";
    AnnotationStore reopened(log);
    CHECK(reopened.log_size() == 3);
    reopened.submit(rec("s9", "ann1", 2, "2020-01-03T00:00:00Z"));
    CHECK(AnnotationStore(log).log_size() == 4);
  }
  SUBCASE("a corrupt middle line is fatal") {
    std::ofstream(log, std::ios::app) << "not json\n" << record_to_json(rec("s9", "ann1", 2, "2020-01-03T00:00:00Z"))
                                      << "\n";
    CHECK_THROWS_AS(AnnotationStore{log}, ValidationError);
  }
  SUBCASE("invalid submissions are refused") {
    AnnotationStore store(log);
    auto r = rec("s1", "ann1", 2, "2020-01-03T00:00:00Z");
    r.label = StanceLabel::kSupportive;
    CHECK_THROWS_AS(store.submit(r), ValidationError);
    CHECK(store.log_size() == 3);
  }
}

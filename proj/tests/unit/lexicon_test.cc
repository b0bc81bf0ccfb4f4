#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "stance/lexicon.h"
#include "stance/rng.h"
#include "stance/text.h"
#include "support/lexicon_goldens.h"

using namespace stance;

namespace {

std::vector<std::string> group_names(const std::vector<GroupHit>& hits) {
  std::vector<std::string> out;
  for (const auto& h : hits) out.push_back(h.group);
  return out;
}

KeywordGroup* find_group(LexiconConfig& config, const std::string& name) {
  for (auto& g : config.groups) {
    if (g.name == name) return &g;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("shipped lexicon defines the eight groups") {
  const auto config = default_lexicon_config();
  REQUIRE(config.groups.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(config.groups[i].name == kKeywordGroups[i]);
  auto copy = config;
  const auto* migration = find_group(copy, "migration");
  REQUIRE(migration);
  CHECK(migration->negative.size() == 14);
  CHECK(std::find(migration->negative.begin(), migration->negative.end(), "migreen") != migration->negative.end());
  CHECK(std::find(migration->negative.begin(), migration->negative.end(), "lind") != migration->negative.end());
  // config text round-trips
  CHECK(format_lexicon_config(parse_lexicon_config(format_lexicon_config(config))) == format_lexicon_config(config));
}

TEST_CASE("compile errors name the group and pattern") {
  auto config = default_lexicon_config();
  SUBCASE("missing group") {
    config.groups.erase(config.groups.begin() + 3);
    try {
      Lexicon::compile(config);
      FAIL("expected LexiconError");
    } catch (const LexiconError& e) {
      CHECK(e.group() == "foreign_students");
      CHECK(e.pattern_index() == -1);
    }
  }
  SUBCASE("malformed pattern") {
    find_group(config, "race")->positive.push_back("([");
    const auto index = static_cast<std::ptrdiff_t>(find_group(config, "race")->positive.size() - 1);
    try {
      Lexicon::compile(config);
      FAIL("expected LexiconError");
    } catch (const LexiconError& e) {
      CHECK(e.group() == "race");
      CHECK(e.pattern_index() == index);
    }
  }
  SUBCASE("unknown or duplicate group") {
    config.groups.push_back(config.groups.front());
    CHECK_THROWS_AS(Lexicon::compile(config), LexiconError);
  }
  SUBCASE("empty positive list") {
    find_group(config, "ethnicity")->positive.clear();
    CHECK_THROWS_AS(Lexicon::compile(config), LexiconError);
  }
}

TEST_CASE("golden sentences match their frozen groups") {
  for (const auto& g : testing::kLexiconGoldens) {
    INFO(g.sentence);
    CHECK(group_names(default_lexicon().match_text(g.sentence)) == g.groups);
  }
}

TEST_CASE("match offsets point at the matched text") {
  const std::string text = "Pagulased ja moslemid saabusid.";
  const auto hits = default_lexicon().match_text(text, "s:0");
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].sentence_id == "s:0");
  CHECK(hits[0].group == "refugees");
  CHECK(text.substr(hits[0].matches[0].start, hits[0].matches[0].end - hits[0].matches[0].start) == "Pagula");
  CHECK(hits[1].group == "ethnicity");
  CHECK(text.substr(hits[1].matches[0].start, hits[1].matches[0].end - hits[1].matches[0].start) == "moslem");
  for (const auto& h : hits) CHECK_FALSE(h.matches.empty());
}

TEST_CASE("case folding does not change results") {
  Rng rng(2024);
  std::vector<std::string> pool;
  for (const auto& g : testing::kLexiconGoldens) pool.push_back(g.sentence);
  for (int i = 0; i < 1000; ++i) {
    const std::string& s = pool[rng.below(pool.size())];
    const std::string mutated = testing::random_case(s, rng);
    const auto expected = group_names(default_lexicon().match_text(fold_utf8(s)));
    CHECK(group_names(default_lexicon().match_text(mutated)) == expected);
  }
}

TEST_CASE("negative patterns veto their group") {
  Rng rng(11);
  const std::vector<std::string> positives{"ränne", "migrant", "immigratsioon", "sisseränne", "rändajad"};
  const std::vector<std::string> negatives{"lind", "Linnu", "kala", "migreen", "loom", "hane"};
  for (int i = 0; i < 300; ++i) {
    std::string s = positives[rng.below(positives.size())] + " ja " + negatives[rng.below(negatives.size())];
    if (rng.below(2)) s = "Täna " + s + " algas.";
    const auto names = group_names(default_lexicon().match_text(s));
    CHECK(std::find(names.begin(), names.end(), "migration") == names.end());
  }
}

TEST_CASE("adding patterns is monotone") {
  const std::vector<std::string> sentences{"Tööline tuli.",   "Lindude ränne algas.", "Migrandid tulid.",
                                           "Pagulased tulid.", "Mets on roheline.",   "Kala ränne jõel."};
  const auto base = default_lexicon_config();
  const Lexicon before = Lexicon::compile(base);

  auto more_positive = base;
  find_group(more_positive, "foreign_workers")->positive.push_back("tööli");
  find_group(more_positive, "migration")->positive.push_back("mets");
  const Lexicon wider = Lexicon::compile(more_positive);

  auto more_negative = base;
  find_group(more_negative, "refugees")->negative.push_back("tulid");
  const Lexicon narrower = Lexicon::compile(more_negative);

  for (const auto& s : sentences) {
    const auto b = group_names(before.match_text(s));
    const auto w = group_names(wider.match_text(s));
    const auto n = group_names(narrower.match_text(s));
    const std::set<std::string> bs(b.begin(), b.end()), ws(w.begin(), w.end()), ns(n.begin(), n.end());
    CHECK(std::includes(ws.begin(), ws.end(), bs.begin(), bs.end()));
    CHECK(std::includes(bs.begin(), bs.end(), ns.begin(), ns.end()));
  }
}

TEST_CASE("filter_corpus keeps topical sentences in order") {
  std::vector<Sentence> sentences;
  for (const char* t : {"Ilm on ilus.", "Pagulased ja moslemid saabusid.", "Kass magab.", "Migrandid tulid."}) {
    Sentence s;
    s.article_id = "a";
    s.index = sentences.size();
    s.text = t;
    sentences.push_back(s);
  }
  FilterStats stats;
  const auto out = filter_corpus(default_lexicon(), sentences, &stats);
  CHECK(stats.seen == 4);
  CHECK(stats.emitted == 2);
  REQUIRE(out.size() == 2);
  CHECK(out[0].sentence.index == 1);
  CHECK(out[0].hits.size() == 2);
  CHECK(out[1].sentence.index == 3);

  CHECK(filter_corpus(default_lexicon(), std::span<const Sentence>{}).empty());
  const std::vector<Sentence> one_non_topical(sentences.begin(), sentences.begin() + 1);
  CHECK(filter_corpus(default_lexicon(), one_non_topical).empty());
}

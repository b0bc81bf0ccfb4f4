#include "stance/extract.h"

#include <json.hpp>

#include "stance/article_store.h"
#include "stance/errors.h"

namespace stance {

using nlohmann::ordered_json;

ExtractResult run_extract(const ArticleStore& store, const Lexicon& lexicon, const Segmenter& segmenter) {
  ExtractResult result;
  for (const auto& article : store.articles()) {
    ++result.articles;
    const Date date = article.date();
    for (auto& s : segmenter.segment(article)) {
      auto hits = lexicon.match(s);
      if (!hits.empty()) ++result.topical;
      for (auto& h : hits) result.hits.push_back(std::move(h));
      result.sentences.push_back(ExtractedSentence{std::move(s), article.publisher, date});
    }
  }
  return result;
}

namespace {

template <typename F>
void for_each_line(std::string_view text, std::string_view what, F&& fn) {
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      fn(ordered_json::parse(line));
    } catch (const ordered_json::exception& e) {
      throw ValidationError(std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

std::string sentences_to_jsonl(std::span<const ExtractedSentence> sentences) {
  std::string out;
  for (const auto& e : sentences) {
    ordered_json j;
    j["id"] = e.sentence.id();
    j["article_id"] = e.sentence.article_id;
    j["index"] = e.sentence.index;
    j["publisher"] = e.publisher;
    j["date"] = e.date.iso();
    j["start"] = e.sentence.span.start;
    j["end"] = e.sentence.span.end;
    j["flagged"] = e.sentence.flagged;
    j["text"] = e.sentence.text;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<ExtractedSentence> sentences_from_jsonl(std::string_view text) {
  std::vector<ExtractedSentence> out;
  for_each_line(text, "sentences", [&](const ordered_json& j) {
    ExtractedSentence e;
    e.sentence.article_id = j.at("article_id").get<std::string>();
    e.sentence.index = j.at("index").get<std::size_t>();
    e.sentence.text = j.at("text").get<std::string>();
    e.sentence.span = Span{j.at("start").get<std::size_t>(), j.at("end").get<std::size_t>()};
    e.sentence.flagged = j.value("flagged", false);
    e.publisher = j.at("publisher").get<std::string>();
    const auto d = parse_date(j.at("date").get<std::string>());
    if (!d) throw ValidationError("sentence " + e.sentence.id() + " has a bad date");
    e.date = *d;
    out.push_back(std::move(e));
  });
  return out;
}

std::string hits_to_jsonl(std::span<const GroupHit> hits) {
  std::string out;
  for (const auto& h : hits) {
    ordered_json j;
    j["sentence_id"] = h.sentence_id;
    j["group"] = h.group;
    ordered_json matches = ordered_json::array();
    for (const auto& m : h.matches) matches.push_back({m.pattern_index, m.start, m.end});
    j["matches"] = std::move(matches);
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<GroupHit> hits_from_jsonl(std::string_view text) {
  std::vector<GroupHit> out;
  for_each_line(text, "hits", [&](const ordered_json& j) {
    GroupHit h;
    h.sentence_id = j.at("sentence_id").get<std::string>();
    h.group = j.at("group").get<std::string>();
    for (const auto& m : j.at("matches")) {
      h.matches.push_back(PatternMatch{m.at(0).get<std::size_t>(), m.at(1).get<std::size_t>(), m.at(2).get<std::size_t>()});
    }
    out.push_back(std::move(h));
  });
  return out;
}

std::map<std::string, const ExtractedSentence*> index_sentences(std::span<const ExtractedSentence> sentences) {
  std::map<std::string, const ExtractedSentence*> out;
  for (const auto& e : sentences) out.emplace(e.sentence.id(), &e);
  return out;
}

std::map<std::string, std::vector<std::string>> groups_by_sentence(std::span<const GroupHit> hits) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& h : hits) out[h.sentence_id].push_back(h.group);
  return out;
}

}  // namespace stance

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stance/corpus.h"
#include "stance/lexicon.h"

namespace stance {

class ArticleStore;

// A segmented sentence with the article metadata trends and sampling need.
struct ExtractedSentence {
  Sentence sentence;
  std::string publisher;
  Date date;
};

struct ExtractResult {
  std::size_t articles = 0;
  std::vector<ExtractedSentence> sentences;  // every sentence, article order
  std::vector<GroupHit> hits;                // topical sentences only
  std::size_t topical = 0;
};

ExtractResult run_extract(const ArticleStore& store, const Lexicon& lexicon, const Segmenter& segmenter = Segmenter());

// One JSON object per line. Writers emit fields in a fixed order.
std::string sentences_to_jsonl(std::span<const ExtractedSentence> sentences);
std::vector<ExtractedSentence> sentences_from_jsonl(std::string_view text);
std::string hits_to_jsonl(std::span<const GroupHit> hits);
std::vector<GroupHit> hits_from_jsonl(std::string_view text);

std::map<std::string, const ExtractedSentence*> index_sentences(std::span<const ExtractedSentence> sentences);
// sentence id -> group names, lexicon order
std::map<std::string, std::vector<std::string>> groups_by_sentence(std::span<const GroupHit> hits);

}  // namespace stance

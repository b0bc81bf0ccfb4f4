#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stance/corpus.h"
#include "stance/errors.h"

namespace stance {

// The eight keyword groups every lexicon must define.
inline constexpr std::array<std::string_view, 8> kKeywordGroups = {
    "migration",   "refugees", "foreign_workers", "foreign_students", "noncitizens", "radright_liberal_opposition",
    "race",        "ethnicity"};

struct KeywordGroup {
  std::string name;
  std::vector<std::string> positive;  // alternation fragments
  std::vector<std::string> negative;  // vetoes the group when any matches
};

struct LexiconConfig {
  std::vector<KeywordGroup> groups;
};

// Sections "[group:<name>]" followed by "positive=<pattern>" and
// "negative=<pattern>" lines, one pattern per line. Blank lines and lines
// starting with '#' are ignored. Pattern text after '=' is taken verbatim.
LexiconConfig parse_lexicon_config(std::string_view text);
std::string format_lexicon_config(const LexiconConfig& config);
LexiconConfig default_lexicon_config();

// Raised for a missing or unknown group or a pattern that fails to compile.
class LexiconError : public ValidationError {
 public:
  LexiconError(std::string group, std::ptrdiff_t pattern_index, const std::string& message);
  const std::string& group() const { return group_; }
  // -1 when the problem is not tied to one pattern.
  std::ptrdiff_t pattern_index() const { return pattern_index_; }

 private:
  std::string group_;
  std::ptrdiff_t pattern_index_;
};

// Byte offsets into the sentence text.
struct PatternMatch {
  std::size_t pattern_index = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const PatternMatch&, const PatternMatch&) = default;
};

struct GroupHit {
  std::string sentence_id;
  std::string group;
  std::vector<PatternMatch> matches;  // positive pattern occurrences
  friend bool operator==(const GroupHit&, const GroupHit&) = default;
};

// Compiled, immutable lexicon. Safe to share across threads.
class Lexicon {
 public:
  // Throws LexiconError naming the group (and pattern index) at fault.
  static Lexicon compile(const LexiconConfig& config);

  Lexicon(Lexicon&&) noexcept;
  Lexicon& operator=(Lexicon&&) noexcept;
  ~Lexicon();

  // Groups hit by the text, in lexicon order. A group hits when at least one
  // positive pattern matches and none of its negative patterns does.
  std::vector<GroupHit> match_text(std::string_view text, const std::string& sentence_id = {}) const;
  std::vector<GroupHit> match(const Sentence& sentence) const { return match_text(sentence.text, sentence.id()); }

  const LexiconConfig& config() const;

 private:
  struct Impl;
  explicit Lexicon(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

Lexicon compile_lexicon(const LexiconConfig& config);
Lexicon load_lexicon(const std::filesystem::path& path);
const Lexicon& default_lexicon();

struct TopicalSentence {
  Sentence sentence;
  std::vector<GroupHit> hits;
};

struct FilterStats {
  std::size_t seen = 0;
  std::size_t emitted = 0;
};

// Streams the sentences with at least one hit to `sink`, in input order.
FilterStats filter_corpus(const Lexicon& lexicon, std::span<const Sentence> sentences,
                          const std::function<void(TopicalSentence&&)>& sink);
std::vector<TopicalSentence> filter_corpus(const Lexicon& lexicon, std::span<const Sentence> sentences,
                                           FilterStats* stats = nullptr);

}  // namespace stance

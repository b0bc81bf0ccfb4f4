#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stance/dates.h"

namespace stance {

class ArticleStore;

struct Article {
  std::string id;
  std::string publisher;
  std::string periodical;    // optional sub-outlet, may be empty
  std::string published_at;  // verbatim ISO-8601 text
  std::string title;
  std::string body;          // cleaned plain text
  std::string language;      // optional, may be empty

  // Calendar date of published_at. Throws ValidationError if unparseable.
  Date date() const;
};

// Half-open byte offsets into the article body.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

struct Sentence {
  std::string article_id;
  std::size_t index = 0;
  std::string text;
  Span span;
  // Very long or list-like; kept but excluded from annotation sampling.
  bool flagged = false;

  // "<article_id>:<index>"
  std::string id() const;
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

// Strips control characters, script/style blocks, comments and markup tags,
// then collapses whitespace runs to single spaces and trims. Idempotent.
std::string clean_text(std::string_view raw);

struct SegmenterOptions {
  // Lowercase tokens ending in '.' that never close a sentence.
  std::vector<std::string> abbreviations{"hr.", "pr.", "nt.", "jne.", "e."};
  std::size_t long_sentence_chars = 600;
  std::size_t list_semicolons = 10;
};

// Rule-based splitter: a sentence ends after a run of . ! ? or … (plus any
// closing quotes or brackets) when whitespace follows and the next
// non-space character is uppercase, a digit or an opening quote. A single
// period ending a listed abbreviation does not end a sentence.
class Segmenter {
 public:
  Segmenter() : Segmenter(SegmenterOptions{}) {}
  explicit Segmenter(SegmenterOptions options);

  std::vector<Sentence> segment(const Article& article) const;
  bool is_flagged(std::string_view sentence) const;

 private:
  SegmenterOptions options_;
};

std::vector<Sentence> segment_sentences(const Article& article);

enum class IngestFormat { kCsv, kJsonl };
std::optional<IngestFormat> parse_ingest_format(std::string_view s);

struct IngestOptions {
  // Publishers accepted by this corpus.
  std::vector<std::string> publishers{"MainstreamGroup", "RadicalRightPortal"};
  // Rows whose optional language field is set to anything else are rejected.
  std::vector<std::string> languages{"et"};
  std::optional<Date> window_start;
  std::optional<Date> window_end;
};

struct RowReject {
  std::size_t row = 0;  // 1-based data row
  std::string id;
  std::string reason;
};

struct IngestReport {
  std::size_t accepted = 0;
  std::vector<RowReject> rejects;
};

// Reads articles from `source` and inserts the valid ones into `store`.
// `publisher` applies to rows without a publisher field; a row naming a
// different publisher is rejected. Per-row problems are reported, not
// thrown. Throws ValidationError when the stream is not UTF-8 or lacks the
// required columns.
IngestReport ingest_articles(std::istream& source, IngestFormat format, const std::string& publisher,
                             ArticleStore& store, const IngestOptions& options = {});

}  // namespace stance

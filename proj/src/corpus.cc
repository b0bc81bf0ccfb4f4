#include "stance/corpus.h"

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "stance/article_store.h"
#include "stance/csv.h"
#include "stance/errors.h"
#include "stance/text.h"

namespace stance {

namespace {

using json = nlohmann::json;

bool is_control(char32_t cp) { return (cp < 0x20 && cp != '\t' && cp != '\n' && cp != '\r') || (cp >= 0x7F && cp <= 0x9F); }

bool is_ascii_alpha(char32_t cp) { return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z'); }

bool starts_with_ci(const std::u32string& s, std::size_t pos, std::u32string_view word) {
  if (pos + word.size() > s.size()) return false;
  for (std::size_t k = 0; k < word.size(); ++k) {
    if (fold_case(s[pos + k]) != word[k]) return false;
  }
  return true;
}

// Replaces <tag ...>content</tag> blocks for non-text elements with a space.
std::u32string drop_blocks(const std::u32string& s, std::u32string_view tag) {
  std::u32string open = U"<";
  open += tag;
  std::u32string close = U"</";
  close += tag;
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '<' && starts_with_ci(s, i, open)) {
      const std::size_t after = i + open.size();
      if (after < s.size() && (s[after] == '>' || is_space(s[after]) || s[after] == '/')) {
        std::size_t j = after;
        while (j < s.size() && !starts_with_ci(s, j, close)) ++j;
        if (j < s.size()) {
          const auto gt = s.find('>', j);
          i = gt == std::u32string::npos ? s.size() : gt + 1;
          out.push_back(' ');
          continue;
        }
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

std::u32string drop_comments(const std::u32string& s) {
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s.compare(i, 4, U"<!--") == 0) {
      const auto end = s.find(U"-->", i + 4);
      if (end != std::u32string::npos) {
        out.push_back(' ');
        i = end + 3;
        continue;
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

// A tag is '<' immediately followed by a letter, '/', '!' or '?', running to
// the next '>' without another '<'.
std::u32string drop_tags(const std::u32string& s) {
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '<' && i + 1 < s.size() &&
        (is_ascii_alpha(s[i + 1]) || s[i + 1] == '/' || s[i + 1] == '!' || s[i + 1] == '?')) {
      std::size_t j = i + 1;
      while (j < s.size() && s[j] != '>' && s[j] != '<') ++j;
      if (j < s.size() && s[j] == '>') {
        out.push_back(' ');
        i = j + 1;
        continue;
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

std::u32string collapse_whitespace(const std::u32string& s) {
  std::u32string out;
  bool pending_space = false;
  for (char32_t cp : s) {
    if (is_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(cp);
  }
  return out;
}

std::u32string lenient_decode(std::string_view raw) {
  std::u32string cps;
  cps.reserve(raw.size());
  const std::wstring wide = to_wide(raw);
  for (wchar_t w : wide) cps.push_back(static_cast<char32_t>(w));
  return cps;
}

std::u32string clean_pass(const std::u32string& in) {
  std::u32string s;
  s.reserve(in.size());
  for (char32_t cp : in) {
    if (cp == '\t' || cp == '\n' || cp == '\r') {
      s.push_back(' ');
    } else if (!is_control(cp)) {
      s.push_back(cp);
    }
  }
  s = drop_blocks(s, U"script");
  s = drop_blocks(s, U"style");
  s = drop_comments(s);
  s = drop_tags(s);
  return collapse_whitespace(s);
}

bool is_terminator(char32_t cp) { return cp == '.' || cp == '!' || cp == '?' || cp == 0x2026; }

bool is_closer(char32_t cp) {
  switch (cp) {
    case '"': case '\'': case ')': case ']': case 0x201D: case 0x2019: case 0xBB:
      return true;
    default:
      return false;
  }
}

bool is_opener(char32_t cp) {
  switch (cp) {
    case '"': case '\'': case '(': case '[': case 0x201E: case 0x201C: case 0x2018: case 0xAB:
    case 0x2013: case 0x2014: case '-':
      return true;
    default:
      return false;
  }
}

bool is_digit(char32_t cp) { return cp >= '0' && cp <= '9'; }

std::string required(const json& row, const char* key) {
  auto it = row.find(key);
  if (it == row.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  return it->dump();
}

}  // namespace

Date Article::date() const {
  auto d = parse_date(published_at);
  if (!d) throw ValidationError("article " + id + " has unparseable date '" + published_at + "'");
  return *d;
}

std::string Sentence::id() const { return article_id + ":" + std::to_string(index); }

std::string clean_text(std::string_view raw) {
  std::u32string cur = lenient_decode(raw);
  // Each pass is length non-increasing; iterate to a fixed point so that
  // cleaning is idempotent even when removals expose new markup.
  for (int guard = 0; guard < 64; ++guard) {
    std::u32string next = clean_pass(cur);
    if (next == cur) break;
    cur = std::move(next);
  }
  return encode_utf8(cur);
}

Segmenter::Segmenter(SegmenterOptions options) : options_(std::move(options)) {
  for (auto& a : options_.abbreviations) a = fold_utf8(a);
}

bool Segmenter::is_flagged(std::string_view sentence) const {
  std::size_t chars = 0;
  for (std::size_t i = 0; i < sentence.size(); i += utf8_sequence_length(static_cast<unsigned char>(sentence[i]))) ++chars;
  const auto semicolons = static_cast<std::size_t>(std::count(sentence.begin(), sentence.end(), ';'));
  return chars > options_.long_sentence_chars || semicolons >= options_.list_semicolons;
}

std::vector<Sentence> Segmenter::segment(const Article& article) const {
  const std::string& body = article.body;
  std::vector<std::size_t> off;
  const std::wstring w = to_wide(body, &off);
  const std::size_t n = w.size();
  auto cp = [&](std::size_t i) { return static_cast<char32_t>(w[i]); };

  std::vector<Sentence> out;
  auto emit = [&](std::size_t from, std::size_t to) {
    while (from < to && is_space(cp(from))) ++from;
    while (to > from && is_space(cp(to - 1))) --to;
    if (from >= to) return;
    Sentence s;
    s.article_id = article.id;
    s.index = out.size();
    s.span = Span{off[from], off[to]};
    s.text = body.substr(s.span.start, s.span.end - s.span.start);
    s.flagged = is_flagged(s.text);
    out.push_back(std::move(s));
  };

  auto is_abbreviation = [&](std::size_t period) {
    std::size_t b = period;
    while (b > 0 && !is_space(cp(b - 1))) --b;
    while (b < period && is_opener(cp(b))) ++b;
    std::string word;
    for (std::size_t k = b; k <= period; ++k) append_utf8(word, fold_case(cp(k)));
    return std::find(options_.abbreviations.begin(), options_.abbreviations.end(), word) !=
           options_.abbreviations.end();
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_terminator(cp(i))) continue;
    std::size_t j = i;
    while (j + 1 < n && is_terminator(cp(j + 1))) ++j;
    std::size_t k = j;
    while (k + 1 < n && is_closer(cp(k + 1))) ++k;
    if (k + 1 >= n) break;
    if (!is_space(cp(k + 1))) {
      i = k;
      continue;
    }
    std::size_t m = k + 1;
    while (m < n && is_space(cp(m))) ++m;
    if (m >= n) break;
    const char32_t next = cp(m);
    const bool starts_sentence = is_upper(next) || is_digit(next) || is_opener(next);
    const bool abbreviation = i == j && cp(i) == '.' && is_abbreviation(i);
    if (!starts_sentence || abbreviation) {
      i = k;
      continue;
    }
    emit(start, k + 1);
    start = m;
    i = m - 1;
  }
  emit(start, n);
  return out;
}

std::vector<Sentence> segment_sentences(const Article& article) {
  static const Segmenter segmenter;
  return segmenter.segment(article);
}

std::optional<IngestFormat> parse_ingest_format(std::string_view s) {
  if (s == "csv") return IngestFormat::kCsv;
  if (s == "jsonl") return IngestFormat::kJsonl;
  return std::nullopt;
}

IngestReport ingest_articles(std::istream& source, IngestFormat format, const std::string& publisher,
                             ArticleStore& store, const IngestOptions& options) {
  std::ostringstream buf;
  buf << source.rdbuf();
  const std::string data = buf.str();
  if (!is_valid_utf8(data)) throw ValidationError("input stream is not valid UTF-8");

  if (std::find(options.publishers.begin(), options.publishers.end(), publisher) == options.publishers.end()) {
    throw ValidationError("unknown publisher '" + publisher + "'");
  }

  struct RawRow {
    std::size_t row;
    std::string id, date, publisher, periodical, title, body, language;
    std::string parse_error;
  };
  std::vector<RawRow> rows;

  std::istringstream in(data);
  if (format == IngestFormat::kCsv) {
    CsvReader reader(in);
    auto header_row = reader.next();
    if (!header_row) return {};
    CsvHeader header(*header_row);
    for (const char* col : {"id", "date", "title", "body"}) {
      if (!header.has(col)) throw ValidationError(std::string("CSV header lacks required column '") + col + "'");
    }
    std::size_t n = 0;
    while (auto row = reader.next()) {
      if (row->size() == 1 && row->front().empty()) continue;
      ++n;
      rows.push_back(RawRow{n, header.get(*row, "id"), header.get(*row, "date"), header.get(*row, "publisher"),
                            header.get(*row, "periodical"), header.get(*row, "title"), header.get(*row, "body"),
                            header.get(*row, "language"), {}});
    }
  } else {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      ++n;
      RawRow r{n, {}, {}, {}, {}, {}, {}, {}, {}};
      try {
        const json j = json::parse(line);
        if (!j.is_object()) throw std::runtime_error("not an object");
        r.id = required(j, "id");
        r.date = required(j, "date");
        r.publisher = required(j, "publisher");
        r.periodical = required(j, "periodical");
        r.title = required(j, "title");
        r.body = required(j, "body");
        r.language = required(j, "language");
        if (!j.contains("id") || !j.contains("date") || !j.contains("title") || !j.contains("body")) {
          r.parse_error = "missing field";
        }
      } catch (const std::exception&) {
        r.parse_error = "malformed JSON";
      }
      rows.push_back(std::move(r));
    }
  }

  IngestReport report;
  for (auto& r : rows) {
    auto reject = [&](std::string reason) { report.rejects.push_back(RowReject{r.row, r.id, std::move(reason)}); };
    if (!r.parse_error.empty()) {
      reject(r.parse_error);
      continue;
    }
    std::string id(trim(r.id));
    if (id.empty()) {
      reject("missing id");
      continue;
    }
    if (!r.publisher.empty() && r.publisher != publisher) {
      reject("publisher mismatch");
      continue;
    }
    if (!r.language.empty() &&
        std::find(options.languages.begin(), options.languages.end(), r.language) == options.languages.end()) {
      reject("language");
      continue;
    }
    const auto date = parse_date(trim(r.date));
    if (!date) {
      reject("bad date");
      continue;
    }
    if ((options.window_start && *date < *options.window_start) ||
        (options.window_end && *options.window_end < *date)) {
      reject("outside corpus window");
      continue;
    }
    Article a;
    a.id = id;
    a.publisher = publisher;
    a.periodical = r.periodical;
    a.published_at = std::string(trim(r.date));
    a.title = clean_text(r.title);
    a.body = clean_text(r.body);
    a.language = r.language;
    if (a.body.empty()) {
      reject("empty body");
      continue;
    }
    if (!store.insert(std::move(a))) {
      reject("duplicate id");
      continue;
    }
    ++report.accepted;
  }
  return report;
}

}  // namespace stance

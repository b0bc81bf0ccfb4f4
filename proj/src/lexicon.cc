#include "stance/lexicon.h"

#include <algorithm>
#include <locale>
#include <regex>
#include <set>

#include "stance/embedded_data.h"
#include "stance/fsutil.h"
#include "stance/text.h"

namespace stance {

namespace {

// \w and \W follow the locale's character classes; a UTF-8 locale makes
// Estonian letters word characters.
const std::locale& regex_locale() {
  static const std::locale loc = [] {
    for (const char* name : {"C.UTF-8", "C.utf8", "en_US.UTF-8"}) {
      try {
        return std::locale(name);
      } catch (const std::runtime_error&) {
      }
    }
    return std::locale::classic();
  }();
  return loc;
}

// Lowercases a pattern without touching the character after a backslash, so
// escapes like \W keep their meaning.
std::string fold_pattern(std::string_view pattern) {
  std::string out;
  const std::wstring w = to_wide(pattern);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto cp = static_cast<char32_t>(w[i]);
    if (cp == '\\' && i + 1 < w.size()) {
      append_utf8(out, cp);
      append_utf8(out, static_cast<char32_t>(w[++i]));
      continue;
    }
    append_utf8(out, fold_case(cp));
  }
  return out;
}

std::wregex compile_pattern(const std::string& group, std::size_t index, const std::string& pattern) {
  if (pattern.empty()) throw LexiconError(group, static_cast<std::ptrdiff_t>(index), "empty pattern");
  if (!is_valid_utf8(pattern)) throw LexiconError(group, static_cast<std::ptrdiff_t>(index), "pattern is not UTF-8");
  std::wregex re;
  re.imbue(regex_locale());
  try {
    re.assign(to_wide(fold_pattern(pattern)), std::regex::ECMAScript | std::regex::optimize);
  } catch (const std::regex_error& e) {
    throw LexiconError(group, static_cast<std::ptrdiff_t>(index), "pattern '" + pattern + "' does not compile: " + e.what());
  }
  return re;
}

}  // namespace

LexiconError::LexiconError(std::string group, std::ptrdiff_t pattern_index, const std::string& message)
    : ValidationError("lexicon group '" + group + "'" +
                      (pattern_index >= 0 ? " pattern " + std::to_string(pattern_index) : std::string()) + ": " +
                      message),
      group_(std::move(group)),
      pattern_index_(pattern_index) {}

LexiconConfig parse_lexicon_config(std::string_view text) {
  LexiconConfig config;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') {
      if (nl == text.size()) break;
      continue;
    }
    if (t.front() == '[') {
      constexpr std::string_view prefix = "[group:";
      if (t.substr(0, prefix.size()) != prefix || t.back() != ']') {
        throw ValidationError("lexicon line " + std::to_string(line_no) + ": malformed section header");
      }
      config.groups.push_back(KeywordGroup{std::string(t.substr(prefix.size(), t.size() - prefix.size() - 1)), {}, {}});
    } else {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ValidationError("lexicon line " + std::to_string(line_no) + ": expected key=pattern");
      }
      const std::string_view key = trim(line.substr(0, eq));
      const std::string value(line.substr(eq + 1));
      if (config.groups.empty()) {
        throw ValidationError("lexicon line " + std::to_string(line_no) + ": pattern outside a [group:...] section");
      }
      if (key == "positive") {
        config.groups.back().positive.push_back(value);
      } else if (key == "negative") {
        config.groups.back().negative.push_back(value);
      } else {
        throw ValidationError("lexicon line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
      }
    }
    if (nl == text.size()) break;
  }
  return config;
}

std::string format_lexicon_config(const LexiconConfig& config) {
  std::string out;
  for (const auto& g : config.groups) {
    if (!out.empty()) out += '\n';
    out += "[group:" + g.name + "]\n";
    for (const auto& p : g.positive) out += "positive=" + p + "\n";
    for (const auto& p : g.negative) out += "negative=" + p + "\n";
  }
  return out;
}

LexiconConfig default_lexicon_config() { return parse_lexicon_config(embedded::kDefaultLexicon); }

struct Lexicon::Impl {
  struct CompiledGroup {
    std::vector<std::wregex> positive;
    std::vector<std::wregex> negative;
  };
  LexiconConfig config;
  std::vector<CompiledGroup> groups;
};

Lexicon::Lexicon(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Lexicon::Lexicon(Lexicon&&) noexcept = default;
Lexicon& Lexicon::operator=(Lexicon&&) noexcept = default;
Lexicon::~Lexicon() = default;

Lexicon Lexicon::compile(const LexiconConfig& config) {
  std::set<std::string> seen;
  for (const auto& g : config.groups) {
    if (std::find(kKeywordGroups.begin(), kKeywordGroups.end(), g.name) == kKeywordGroups.end()) {
      throw LexiconError(g.name, -1, "unknown keyword group");
    }
    if (!seen.insert(g.name).second) throw LexiconError(g.name, -1, "group defined twice");
    if (g.positive.empty()) throw LexiconError(g.name, -1, "group has no positive patterns");
  }
  for (auto name : kKeywordGroups) {
    if (!seen.count(std::string(name))) throw LexiconError(std::string(name), -1, "group missing from lexicon");
  }

  auto impl = std::make_unique<Impl>();
  impl->config = config;
  for (const auto& g : config.groups) {
    Impl::CompiledGroup cg;
    for (std::size_t i = 0; i < g.positive.size(); ++i) cg.positive.push_back(compile_pattern(g.name, i, g.positive[i]));
    // Negative pattern indices continue after the positive ones.
    for (std::size_t i = 0; i < g.negative.size(); ++i) {
      cg.negative.push_back(compile_pattern(g.name, g.positive.size() + i, g.negative[i]));
    }
    impl->groups.push_back(std::move(cg));
  }
  return Lexicon(std::move(impl));
}

std::vector<GroupHit> Lexicon::match_text(std::string_view text, const std::string& sentence_id) const {
  std::vector<std::size_t> offsets;
  // Folding is length-preserving, so offsets into the folded text are
  // offsets into the original.
  const std::wstring folded = to_wide(fold_utf8(text), &offsets);
  std::vector<GroupHit> hits;
  for (std::size_t gi = 0; gi < impl_->groups.size(); ++gi) {
    const auto& cg = impl_->groups[gi];
    const bool vetoed = std::any_of(cg.negative.begin(), cg.negative.end(),
                                    [&](const std::wregex& re) { return std::regex_search(folded, re); });
    if (vetoed) continue;
    GroupHit hit;
    for (std::size_t pi = 0; pi < cg.positive.size(); ++pi) {
      for (auto it = std::wsregex_iterator(folded.begin(), folded.end(), cg.positive[pi]); it != std::wsregex_iterator();
           ++it) {
        const auto b = static_cast<std::size_t>(it->position(0));
        const auto e = b + static_cast<std::size_t>(it->length(0));
        if (e == b) continue;
        hit.matches.push_back(PatternMatch{pi, offsets[b], offsets[e]});
      }
    }
    if (hit.matches.empty()) continue;
    hit.sentence_id = sentence_id;
    hit.group = impl_->config.groups[gi].name;
    hits.push_back(std::move(hit));
  }
  return hits;
}

const LexiconConfig& Lexicon::config() const { return impl_->config; }

Lexicon compile_lexicon(const LexiconConfig& config) { return Lexicon::compile(config); }

Lexicon load_lexicon(const std::filesystem::path& path) { return Lexicon::compile(parse_lexicon_config(read_file(path))); }

const Lexicon& default_lexicon() {
  static const Lexicon lexicon = Lexicon::compile(default_lexicon_config());
  return lexicon;
}

FilterStats filter_corpus(const Lexicon& lexicon, std::span<const Sentence> sentences,
                          const std::function<void(TopicalSentence&&)>& sink) {
  FilterStats stats;
  for (const auto& s : sentences) {
    ++stats.seen;
    auto hits = lexicon.match(s);
    if (hits.empty()) continue;
    ++stats.emitted;
    sink(TopicalSentence{s, std::move(hits)});
  }
  return stats;
}

std::vector<TopicalSentence> filter_corpus(const Lexicon& lexicon, std::span<const Sentence> sentences,
                                           FilterStats* stats) {
  std::vector<TopicalSentence> out;
  const FilterStats s = filter_corpus(lexicon, sentences, [&](TopicalSentence&& t) { out.push_back(std::move(t)); });
  if (stats) *stats = s;
  return out;
}

}  // namespace stance

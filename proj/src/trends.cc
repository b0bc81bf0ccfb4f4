#include "stance/trends.h"

#include <algorithm>
#include <set>
#include <tuple>

#include "stance/csv.h"
#include "stance/errors.h"

namespace stance {

void validate_threshold(double tau) {
  if (!(tau > 1.0 / 3.0 && tau <= 1.0)) {
    throw ValidationError("certainty threshold must lie in (1/3, 1], got " + format_double(tau));
  }
}

namespace {

struct Range {
  Date first, last;
};

Range resolve_range(std::span<const ExtractedSentence> sentences, const DateWindow& window) {
  Range r;
  bool any = false;
  for (const auto& s : sentences) {
    if (!any || s.date < r.first) r.first = s.date;
    if (!any || r.last < s.date) r.last = s.date;
    any = true;
  }
  if (window.first) r.first = *window.first;
  if (window.last) r.last = *window.last;
  if (!any && !(window.first && window.last)) r.last = Date{r.first.year - 1, 1, 1};  // empty range
  return r;
}

bool in_range(const Range& r, const Date& d) { return !(d < r.first) && !(r.last < d); }

std::set<std::string> publishers_of(std::span<const ExtractedSentence> sentences) {
  std::set<std::string> out;
  for (const auto& s : sentences) out.insert(s.publisher);
  return out;
}

// Bucket key -> months its in-range days fall in.
std::map<std::string, std::set<std::string>> week_months(const Range& r) {
  std::map<std::string, std::set<std::string>> out;
  if (r.last < r.first) return out;
  for (auto d = r.first.days(); d <= r.last.days(); d += std::chrono::days{1}) {
    const Date day = Date::from_days(d);
    out[bucket_key(day, Granularity::kWeek)].insert(bucket_key(day, Granularity::kMonth));
  }
  return out;
}

void finalize(TrendPoint& p) {
  p.total = p.counts[0] + p.counts[1] + p.counts[2] + p.counts[3];
  p.empty = p.total == 0;
  for (std::size_t i = 0; i < 4; ++i) {
    p.shares[i] = p.empty ? 0.0 : static_cast<double>(p.counts[i]) / static_cast<double>(p.total);
  }
}

// Empty points for every bucket of the range, keyed by bucket.
std::map<std::string, TrendPoint> blank_series(const Range& r, Granularity g, const std::string& publisher,
                                               const std::string& group) {
  std::map<std::string, TrendPoint> out;
  for (const auto& key : bucket_range(r.first, r.last, g)) {
    TrendPoint p;
    p.bucket = key;
    p.publisher = publisher;
    p.group = group;
    out.emplace(key, std::move(p));
  }
  if (g == Granularity::kWeek) {
    for (const auto& [week, months] : week_months(r)) {
      for (const auto& m : months) out[week].month_parts[m];
    }
  }
  return out;
}

std::size_t stance_slot(const Prediction& p, std::optional<double> threshold) {
  if (threshold && p.max_prob() < *threshold) return kUncertain;
  return static_cast<std::size_t>(p.label);
}

void add(TrendPoint& p, Granularity g, const Date& d, std::size_t slot) {
  ++p.counts[slot];
  if (g == Granularity::kWeek) ++p.month_parts[bucket_key(d, Granularity::kMonth)][slot];
}

std::vector<TrendPoint> flatten(std::map<std::string, TrendPoint>& series) {
  std::vector<TrendPoint> out;
  for (auto& [key, p] : series) {
    finalize(p);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

std::vector<MentionPoint> article_mention_share(std::span<const ExtractedSentence> sentences,
                                                std::span<const GroupHit> hits, Granularity granularity,
                                                const DateWindow& window) {
  std::set<std::string> topical_sentences;
  for (const auto& h : hits) topical_sentences.insert(h.sentence_id);
  struct ArticleInfo {
    std::string publisher;
    Date date;
    bool topical = false;
  };
  std::map<std::string, ArticleInfo> articles;
  for (const auto& s : sentences) {
    auto& a = articles[s.sentence.article_id];
    a.publisher = s.publisher;
    a.date = s.date;
    a.topical = a.topical || topical_sentences.count(s.sentence.id());
  }
  const Range r = resolve_range(sentences, window);
  std::vector<MentionPoint> out;
  for (const auto& publisher : publishers_of(sentences)) {
    std::map<std::string, MentionPoint> series;
    for (const auto& key : bucket_range(r.first, r.last, granularity)) {
      series[key].bucket = key;
      series[key].publisher = publisher;
    }
    for (const auto& [id, a] : articles) {
      if (a.publisher != publisher || !in_range(r, a.date)) continue;
      auto& p = series[bucket_key(a.date, granularity)];
      ++p.articles;
      if (a.topical) ++p.topical;
    }
    for (auto& [key, p] : series) {
      p.empty = p.articles == 0;
      p.share = p.empty ? 0.0 : static_cast<double>(p.topical) / static_cast<double>(p.articles);
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<CountPoint> sentence_counts(std::span<const ExtractedSentence> sentences, std::span<const GroupHit> hits,
                                        Granularity granularity, const DateWindow& window) {
  std::set<std::string> topical;
  for (const auto& h : hits) topical.insert(h.sentence_id);
  const Range r = resolve_range(sentences, window);
  const auto weeks = granularity == Granularity::kWeek ? week_months(r) : std::map<std::string, std::set<std::string>>{};
  std::vector<CountPoint> out;
  for (const auto& publisher : publishers_of(sentences)) {
    std::map<std::string, CountPoint> series;
    for (const auto& key : bucket_range(r.first, r.last, granularity)) {
      CountPoint p;
      p.bucket = key;
      p.publisher = publisher;
      if (auto it = weeks.find(key); it != weeks.end()) {
        for (const auto& m : it->second) p.month_parts[m] = 0;
      }
      series.emplace(key, std::move(p));
    }
    for (const auto& s : sentences) {
      if (s.publisher != publisher || !in_range(r, s.date) || !topical.count(s.sentence.id())) continue;
      auto& p = series[bucket_key(s.date, granularity)];
      ++p.count;
      if (granularity == Granularity::kWeek) ++p.month_parts[bucket_key(s.date, Granularity::kMonth)];
    }
    for (auto& [key, p] : series) {
      p.empty = p.count == 0;
      out.push_back(std::move(p));
    }
  }
  return out;
}

namespace {

const ExtractedSentence& lookup(const std::map<std::string, const ExtractedSentence*>& index, const Prediction& p) {
  auto it = index.find(p.sentence_id);
  if (it == index.end()) throw ValidationError("prediction for unknown sentence " + p.sentence_id);
  return *it->second;
}

void check_threshold(std::span<const Prediction> predictions, std::optional<double> threshold) {
  if (!threshold) return;
  validate_threshold(*threshold);
  for (const auto& p : predictions) {
    if (!p.has_distribution) {
      throw ValidationError("thresholding needs probability distributions; backend '" + p.backend +
                            "' returns labels only");
    }
  }
}

}  // namespace

std::vector<TrendPoint> stance_shares(std::span<const Prediction> predictions,
                                      std::span<const ExtractedSentence> sentences, Granularity granularity,
                                      const std::string& publisher, std::optional<double> threshold,
                                      const DateWindow& window) {
  check_threshold(predictions, threshold);
  const auto index = index_sentences(sentences);
  const Range r = resolve_range(sentences, window);
  auto series = blank_series(r, granularity, publisher, "");
  for (const auto& p : predictions) {
    const auto& s = lookup(index, p);
    if (s.publisher != publisher || !in_range(r, s.date)) continue;
    add(series[bucket_key(s.date, granularity)], granularity, s.date, stance_slot(p, threshold));
  }
  return flatten(series);
}

std::vector<TrendPoint> group_stance_shares(std::span<const Prediction> predictions,
                                            std::span<const ExtractedSentence> sentences,
                                            std::span<const GroupHit> hits, Granularity granularity,
                                            const DateWindow& window) {
  const auto index = index_sentences(sentences);
  const auto groups = groups_by_sentence(hits);
  std::vector<std::string> group_order;
  for (auto g : kKeywordGroups) group_order.emplace_back(g);
  for (const auto& h : hits) {
    if (std::find(group_order.begin(), group_order.end(), h.group) == group_order.end()) group_order.push_back(h.group);
  }
  const Range r = resolve_range(sentences, window);
  std::vector<TrendPoint> out;
  for (const auto& publisher : publishers_of(sentences)) {
    std::map<std::string, std::map<std::string, TrendPoint>> by_group;
    for (const auto& g : group_order) by_group[g] = blank_series(r, granularity, publisher, g);
    for (const auto& p : predictions) {
      const auto& s = lookup(index, p);
      if (s.publisher != publisher || !in_range(r, s.date)) continue;
      auto it = groups.find(p.sentence_id);
      if (it == groups.end()) continue;
      for (const auto& g : it->second) {
        add(by_group[g][bucket_key(s.date, granularity)], granularity, s.date, stance_slot(p, std::nullopt));
      }
    }
    for (const auto& g : group_order) {
      for (auto& p : flatten(by_group[g])) out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<TrendPoint> rebin_to_months(std::span<const TrendPoint> weekly) {
  std::map<std::tuple<std::string, std::string, std::string>, TrendPoint> merged;
  std::vector<std::tuple<std::string, std::string, std::string>> order;
  for (const auto& w : weekly) {
    for (const auto& [month, counts] : w.month_parts) {
      auto key = std::make_tuple(w.publisher, w.group, month);
      auto [it, inserted] = merged.try_emplace(key);
      if (inserted) {
        it->second.bucket = month;
        it->second.publisher = w.publisher;
        it->second.group = w.group;
      }
      for (std::size_t i = 0; i < 4; ++i) it->second.counts[i] += counts[i];
    }
  }
  // Keep the input's publisher/group order; months ascend within each.
  std::vector<std::pair<std::string, std::string>> series_order;
  for (const auto& w : weekly) {
    std::pair<std::string, std::string> s{w.publisher, w.group};
    if (std::find(series_order.begin(), series_order.end(), s) == series_order.end()) series_order.push_back(s);
  }
  std::vector<TrendPoint> out;
  for (const auto& [publisher, group] : series_order) {
    for (auto& [key, p] : merged) {
      if (std::get<0>(key) != publisher || std::get<1>(key) != group) continue;
      finalize(p);
      out.push_back(p);
    }
  }
  return out;
}

std::vector<CountPoint> rebin_to_months(std::span<const CountPoint> weekly) {
  std::map<std::pair<std::string, std::string>, CountPoint> merged;
  std::vector<std::string> publishers;
  for (const auto& w : weekly) {
    if (std::find(publishers.begin(), publishers.end(), w.publisher) == publishers.end()) publishers.push_back(w.publisher);
    for (const auto& [month, count] : w.month_parts) {
      auto& p = merged[{w.publisher, month}];
      p.bucket = month;
      p.publisher = w.publisher;
      p.count += count;
    }
  }
  std::vector<CountPoint> out;
  for (const auto& publisher : publishers) {
    for (auto& [key, p] : merged) {
      if (key.first != publisher) continue;
      p.empty = p.count == 0;
      out.push_back(p);
    }
  }
  return out;
}

void write_trend_csv(std::ostream& out, std::span<const TrendPoint> points, std::optional<std::size_t> only_stance) {
  write_csv_row(out, {"bucket", "publisher", "group", "stance", "count", "share", "flags"});
  for (const auto& p : points) {
    for (std::size_t i = 0; i < 4; ++i) {
      if (only_stance && *only_stance != i) continue;
      write_csv_row(out, {p.bucket, p.publisher, p.group, std::string(kTrendStances[i]), std::to_string(p.counts[i]),
                          format_double(p.shares[i]), p.empty ? "empty" : ""});
    }
  }
}

void write_count_csv(std::ostream& out, std::span<const CountPoint> points) {
  write_csv_row(out, {"bucket", "publisher", "count", "flags"});
  for (const auto& p : points) write_csv_row(out, {p.bucket, p.publisher, std::to_string(p.count), p.empty ? "empty" : ""});
}

void write_mention_csv(std::ostream& out, std::span<const MentionPoint> points) {
  write_csv_row(out, {"bucket", "publisher", "articles", "topical", "share", "flags"});
  for (const auto& p : points) {
    write_csv_row(out, {p.bucket, p.publisher, std::to_string(p.articles), std::to_string(p.topical),
                        format_double(p.share), p.empty ? "empty" : ""});
  }
}

}  // namespace stance

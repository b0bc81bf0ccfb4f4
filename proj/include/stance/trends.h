#pragma once

#include <array>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "stance/dates.h"
#include "stance/extract.h"
#include "stance/prediction.h"

namespace stance {

inline constexpr std::array<std::string_view, 4> kTrendStances = {"Against", "Neutral", "Supportive", "Uncertain"};
inline constexpr std::size_t kUncertain = 3;
inline constexpr double kDefaultThreshold = 0.70;

using StanceCounts = std::array<std::size_t, 4>;

struct TrendPoint {
  std::string bucket;
  std::string publisher;
  std::string group;  // empty for the overall series
  StanceCounts counts{};
  std::size_t total = 0;
  std::array<double, 4> shares{};
  bool empty = false;  // total == 0; shares are all zero
  // Weekly points only: counts split by calendar month, so weeks can be
  // re-binned to months exactly even when a week straddles two months.
  std::map<std::string, StanceCounts> month_parts;
};

struct CountPoint {
  std::string bucket;
  std::string publisher;
  std::size_t count = 0;
  bool empty = false;
  std::map<std::string, std::size_t> month_parts;  // weekly points only
};

struct MentionPoint {
  std::string bucket;
  std::string publisher;
  std::size_t articles = 0;
  std::size_t topical = 0;
  double share = 0;
  bool empty = false;  // no articles in the bucket; never interpolated
};

// Inclusive date range the buckets cover. Unset ends default to the
// earliest / latest date among the input sentences.
struct DateWindow {
  std::optional<Date> first;
  std::optional<Date> last;
};

// Throws ValidationError unless 1/3 < tau <= 1.
void validate_threshold(double tau);

// Share of articles with at least one topical sentence, per publisher and
// bucket. Articles are known through their sentences.
std::vector<MentionPoint> article_mention_share(std::span<const ExtractedSentence> sentences,
                                                std::span<const GroupHit> hits, Granularity granularity,
                                                const DateWindow& window = {});

// Topical sentences per publisher and bucket; empty buckets report 0.
std::vector<CountPoint> sentence_counts(std::span<const ExtractedSentence> sentences, std::span<const GroupHit> hits,
                                        Granularity granularity, const DateWindow& window = {});

// Stance shares of one publisher's predictions. With a threshold, a
// prediction whose largest probability is below it counts as Uncertain;
// the boundary itself keeps the label. Thresholding distribution-free
// predictions throws ValidationError.
std::vector<TrendPoint> stance_shares(std::span<const Prediction> predictions,
                                      std::span<const ExtractedSentence> sentences, Granularity granularity,
                                      const std::string& publisher, std::optional<double> threshold = std::nullopt,
                                      const DateWindow& window = {});

// Per (publisher, group, bucket). A sentence hitting several groups counts
// once in each.
std::vector<TrendPoint> group_stance_shares(std::span<const Prediction> predictions,
                                            std::span<const ExtractedSentence> sentences,
                                            std::span<const GroupHit> hits, Granularity granularity,
                                            const DateWindow& window = {});

std::vector<TrendPoint> rebin_to_months(std::span<const TrendPoint> weekly);
std::vector<CountPoint> rebin_to_months(std::span<const CountPoint> weekly);

// Tidy CSV: bucket, publisher, group, stance, count, share, flags. With
// `only_stance` set, just that stance's rows.
void write_trend_csv(std::ostream& out, std::span<const TrendPoint> points,
                     std::optional<std::size_t> only_stance = std::nullopt);
// bucket, publisher, count, flags
void write_count_csv(std::ostream& out, std::span<const CountPoint> points);
// bucket, publisher, articles, topical, share, flags
void write_mention_csv(std::ostream& out, std::span<const MentionPoint> points);

}  // namespace stance

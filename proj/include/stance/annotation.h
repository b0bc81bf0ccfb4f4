#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stance {

enum class StanceLabel { kAgainst = 0, kNeutral = 1, kSupportive = 2, kAmbiguous = 3 };

// "Against", "Neutral", "Supportive", "Ambiguous".
std::string_view label_name(StanceLabel label);
// Case-insensitive; also accepts "pro" for Supportive.
std::optional<StanceLabel> parse_label(std::string_view text);

// A rating on the 1-5 scale or the Ambiguous mark.
class RawRating {
 public:
  static RawRating scale(int value);  // throws ValidationError outside 1..5
  static RawRating ambiguous() { return RawRating(0); }

  bool is_ambiguous() const { return value_ == 0; }
  int value() const { return value_; }  // 0 for Ambiguous
  std::string str() const;              // "1".."5" or "A"

  friend bool operator==(const RawRating&, const RawRating&) = default;

 private:
  explicit RawRating(int v) : value_(v) {}
  int value_;
};

// Accepts 1-5, "A", "Ambiguous", "NA" (case-insensitive).
std::optional<RawRating> parse_raw_rating(std::string_view text);

StanceLabel collapse_rating(RawRating raw);

struct AnnotationRecord {
  std::string sentence_id;
  std::string annotator_id;
  RawRating raw = RawRating::ambiguous();
  StanceLabel label = StanceLabel::kAmbiguous;
  std::string created_at;  // ISO-8601 UTC
  std::string guideline_version;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

// Builds a record with the label derived from the rating. An empty
// `created_at` is replaced by the current UTC time.
AnnotationRecord make_record(std::string sentence_id, std::string annotator_id, RawRating raw,
                             std::string guideline_version, std::string created_at = {});
std::string utc_timestamp();

// --- agreement ---

// Cohen's kappa over two equally long label sequences. Throws
// ValidationError on empty input or length mismatch.
double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b);
double cohen_kappa(std::span<const StanceLabel> a, std::span<const StanceLabel> b);

// Maps a rating to a category, or nullopt to drop the item from the
// comparison. A pair is kept only when both sides map to a category.
using LabelMerge = std::function<std::optional<std::string>(RawRating)>;

struct KappaResult {
  double kappa = 0.0;
  std::size_t n = 0;
};

KappaResult merged_kappa(std::span<const RawRating> a, std::span<const RawRating> b, const LabelMerge& merge);

enum class KappaVariant {
  kSixCategory,          // 1..5 and Ambiguous
  kFourCategory,         // collapsed, Ambiguous kept
  kThreeMergedNeutral,   // Ambiguous folded into Neutral
  kThreeCategory,        // pairs where both sides are Against/Neutral/Supportive
  kTwoCategory,          // pairs where both sides are Against/Supportive
};

std::optional<KappaVariant> parse_kappa_variant(std::string_view name);
std::string_view kappa_variant_name(KappaVariant v);
LabelMerge variant_merge(KappaVariant v);
KappaResult variant_kappa(std::span<const RawRating> a, std::span<const RawRating> b, KappaVariant v);

// --- sampling and assignment ---

struct SamplingCandidate {
  std::string sentence_id;
  std::string publisher;
  std::vector<std::string> groups;  // keyword groups hit
  bool flagged = false;
};

struct SamplingCell {
  std::string publisher;
  std::string group;
  std::size_t quota = 0;
  std::vector<std::string> sentence_ids;
};

struct SampleResult {
  std::vector<SamplingCell> cells;        // publisher-major, then group order
  std::vector<std::string> sentence_ids;  // all sampled ids, cell order
};

// Equal share per publisher (remainder to the first publishers by name);
// within each publisher, quotas proportional to each group's prevalence over
// all eligible candidates, rounded by largest remainder with ties going to
// the earlier group. Flagged sentences are ineligible. A sentence hitting
// several groups can fill any of them but is drawn at most once. Throws
// ValidationError naming the first cell that cannot be filled.
SampleResult sample_for_annotation(std::span<const SamplingCandidate> candidates, std::size_t n, std::uint64_t seed,
                                   std::span<const std::string> group_order = {});

// Largest-remainder apportionment of `total` by `weights`; ties go to the
// lower index.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights);

struct AnnotationBatch {
  std::string id;
  std::vector<std::string> sentence_ids;
  std::vector<std::string> annotators;
  bool overlap = false;
};

enum class SplitMode { kDisjoint, kInterleaved };
std::optional<SplitMode> parse_split_mode(std::string_view s);

struct AssignmentPlan {
  std::vector<std::string> primary;  // the annotators sharing the sample
  std::string third;                 // annotator of the overlap subset, may be empty
  std::size_t overlap = 0;           // sentences drawn for the third annotator
  SplitMode mode = SplitMode::kDisjoint;
};

// One batch per primary annotator, plus one overlap batch per primary
// annotator pairing them with the third annotator. The overlap subset is a
// seeded draw spread evenly over the primary batches.
std::vector<AnnotationBatch> plan_batches(std::span<const std::string> sentence_ids, const AssignmentPlan& plan,
                                          std::uint64_t seed);

std::string batches_to_json(std::span<const AnnotationBatch> batches);
std::vector<AnnotationBatch> batches_from_json(std::string_view text);

// --- resolution ---

enum class Precedence { kFirstAnnotator, kMajorityWithThird };
std::optional<Precedence> parse_precedence(std::string_view s);

// One label per sentence from possibly several live records.
// kFirstAnnotator: the record of the earliest annotator in `annotator_order`
// (unlisted annotators rank after listed ones, by name).
// kMajorityWithThird: the most common label; on a tie the third annotator's
// label wins when present, otherwise first-annotator order decides.
std::map<std::string, StanceLabel> resolve_labels(std::span<const AnnotationRecord> records, Precedence precedence,
                                                  std::span<const std::string> annotator_order,
                                                  const std::string& third = {});

// --- interchange ---

struct AnnotationImportReject {
  std::size_t row = 0;
  std::string reason;
};

struct AnnotationImport {
  std::vector<AnnotationRecord> records;
  std::vector<AnnotationImportReject> rejects;
};

// CSV columns: sentence_id, annotator_id, raw_rating, label, created_at,
// guideline_version. A label column that disagrees with the rating rejects
// the row.
AnnotationImport read_annotations_csv(std::istream& in);
void write_annotations_csv(std::ostream& out, std::span<const AnnotationRecord> records);

std::string record_to_json(const AnnotationRecord& r);
AnnotationRecord record_from_json(std::string_view line);

// Append-only, fsync'd annotation log. The live record for a (sentence,
// annotator) pair is the latest one; earlier ones remain as audit trail.
// Submissions are serialized; readers run concurrently. An empty path keeps
// the log in memory.
class AnnotationStore {
 public:
  AnnotationStore() = default;
  // Replays an existing log. Throws ValidationError on a corrupt line other
  // than a torn final line, which is ignored.
  explicit AnnotationStore(std::filesystem::path log_path);

  // Durable on return.
  void submit(const AnnotationRecord& record);
  std::size_t import(std::span<const AnnotationRecord> records);

  std::vector<AnnotationRecord> live() const;  // sorted by sentence, annotator
  std::optional<AnnotationRecord> live_record(const std::string& sentence_id, const std::string& annotator) const;
  std::vector<AnnotationRecord> history(const std::string& sentence_id, const std::string& annotator) const;
  std::size_t log_size() const;

 private:
  using Key = std::pair<std::string, std::string>;
  std::filesystem::path path_;
  mutable std::shared_mutex mu_;
  std::vector<AnnotationRecord> log_;
  std::map<Key, std::size_t> live_;  // index into log_
};

}  // namespace stance

#include "stance/annotation.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>

#include <json.hpp>

#include "stance/csv.h"
#include "stance/dates.h"
#include "stance/errors.h"
#include "stance/fsutil.h"
#include "stance/rng.h"
#include "stance/text.h"

namespace stance {

using nlohmann::json;

std::string_view label_name(StanceLabel label) {
  switch (label) {
    case StanceLabel::kAgainst: return "Against";
    case StanceLabel::kNeutral: return "Neutral";
    case StanceLabel::kSupportive: return "Supportive";
    case StanceLabel::kAmbiguous: return "Ambiguous";
  }
  return "Ambiguous";
}

std::optional<StanceLabel> parse_label(std::string_view text) {
  const std::string t = to_lower_ascii(trim(text));
  if (t == "against") return StanceLabel::kAgainst;
  if (t == "neutral") return StanceLabel::kNeutral;
  if (t == "supportive" || t == "pro") return StanceLabel::kSupportive;
  if (t == "ambiguous") return StanceLabel::kAmbiguous;
  return std::nullopt;
}

RawRating RawRating::scale(int value) {
  if (value < 1 || value > 5) throw ValidationError("rating must be 1-5 or Ambiguous, got " + std::to_string(value));
  return RawRating(value);
}

std::string RawRating::str() const { return is_ambiguous() ? "A" : std::to_string(value_); }

std::optional<RawRating> parse_raw_rating(std::string_view text) {
  const std::string t = to_lower_ascii(trim(text));
  if (t == "a" || t == "ambiguous" || t == "na") return RawRating::ambiguous();
  if (t.size() == 1 && t[0] >= '1' && t[0] <= '5') return RawRating::scale(t[0] - '0');
  return std::nullopt;
}

StanceLabel collapse_rating(RawRating raw) {
  if (raw.is_ambiguous()) return StanceLabel::kAmbiguous;
  if (raw.value() <= 2) return StanceLabel::kAgainst;
  if (raw.value() == 3) return StanceLabel::kNeutral;
  return StanceLabel::kSupportive;
}

std::string utc_timestamp() {
  using namespace std::chrono;
  const auto now = time_point_cast<milliseconds>(system_clock::now());
  const auto day = floor<days>(now);
  const year_month_day ymd{day};
  const hh_mm_ss hms{now - day};
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()), static_cast<int>(hms.subseconds().count()));
  return buf;
}

AnnotationRecord make_record(std::string sentence_id, std::string annotator_id, RawRating raw,
                             std::string guideline_version, std::string created_at) {
  AnnotationRecord r;
  r.sentence_id = std::move(sentence_id);
  r.annotator_id = std::move(annotator_id);
  r.raw = raw;
  r.label = collapse_rating(raw);
  r.created_at = created_at.empty() ? utc_timestamp() : std::move(created_at);
  r.guideline_version = std::move(guideline_version);
  return r;
}

// --- agreement ---

double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() != b.size()) {
    throw ValidationError("kappa needs equally long label lists (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw ValidationError("kappa needs at least one labeled pair");
  std::map<std::string, std::pair<double, double>> marginals;
  double agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    marginals[a[i]].first += 1;
    marginals[b[i]].second += 1;
    if (a[i] == b[i]) agree += 1;
  }
  // Counts are integers, so both terms below are exact for any realistic n.
  const double n = static_cast<double>(a.size());
  double chance = 0;
  for (const auto& [label, m] : marginals) chance += m.first * m.second;
  const double denom = n * n - chance;
  if (denom == 0) return 1.0;  // both raters used one and the same category
  return (n * agree - chance) / denom;
}

double cohen_kappa(std::span<const StanceLabel> a, std::span<const StanceLabel> b) {
  std::vector<std::string> sa, sb;
  for (auto l : a) sa.emplace_back(label_name(l));
  for (auto l : b) sb.emplace_back(label_name(l));
  return cohen_kappa(sa, sb);
}

KappaResult merged_kappa(std::span<const RawRating> a, std::span<const RawRating> b, const LabelMerge& merge) {
  if (a.size() != b.size()) throw ValidationError("kappa needs equally long rating lists");
  std::vector<std::string> ka, kb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto ma = merge(a[i]);
    auto mb = merge(b[i]);
    if (!ma || !mb) continue;
    ka.push_back(std::move(*ma));
    kb.push_back(std::move(*mb));
  }
  if (ka.empty()) throw ValidationError("no rating pairs left after merging categories");
  return KappaResult{cohen_kappa(ka, kb), ka.size()};
}

namespace {

constexpr std::array<std::pair<KappaVariant, std::string_view>, 5> kVariantNames = {{
    {KappaVariant::kSixCategory, "six"},
    {KappaVariant::kFourCategory, "four"},
    {KappaVariant::kThreeMergedNeutral, "three-merged"},
    {KappaVariant::kThreeCategory, "three"},
    {KappaVariant::kTwoCategory, "two"},
}};

}  // namespace

std::optional<KappaVariant> parse_kappa_variant(std::string_view name) {
  for (const auto& [v, n] : kVariantNames) {
    if (n == name) return v;
  }
  return std::nullopt;
}

std::string_view kappa_variant_name(KappaVariant v) {
  for (const auto& [var, n] : kVariantNames) {
    if (var == v) return n;
  }
  return "";
}

LabelMerge variant_merge(KappaVariant v) {
  switch (v) {
    case KappaVariant::kSixCategory:
      return [](RawRating r) -> std::optional<std::string> { return r.str(); };
    case KappaVariant::kFourCategory:
      return [](RawRating r) -> std::optional<std::string> { return std::string(label_name(collapse_rating(r))); };
    case KappaVariant::kThreeMergedNeutral:
      return [](RawRating r) -> std::optional<std::string> {
        const auto l = collapse_rating(r);
        return std::string(label_name(l == StanceLabel::kAmbiguous ? StanceLabel::kNeutral : l));
      };
    case KappaVariant::kThreeCategory:
      return [](RawRating r) -> std::optional<std::string> {
        const auto l = collapse_rating(r);
        if (l == StanceLabel::kAmbiguous) return std::nullopt;
        return std::string(label_name(l));
      };
    case KappaVariant::kTwoCategory:
      return [](RawRating r) -> std::optional<std::string> {
        const auto l = collapse_rating(r);
        if (l != StanceLabel::kAgainst && l != StanceLabel::kSupportive) return std::nullopt;
        return std::string(label_name(l));
      };
  }
  return {};
}

KappaResult variant_kappa(std::span<const RawRating> a, std::span<const RawRating> b, KappaVariant v) {
  return merged_kappa(a, b, variant_merge(v));
}

// --- sampling ---

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights) {
  std::vector<std::size_t> out(weights.size(), 0);
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (weights.empty() || total == 0 || sum <= 0) return out;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += out[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[remainders[k % remainders.size()].second];
  return out;
}

SampleResult sample_for_annotation(std::span<const SamplingCandidate> candidates, std::size_t n, std::uint64_t seed,
                                   std::span<const std::string> group_order) {
  SampleResult result;
  if (n == 0) return result;

  std::vector<const SamplingCandidate*> eligible;
  for (const auto& c : candidates) {
    if (!c.flagged && !c.groups.empty()) eligible.push_back(&c);
  }
  if (eligible.size() < n) {
    throw ValidationError("need " + std::to_string(n) + " eligible sentences, corpus has " +
                          std::to_string(eligible.size()));
  }
  std::stable_sort(eligible.begin(), eligible.end(),
                   [](const auto* x, const auto* y) { return x->sentence_id < y->sentence_id; });

  std::set<std::string> publisher_set;
  std::map<std::string, double> prevalence;
  for (const auto* c : eligible) {
    publisher_set.insert(c->publisher);
    for (const auto& g : std::set<std::string>(c->groups.begin(), c->groups.end())) prevalence[g] += 1;
  }
  std::vector<std::string> groups;
  if (group_order.empty()) {
    for (const auto& [g, count] : prevalence) groups.push_back(g);
  } else {
    groups.assign(group_order.begin(), group_order.end());
    for (const auto& [g, count] : prevalence) {
      if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    }
  }
  std::vector<double> group_weights;
  for (const auto& g : groups) group_weights.push_back(prevalence.count(g) ? prevalence[g] : 0.0);

  const std::vector<std::string> publishers(publisher_set.begin(), publisher_set.end());
  const std::vector<std::size_t> halves = apportion(n, std::vector<double>(publishers.size(), 1.0));

  std::set<std::string> taken;
  for (std::size_t p = 0; p < publishers.size(); ++p) {
    const auto quotas = apportion(halves[p], group_weights);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (quotas[g] == 0) continue;
      SamplingCell cell{publishers[p], groups[g], quotas[g], {}};
      std::vector<const SamplingCandidate*> pool;
      for (const auto* c : eligible) {
        if (c->publisher != cell.publisher || taken.count(c->sentence_id)) continue;
        if (std::find(c->groups.begin(), c->groups.end(), cell.group) != c->groups.end()) pool.push_back(c);
      }
      if (pool.size() < cell.quota) {
        throw ValidationError("insufficient eligible sentences in cell (" + cell.publisher + ", " + cell.group +
                              "): need " + std::to_string(cell.quota) + ", have " + std::to_string(pool.size()));
      }
      Rng rng(derive_seed(seed, cell.publisher + "\x1f" + cell.group));
      for (std::size_t i : rng.sample_indices(pool.size(), cell.quota)) {
        cell.sentence_ids.push_back(pool[i]->sentence_id);
        taken.insert(pool[i]->sentence_id);
      }
      result.sentence_ids.insert(result.sentence_ids.end(), cell.sentence_ids.begin(), cell.sentence_ids.end());
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

std::optional<SplitMode> parse_split_mode(std::string_view s) {
  if (s == "disjoint") return SplitMode::kDisjoint;
  if (s == "interleaved") return SplitMode::kInterleaved;
  return std::nullopt;
}

std::vector<AnnotationBatch> plan_batches(std::span<const std::string> sentence_ids, const AssignmentPlan& plan,
                                          std::uint64_t seed) {
  if (plan.primary.empty()) throw ValidationError("assignment needs at least one primary annotator");
  if (plan.overlap > 0 && plan.third.empty()) throw ValidationError("overlap subset requested without a third annotator");
  if (std::find(plan.primary.begin(), plan.primary.end(), plan.third) != plan.primary.end()) {
    throw ValidationError("third annotator must differ from the primary annotators");
  }
  const std::size_t k = plan.primary.size();
  std::vector<AnnotationBatch> batches(k);
  for (std::size_t a = 0; a < k; ++a) {
    batches[a].id = "batch-" + plan.primary[a];
    batches[a].annotators = {plan.primary[a]};
  }
  if (plan.mode == SplitMode::kDisjoint) {
    const auto sizes = apportion(sentence_ids.size(), std::vector<double>(k, 1.0));
    std::size_t pos = 0;
    for (std::size_t a = 0; a < k; ++a) {
      batches[a].sentence_ids.assign(sentence_ids.begin() + static_cast<std::ptrdiff_t>(pos),
                                     sentence_ids.begin() + static_cast<std::ptrdiff_t>(pos + sizes[a]));
      pos += sizes[a];
    }
  } else {
    for (std::size_t i = 0; i < sentence_ids.size(); ++i) batches[i % k].sentence_ids.push_back(sentence_ids[i]);
  }
  if (plan.overlap == 0) return batches;
  if (plan.overlap > sentence_ids.size()) throw ValidationError("overlap subset larger than the sample");

  std::vector<double> weights;
  for (const auto& b : batches) weights.push_back(static_cast<double>(b.sentence_ids.size()));
  const auto shares = apportion(plan.overlap, weights);
  for (std::size_t a = 0; a < k; ++a) {
    AnnotationBatch ob;
    ob.id = "overlap-" + plan.primary[a];
    ob.annotators = {plan.primary[a], plan.third};
    ob.overlap = true;
    Rng rng(derive_seed(seed, ob.id));
    for (std::size_t i : rng.sample_indices(batches[a].sentence_ids.size(), shares[a])) {
      ob.sentence_ids.push_back(batches[a].sentence_ids[i]);
    }
    batches.push_back(std::move(ob));
  }
  return batches;
}

std::string batches_to_json(std::span<const AnnotationBatch> batches) {
  json arr = json::array();
  for (const auto& b : batches) {
    arr.push_back({{"id", b.id}, {"sentence_ids", b.sentence_ids}, {"annotators", b.annotators}, {"overlap", b.overlap}});
  }
  return arr.dump(2) + "\n";
}

std::vector<AnnotationBatch> batches_from_json(std::string_view text) {
  std::vector<AnnotationBatch> out;
  try {
    for (const auto& j : json::parse(text)) {
      AnnotationBatch b;
      b.id = j.at("id").get<std::string>();
      b.sentence_ids = j.at("sentence_ids").get<std::vector<std::string>>();
      b.annotators = j.at("annotators").get<std::vector<std::string>>();
      b.overlap = j.value("overlap", false);
      if (b.overlap && b.annotators.size() < 2) throw ValidationError("overlap batch " + b.id + " has one annotator");
      out.push_back(std::move(b));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed batch file: ") + e.what());
  }
  return out;
}

// --- resolution ---

std::optional<Precedence> parse_precedence(std::string_view s) {
  if (s == "first-annotator") return Precedence::kFirstAnnotator;
  if (s == "majority-with-third") return Precedence::kMajorityWithThird;
  return std::nullopt;
}

std::map<std::string, StanceLabel> resolve_labels(std::span<const AnnotationRecord> records, Precedence precedence,
                                                  std::span<const std::string> annotator_order,
                                                  const std::string& third) {
  auto rank = [&](const std::string& annotator) {
    const auto it = std::find(annotator_order.begin(), annotator_order.end(), annotator);
    return std::pair<std::size_t, std::string>(static_cast<std::size_t>(it - annotator_order.begin()), annotator);
  };
  std::map<std::string, std::vector<const AnnotationRecord*>> by_sentence;
  for (const auto& r : records) by_sentence[r.sentence_id].push_back(&r);

  std::map<std::string, StanceLabel> out;
  for (auto& [id, recs] : by_sentence) {
    std::sort(recs.begin(), recs.end(),
              [&](const auto* x, const auto* y) { return rank(x->annotator_id) < rank(y->annotator_id); });
    StanceLabel chosen = recs.front()->label;
    if (precedence == Precedence::kMajorityWithThird && recs.size() > 1) {
      std::array<int, 4> votes{};
      for (const auto* r : recs) ++votes[static_cast<int>(r->label)];
      const int best = *std::max_element(votes.begin(), votes.end());
      const int leaders = static_cast<int>(std::count(votes.begin(), votes.end(), best));
      if (leaders == 1) {
        chosen = static_cast<StanceLabel>(std::max_element(votes.begin(), votes.end()) - votes.begin());
      } else {
        const auto tp = std::find_if(recs.begin(), recs.end(), [&](const auto* r) { return r->annotator_id == third; });
        if (!third.empty() && tp != recs.end() && votes[static_cast<int>((*tp)->label)] == best) {
          chosen = (*tp)->label;
        } else {
          for (const auto* r : recs) {
            if (votes[static_cast<int>(r->label)] == best) {
              chosen = r->label;
              break;
            }
          }
        }
      }
    }
    out.emplace(id, chosen);
  }
  return out;
}

// --- interchange ---

namespace {

constexpr std::array<std::string_view, 6> kAnnotationColumns = {"sentence_id", "annotator_id",    "raw_rating",
                                                                 "label",       "created_at", "guideline_version"};

// Validates one record, returning the reason it is unacceptable.
std::optional<std::string> record_problem(const AnnotationRecord& r) {
  if (trim(r.sentence_id).empty()) return "missing sentence_id";
  if (trim(r.annotator_id).empty()) return "missing annotator_id";
  if (trim(r.guideline_version).empty()) return "missing guideline_version";
  if (!parse_date(r.created_at)) return "bad created_at";
  return std::nullopt;
}

}  // namespace

AnnotationImport read_annotations_csv(std::istream& in) {
  AnnotationImport result;
  CsvReader reader(in);
  auto header_row = reader.next();
  if (!header_row) return result;
  const CsvHeader header(*header_row);
  for (auto col : kAnnotationColumns) {
    if (col != "label" && !header.has(col)) throw ValidationError("annotation CSV lacks column '" + std::string(col) + "'");
  }
  std::size_t row_no = 0;
  while (auto row = reader.next()) {
    ++row_no;
    if (row->size() == 1 && trim((*row)[0]).empty()) continue;
    if (row->size() != header.names().size()) {
      result.rejects.push_back({row_no, "expected " + std::to_string(header.names().size()) + " fields, got " +
                                            std::to_string(row->size())});
      continue;
    }
    std::optional<RawRating> raw;
    try {
      raw = parse_raw_rating(header.get(*row, "raw_rating"));
    } catch (const ValidationError&) {
    }
    if (!raw) {
      result.rejects.push_back({row_no, "invalid raw_rating '" + header.get(*row, "raw_rating") + "'"});
      continue;
    }
    AnnotationRecord r = make_record(std::string(trim(header.get(*row, "sentence_id"))),
                                     std::string(trim(header.get(*row, "annotator_id"))), *raw,
                                     std::string(trim(header.get(*row, "guideline_version"))),
                                     std::string(trim(header.get(*row, "created_at"))));
    if (r.created_at.empty()) r.created_at = "missing";
    const std::string label_text = header.get(*row, "label");
    if (!trim(label_text).empty()) {
      const auto label = parse_label(label_text);
      if (!label || *label != r.label) {
        result.rejects.push_back({row_no, "label '" + label_text + "' does not match rating " + raw->str()});
        continue;
      }
    }
    if (auto problem = record_problem(r)) {
      result.rejects.push_back({row_no, *problem});
      continue;
    }
    result.records.push_back(std::move(r));
  }
  return result;
}

void write_annotations_csv(std::ostream& out, std::span<const AnnotationRecord> records) {
  write_csv_row(out, CsvRow(kAnnotationColumns.begin(), kAnnotationColumns.end()));
  for (const auto& r : records) {
    write_csv_row(out, {r.sentence_id, r.annotator_id, r.raw.str(), std::string(label_name(r.label)), r.created_at,
                        r.guideline_version});
  }
}

std::string record_to_json(const AnnotationRecord& r) {
  json j = {{"sentence_id", r.sentence_id},
            {"annotator_id", r.annotator_id},
            {"raw_rating", r.raw.str()},
            {"label", label_name(r.label)},
            {"created_at", r.created_at},
            {"guideline_version", r.guideline_version}};
  return j.dump();
}

AnnotationRecord record_from_json(std::string_view line) {
  try {
    const json j = json::parse(line);
    const auto raw = parse_raw_rating(j.at("raw_rating").get<std::string>());
    if (!raw) throw ValidationError("invalid raw_rating in annotation log");
    return make_record(j.at("sentence_id").get<std::string>(), j.at("annotator_id").get<std::string>(), *raw,
                       j.at("guideline_version").get<std::string>(), j.at("created_at").get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed annotation record: ") + e.what());
  }
}

// --- store ---

AnnotationStore::AnnotationStore(std::filesystem::path log_path) : path_(std::move(log_path)) {
  if (!std::filesystem::exists(path_)) return;
  std::ifstream in(path_, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0, line_no = 0;
  while (pos < content.size()) {
    const std::size_t line_start = pos;
    auto nl = content.find('\n', pos);
    const bool last = nl == std::string::npos;
    if (last) nl = content.size();
    const std::string line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    // A write cut short by a crash leaves an unterminated final line; that
    // submission was never acknowledged, so it is dropped.
    if (last) {
      in.close();
      std::filesystem::resize_file(path_, line_start);
      break;
    }
    if (trim(line).empty()) continue;
    try {
      const auto r = record_from_json(line);
      live_[{r.sentence_id, r.annotator_id}] = log_.size();
      log_.push_back(r);
    } catch (const ValidationError& e) {
      throw ValidationError("annotation log " + path_.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void AnnotationStore::submit(const AnnotationRecord& record) {
  if (auto problem = record_problem(record)) throw ValidationError(*problem);
  if (record.label != collapse_rating(record.raw)) throw ValidationError("label does not match rating");
  std::unique_lock lock(mu_);
  if (!path_.empty()) durable_append(path_, record_to_json(record) + "\n");
  live_[{record.sentence_id, record.annotator_id}] = log_.size();
  log_.push_back(record);
}

std::size_t AnnotationStore::import(std::span<const AnnotationRecord> records) {
  for (const auto& r : records) submit(r);
  return records.size();
}

std::vector<AnnotationRecord> AnnotationStore::live() const {
  std::shared_lock lock(mu_);
  std::vector<AnnotationRecord> out;
  out.reserve(live_.size());
  for (const auto& [key, idx] : live_) out.push_back(log_[idx]);
  return out;
}

std::optional<AnnotationRecord> AnnotationStore::live_record(const std::string& sentence_id,
                                                             const std::string& annotator) const {
  std::shared_lock lock(mu_);
  auto it = live_.find({sentence_id, annotator});
  if (it == live_.end()) return std::nullopt;
  return log_[it->second];
}

std::vector<AnnotationRecord> AnnotationStore::history(const std::string& sentence_id,
                                                       const std::string& annotator) const {
  std::shared_lock lock(mu_);
  std::vector<AnnotationRecord> out;
  for (const auto& r : log_) {
    if (r.sentence_id == sentence_id && r.annotator_id == annotator) out.push_back(r);
  }
  return out;
}

std::size_t AnnotationStore::log_size() const {
  std::shared_lock lock(mu_);
  return log_.size();
}

}  // namespace stance

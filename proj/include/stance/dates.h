#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stance {

// Calendar date of a publication. Time of day and timezone are ignored for
// bucketing.
struct Date {
  int year = 1970;
  unsigned month = 1;
  unsigned day = 1;

  std::chrono::sys_days days() const;
  static Date from_days(std::chrono::sys_days d);
  std::string iso() const;  // YYYY-MM-DD

  friend auto operator<=>(const Date&, const Date&) = default;
};

// Accepts YYYY-MM-DD optionally followed by 'T' or ' ' and a time with an
// optional zone designator. Returns nullopt for anything else, including
// impossible calendar dates.
std::optional<Date> parse_date(std::string_view text);

enum class Granularity { kWeek, kMonth, kYear };

std::optional<Granularity> parse_granularity(std::string_view s);
std::string_view granularity_name(Granularity g);

// Bucket keys: "2019-W01" (ISO week), "2019-11", "2019".
std::string bucket_key(const Date& d, Granularity g);

// Every bucket key from the bucket containing `first` through the one
// containing `last`, in chronological order.
std::vector<std::string> bucket_range(const Date& first, const Date& last, Granularity g);

// True when `key` is a well-formed key for `g`.
bool valid_bucket_key(std::string_view key, Granularity g);

}  // namespace stance

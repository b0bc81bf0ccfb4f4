#include "stance/dates.h"

#include <charconv>
#include <cstdio>

namespace stance {

namespace {

using namespace std::chrono;

bool parse_uint(std::string_view s, unsigned& out) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{};
}

bool valid_time_suffix(std::string_view t) {
  // HH:MM[:SS[.fff]][Z|+HH:MM|-HH:MM|+HHMM]
  if (t.size() < 5) return false;
  unsigned hh = 0, mm = 0;
  if (!parse_uint(t.substr(0, 2), hh) || t[2] != ':' || !parse_uint(t.substr(3, 2), mm)) return false;
  if (hh > 23 || mm > 59) return false;
  t.remove_prefix(5);
  if (!t.empty() && t[0] == ':') {
    unsigned ss = 0;
    if (t.size() < 3 || !parse_uint(t.substr(1, 2), ss) || ss > 60) return false;
    t.remove_prefix(3);
    if (!t.empty() && t[0] == '.') {
      std::size_t k = 1;
      while (k < t.size() && t[k] >= '0' && t[k] <= '9') ++k;
      if (k == 1) return false;
      t.remove_prefix(k);
    }
  }
  if (t.empty() || t == "Z") return true;
  if (t[0] != '+' && t[0] != '-') return false;
  t.remove_prefix(1);
  unsigned zh = 0, zm = 0;
  if (t.size() == 5 && t[2] == ':') {
    return parse_uint(t.substr(0, 2), zh) && parse_uint(t.substr(3, 2), zm) && zh <= 23 && zm <= 59;
  }
  if (t.size() == 4) return parse_uint(t.substr(0, 2), zh) && parse_uint(t.substr(2, 2), zm);
  if (t.size() == 2) return parse_uint(t, zh);
  return false;
}

std::string two(unsigned v) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%02u", v);
  return buf;
}

// ISO year and week number of a date.
std::pair<int, unsigned> iso_week(const Date& d) {
  const sys_days sd = d.days();
  const unsigned wd = weekday{sd}.iso_encoding();  // 1 = Monday
  const sys_days thursday = sd + days{4 - static_cast<int>(wd)};
  const year_month_day tymd{thursday};
  const sys_days jan1{tymd.year() / January / 1};
  const auto week = static_cast<unsigned>((thursday - jan1).count() / 7 + 1);
  return {static_cast<int>(tymd.year()), week};
}

unsigned iso_weeks_in_year(int y) { return iso_week(Date{y, 12, 28}).second; }

}  // namespace

sys_days Date::days() const { return sys_days{year_month_day{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}}}; }

Date Date::from_days(sys_days d) {
  const year_month_day ymd{d};
  return Date{static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day())};
}

std::string Date::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", year, month, day);
  return buf;
}

std::optional<Date> parse_date(std::string_view text) {
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  unsigned y = 0, m = 0, d = 0;
  if (!parse_uint(text.substr(0, 4), y) || !parse_uint(text.substr(5, 2), m) || !parse_uint(text.substr(8, 2), d)) {
    return std::nullopt;
  }
  const year_month_day ymd{std::chrono::year{static_cast<int>(y)}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  if (text.size() > 10) {
    if (text[10] != 'T' && text[10] != ' ') return std::nullopt;
    if (!valid_time_suffix(text.substr(11))) return std::nullopt;
  }
  return Date{static_cast<int>(y), m, d};
}

std::optional<Granularity> parse_granularity(std::string_view s) {
  if (s == "week") return Granularity::kWeek;
  if (s == "month") return Granularity::kMonth;
  if (s == "year") return Granularity::kYear;
  return std::nullopt;
}

std::string_view granularity_name(Granularity g) {
  switch (g) {
    case Granularity::kWeek: return "week";
    case Granularity::kMonth: return "month";
    case Granularity::kYear: return "year";
  }
  return "month";
}

std::string bucket_key(const Date& d, Granularity g) {
  switch (g) {
    case Granularity::kWeek: {
      auto [y, w] = iso_week(d);
      return std::to_string(y) + "-W" + two(w);
    }
    case Granularity::kMonth:
      return std::to_string(d.year) + "-" + two(d.month);
    case Granularity::kYear:
      return std::to_string(d.year);
  }
  return {};
}

std::vector<std::string> bucket_range(const Date& first, const Date& last, Granularity g) {
  std::vector<std::string> keys;
  if (last < first) return keys;
  switch (g) {
    case Granularity::kYear:
      for (int y = first.year; y <= last.year; ++y) keys.push_back(std::to_string(y));
      break;
    case Granularity::kMonth: {
      int y = first.year;
      unsigned m = first.month;
      while (y < last.year || (y == last.year && m <= last.month)) {
        keys.push_back(std::to_string(y) + "-" + two(m));
        if (++m > 12) {
          m = 1;
          ++y;
        }
      }
      break;
    }
    case Granularity::kWeek: {
      const unsigned wd = weekday{first.days()}.iso_encoding();
      sys_days monday = first.days() - days{static_cast<int>(wd) - 1};
      for (; monday <= last.days(); monday += days{7}) keys.push_back(bucket_key(Date::from_days(monday), g));
      break;
    }
  }
  return keys;
}

bool valid_bucket_key(std::string_view key, Granularity g) {
  unsigned y = 0, v = 0;
  switch (g) {
    case Granularity::kYear:
      return key.size() == 4 && parse_uint(key, y);
    case Granularity::kMonth:
      return key.size() == 7 && key[4] == '-' && parse_uint(key.substr(0, 4), y) &&
             parse_uint(key.substr(5, 2), v) && v >= 1 && v <= 12;
    case Granularity::kWeek:
      return key.size() == 8 && key[4] == '-' && key[5] == 'W' && parse_uint(key.substr(0, 4), y) &&
             parse_uint(key.substr(6, 2), v) && v >= 1 && v <= iso_weeks_in_year(static_cast<int>(y));
  }
  return false;
}

}  // namespace stance

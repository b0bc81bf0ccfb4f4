#include "stance/csv.h"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "stance/errors.h"
#include "stance/text.h"

namespace stance {

std::optional<CsvRow> CsvReader::next() {
  CsvRow row;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  bool field_was_quoted = false;
  record_line_ = line_;
  int c;
  while ((c = in_.get()) != EOF) {
    any = true;
    const char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in_.peek() == '"') {
          in_.get();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line_;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && field.empty() && !field_was_quoted) {
      in_quotes = true;
      field_was_quoted = true;
    } else if (ch == sep_) {
      row.push_back(std::move(field));
      field.clear();
      field_was_quoted = false;
    } else if (ch == '\r' && in_.peek() == '\n') {
      continue;
    } else if (ch == '\n') {
      ++line_;
      row.push_back(std::move(field));
      return row;
    } else {
      field.push_back(ch);
    }
  }
  if (in_quotes) {
    throw ValidationError("unterminated quoted CSV field starting on line " +
                          std::to_string(record_line_));
  }
  if (!any) return std::nullopt;
  row.push_back(std::move(field));
  return row;
}

CsvHeader::CsvHeader(const CsvRow& names) : names_(names) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    std::string key(trim(names_[i]));
    // Tolerate a UTF-8 byte order mark on the first column.
    if (i == 0 && key.rfind("\xEF\xBB\xBF", 0) == 0) key.erase(0, 3);
    index_.emplace(to_lower_ascii(key), i);
  }
}

std::optional<std::size_t> CsvHeader::find(std::string_view name) const {
  auto it = index_.find(to_lower_ascii(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string CsvHeader::get(const CsvRow& row, std::string_view name) const {
  auto idx = find(name);
  if (!idx || *idx >= row.size()) return {};
  return row[*idx];
}

std::string csv_escape(std::string_view field, char sep) {
  const bool needs_quotes = field.find_first_of(std::string{'"', '\n', '\r', sep}) != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_csv_row(std::ostream& out, const CsvRow& row, char sep) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out.put(sep);
    out << csv_escape(row[i], sep);
  }
  out.put('\n');
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
  std::string s(buf, res.ptr);
  if (s.rfind("-0.", 0) == 0 && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

}  // namespace stance

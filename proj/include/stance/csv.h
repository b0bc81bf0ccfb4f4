#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace stance {

using CsvRow = std::vector<std::string>;

// RFC 4180 reader: quoted fields may contain separators, doubled quotes and
// line breaks. CRLF and LF line endings are both accepted.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in, char sep = ',') : in_(in), sep_(sep) {}

  // Next record, or nullopt at end of input. Throws ValidationError on an
  // unterminated quoted field.
  std::optional<CsvRow> next();

  // 1-based physical line where the last returned record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  char sep_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

// Column lookup by header name.
class CsvHeader {
 public:
  CsvHeader() = default;
  explicit CsvHeader(const CsvRow& names);

  std::optional<std::size_t> find(std::string_view name) const;
  bool has(std::string_view name) const { return find(name).has_value(); }
  // Field value for `name`, or "" when the column or the field is absent.
  std::string get(const CsvRow& row, std::string_view name) const;
  const CsvRow& names() const { return names_; }

 private:
  CsvRow names_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::string csv_escape(std::string_view field, char sep = ',');
void write_csv_row(std::ostream& out, const CsvRow& row, char sep = ',');

// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);
// Fixed-point text with `digits` decimals.
std::string format_fixed(double v, int digits);

}  // namespace stance

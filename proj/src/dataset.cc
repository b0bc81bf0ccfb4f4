#include "stance/dataset.h"

#include <set>

#include "stance/csv.h"
#include "stance/errors.h"

namespace stance {

std::vector<LabeledSentence> read_labeled_csv(std::istream& in) {
  CsvReader reader(in);
  auto names = reader.next();
  if (!names) throw ValidationError("labeled CSV is empty");
  const CsvHeader header(*names);
  const std::string text_col = header.has("text") ? "text" : "sentence";
  const std::string id_col = header.has("id") ? "id" : "sentence_id";
  if (!header.has(text_col) || !header.has("label")) {
    throw ValidationError("labeled CSV needs a text (or sentence) column and a label column");
  }
  std::vector<LabeledSentence> out;
  std::set<std::string> seen;
  std::size_t row = 0;
  while (auto fields = reader.next()) {
    ++row;
    const std::string where = "labeled CSV line " + std::to_string(reader.line());
    LabeledSentence s;
    s.id = header.has(id_col) ? header.get(*fields, id_col) : "row-" + std::to_string(row);
    s.text = header.get(*fields, text_col);
    const std::string label = header.get(*fields, "label");
    if (auto named = parse_label(label)) {
      s.label = *named;
    } else if (auto raw = parse_raw_rating(label)) {
      s.label = collapse_rating(*raw);
    } else {
      throw ValidationError(where + ": unknown label '" + label + "'");
    }
    if (s.id.empty()) throw ValidationError(where + ": empty id");
    if (!seen.insert(s.id).second) throw ValidationError(where + ": duplicate id " + s.id);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace stance

#pragma once

#include <istream>
#include <vector>

#include "stance/classifier.h"

namespace stance {

// Labeled sentences from CSV. Required columns: a text column ("text" or
// "sentence") and "label", which holds a class name or a raw 1-5/A rating.
// An optional "id" (or "sentence_id") column names rows; otherwise rows are
// "row-<n>". Ambiguous rows are kept. Throws ValidationError naming the
// first bad line.
std::vector<LabeledSentence> read_labeled_csv(std::istream& in);

}  // namespace stance

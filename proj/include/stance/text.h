#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace stance {

bool is_valid_utf8(std::string_view bytes);

// Decodes UTF-8 into code points. Throws ValidationError on malformed input.
std::u32string decode_utf8(std::string_view bytes);
std::string encode_utf8(std::u32string_view cps);
void append_utf8(std::string& out, char32_t cp);

// Byte length of the UTF-8 sequence introduced by `lead`, 1 for stray bytes.
std::size_t utf8_sequence_length(unsigned char lead);

// Simple lowercase mapping for Latin, Greek and Cyrillic. Only mappings whose
// UTF-8 encodings have equal length are applied, so folding a string never
// moves byte offsets.
char32_t fold_case(char32_t cp);
std::string fold_utf8(std::string_view text);

bool is_upper(char32_t cp);
bool is_alnum(char32_t cp);
bool is_space(char32_t cp);

// UTF-8 to wchar_t (UTF-32 on this platform) for std::wregex. `offsets`, if
// given, receives the byte offset of each code point plus one trailing entry
// equal to text.size().
std::wstring to_wide(std::string_view text, std::vector<std::size_t>* offsets = nullptr);

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

}  // namespace stance

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace stance {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file, flushes it to disk and renames it over
// `path`, so readers see either the old or the new content.
void atomic_write(const std::filesystem::path& path, std::string_view content);

// Appends one chunk and fsyncs before returning.
void durable_append(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace stance

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace sslreg {

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// see either the old content or the complete new content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file_binary(const std::filesystem::path& path);

}  // namespace sslreg

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace isac {

/// Writes `content` to a sibling temp file and renames it over `path`, so
/// readers never observe a partial file. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace isac

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace scopeweaver {

/// Reads a whole file. Throws IoError.
std::string read_file(const std::filesystem::path &path);

/// Writes through a temporary sibling and renames it into place, so readers
/// never observe a partial file. Throws IoError.
void write_file_atomic(const std::filesystem::path &path, std::string_view bytes);

} // namespace scopeweaver

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace mpx {

/// Whole file as bytes; throws io error.
std::string read_file(const std::filesystem::path& path);

/// Writes via a temporary file and rename; throws io error naming `path`
/// and leaves no partial file behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace mpx

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace largepig {

/// Writes `contents` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partial file. Creates parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Reads a whole file. Throws io on failure.
std::string read_file(const std::filesystem::path& path);

}  // namespace largepig

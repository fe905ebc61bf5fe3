#pragma once

#include <filesystem>
#include <string>

namespace scene_eval::detail {

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace scene_eval::detail

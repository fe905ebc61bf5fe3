#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "scene_eval/errors.hpp"

namespace scene_eval::detail {

std::ifstream open_input(const std::filesystem::path& path,
                         std::ios::openmode mode = std::ios::in);
std::ofstream open_output(const std::filesystem::path& path,
                          std::ios::openmode mode = std::ios::out);

nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

/// Calls fn(json, line_number) for each non-blank line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const nlohmann::json&, std::size_t)>& fn);

[[noreturn]] void fail_line(const std::filesystem::path& path, std::size_t line,
                            const std::string& what);

/// Typed field access that turns nlohmann type errors into ValidationError.
template <class T>
T field(const nlohmann::json& obj, const char* key, const std::filesystem::path& path,
        std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) fail_line(path, line, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    fail_line(path, line, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace scene_eval::detail

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace marginsel::jsonl {

// Calls `on_record(line_no, object)` for every non-blank line that does not
// start with '#'. Lines that are not JSON objects raise Errc::kParseError with
// the 1-based line number.
void for_each_record(const std::filesystem::path& path,
                     const std::function<void(std::size_t, const nlohmann::json&)>& on_record);

// Required string field; Errc::kParseError when absent or not a string.
std::string string_field(const nlohmann::json& record, std::string_view key, std::size_t line_no);

// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace marginsel::jsonl

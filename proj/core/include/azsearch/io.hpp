#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace azsearch::io {

/// Throws DataError for missing/unreadable files or malformed JSON.
nlohmann::json read_json(const std::filesystem::path& path);
std::vector<nlohmann::json> read_json_lines(const std::filesystem::path& path);

/// Writes atomically enough for our purposes: creates parent directories
/// and truncates. Throws DataError on I/O failure.
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Renders a double for CSV output with enough digits to round-trip.
std::string format_double(double value);

}  // namespace azsearch::io

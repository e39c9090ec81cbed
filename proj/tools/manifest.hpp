#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace azsearch::cli {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Provenance record written next to every output.
struct RunManifest {
  std::string subcommand;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json inputs = nlohmann::json::object();
  std::vector<std::filesystem::path> outputs;
  std::uint64_t seed = 0;
  nlohmann::json extra = nlohmann::json::object();

  /// Hashes the outputs and writes the manifest to `path`.
  void write(const std::filesystem::path& path) const;
};

std::string tool_version();

}  // namespace azsearch::cli

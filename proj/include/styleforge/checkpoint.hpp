#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "styleforge/tensor.hpp"

namespace styleforge {

/// Named arrays plus a flat text manifest.
///
/// Archive layout (all integers little-endian uint32):
///   "SFCK"  version  entry_count
///   per entry: name_length  name_bytes(UTF-8)  rank  dims[rank]
///              values[prod(dims)] as little-endian IEEE-754 float32
/// The manifest sits next to the archive (same stem, ".manifest") and holds
/// one `key = value` line per entry of `manifest`.
struct Archive {
  std::map<std::string, Tensor> arrays;
  std::vector<std::pair<std::string, std::string>> manifest;

  /// Manifest value for key, or fallback when absent.
  std::string get(const std::string& key, const std::string& fallback = {}) const;
  /// Manifest value for key; throws DataError when absent.
  std::string require(const std::string& key) const;
};

inline constexpr std::uint32_t kArchiveVersion = 1;

std::filesystem::path manifest_path(const std::filesystem::path& archive);

void write_archive(const std::filesystem::path& path, const Archive& archive);
/// Reads the archive and, when present, its manifest.
Archive read_archive(const std::filesystem::path& path);

}  // namespace styleforge

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <string_view>
#include <vector>

#include "dsbmm/panel.hpp"

namespace dsbmm {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Digest over the specs and the raw D, Y, X arrays of a panel.
std::string panel_digest(const MultiLayerPanel& panel);

/// Relative path -> SHA-256 for every regular file under `dir`, sorted,
/// skipping files whose name is listed in `exclude`.
std::vector<std::pair<std::string, std::string>> file_digests(const std::filesystem::path& dir,
                                                              const std::vector<std::string>& exclude = {});
/// Digest over the sorted `path\tdigest` lines of file_digests.
std::string directory_digest(const std::filesystem::path& dir, const std::vector<std::string>& exclude = {});

}  // namespace dsbmm

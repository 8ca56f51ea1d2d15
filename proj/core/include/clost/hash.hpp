#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace clost::hash {

/// SHA-256 digest as a lowercase hex string.
std::string sha256_hex(std::string_view data);

/// Digest of a file's bytes. Throws clost::Error when unreadable.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace clost::hash

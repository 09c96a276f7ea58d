#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace crpt {

// SHA-1 of a byte string, lowercase hex.
std::string sha1_hex(std::string_view bytes);

// Git-style blob hash: sha1("blob <size>\0<content>").
std::string git_blob_sha1(std::string_view content);

// Blob hash of a file's contents; IoError if unreadable.
std::string git_blob_sha1_file(const std::string& path);

}  // namespace crpt

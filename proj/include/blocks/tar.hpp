#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace bw {

struct TarEntry {
  std::string name;  // at most 100 bytes
  std::string data;
};

/// POSIX ustar archive of regular files with fixed mode, owner and mtime 0,
/// so equal entries give equal bytes.
std::string write_tar(const std::vector<TarEntry>& entries);

/// Regular-file entries of a ustar archive, in order. Throws ValidationError
/// on bad checksums or truncation.
std::vector<TarEntry> read_tar(std::string_view archive);

}  // namespace bw

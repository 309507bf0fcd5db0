#include "blocks/tar.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>

#include "blocks/errors.hpp"

namespace bw {

namespace {

constexpr std::size_t kBlock = 512;

void put_octal(char* field, std::size_t width, unsigned long long value) {
  // width - 1 digits, NUL terminated.
  std::snprintf(field, width, "%0*llo", static_cast<int>(width - 1), value);
}

unsigned checksum(const char* header) {
  unsigned sum = 0;
  for (std::size_t i = 0; i < kBlock; ++i) {
    const bool in_field = i >= 148 && i < 156;
    sum += in_field ? ' ' : static_cast<unsigned char>(header[i]);
  }
  return sum;
}

}  // namespace

std::string write_tar(const std::vector<TarEntry>& entries) {
  std::string out;
  for (const TarEntry& e : entries) {
    if (e.name.empty() || e.name.size() > 100) {
      throw ValidationError("tar entry names must be 1 to 100 bytes");
    }
    std::array<char, kBlock> h{};
    std::memcpy(h.data(), e.name.data(), e.name.size());
    put_octal(h.data() + 100, 8, 0644);
    put_octal(h.data() + 108, 8, 0);
    put_octal(h.data() + 116, 8, 0);
    put_octal(h.data() + 124, 12, e.data.size());
    put_octal(h.data() + 136, 12, 0);
    h[156] = '0';
    std::memcpy(h.data() + 257, "ustar", 6);
    std::memcpy(h.data() + 263, "00", 2);
    std::snprintf(h.data() + 148, 8, "%06o", checksum(h.data()));
    h[155] = ' ';
    out.append(h.data(), kBlock);
    out += e.data;
    out.append((kBlock - e.data.size() % kBlock) % kBlock, '\0');
  }
  out.append(2 * kBlock, '\0');
  return out;
}

std::vector<TarEntry> read_tar(std::string_view archive) {
  std::vector<TarEntry> entries;
  std::size_t pos = 0;
  while (pos + kBlock <= archive.size()) {
    const char* h = archive.data() + pos;
    if (std::all_of(h, h + kBlock, [](char c) { return c == '\0'; })) return entries;
    const unsigned stored = static_cast<unsigned>(std::strtoul(std::string(h + 148, 8).c_str(), nullptr, 8));
    if (stored != checksum(h)) throw ValidationError("tar header checksum mismatch");
    const std::size_t size = std::strtoull(std::string(h + 124, 12).c_str(), nullptr, 8);
    pos += kBlock;
    if (archive.size() - pos < size) throw ValidationError("truncated tar entry");
    if (h[156] == '0' || h[156] == '\0') {
      entries.push_back({std::string(h, strnlen(h, 100)), std::string(archive.substr(pos, size))});
    }
    pos += (size + kBlock - 1) / kBlock * kBlock;
  }
  throw ValidationError("tar archive lacks its end marker");
}

}  // namespace bw

#include "asgnet/common.hpp"

#include <cstdio>

namespace asgnet {

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t from_hex(std::string_view s) {
  if (s.empty() || s.size() > 16) throw FormatError("invalid hex digest '" + std::string(s) + "'");
  std::uint64_t v = 0;
  for (char c : s) {
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
    else throw FormatError("invalid hex digest '" + std::string(s) + "'");
    v = (v << 4) | static_cast<std::uint64_t>(d);
  }
  return v;
}

}  // namespace asgnet

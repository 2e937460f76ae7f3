#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace asgnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data that does not match a documented format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Tensor shape disagreement inside a numeric operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An artifact was produced from different inputs than the ones supplied now.
class StaleArtifactError : public Error {
 public:
  using Error::Error;
};

/// FNV-1a, 64 bit. Used for content hashes stored in artifact headers.
class Fnv1a {
 public:
  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }
  void update_u64(std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    update(std::string_view(buf, 8));
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t v);
std::uint64_t from_hex(std::string_view s);

}  // namespace asgnet

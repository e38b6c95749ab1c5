#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace revdec {

// 64-bit FNV-1a; used for feature-schema identifiers and fingerprints.
class Fnv1a {
 public:
  Fnv1a& update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& update(double value);
  Fnv1a& update(std::uint64_t value);

  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t value);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace revdec

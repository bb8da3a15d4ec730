// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace htvgnn {

/// 64-bit FNV-1a, used as a cache key over file contents and settings.
class ContentHash {
 public:
  void update(std::span<const unsigned char> bytes) {
    for (auto b : bytes) {
      state_ ^= b;
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view text) {
    update({reinterpret_cast<const unsigned char*>(text.data()), text.size()});
  }
  void update(std::span<const double> values) {
    for (double v : values) update(std::bit_cast<std::uint64_t>(v));
  }
  void update(std::uint64_t v) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
    update(std::span<const unsigned char>(bytes, 8));
  }
  std::uint64_t value() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string ContentHash::hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 0; i < 16; ++i) out[static_cast<std::size_t>(15 - i)] = digits[(state_ >> (4 * i)) & 0xfu];
  return out;
}

}  // namespace htvgnn

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace sidelink::crypto {

using Key256 = std::array<std::uint8_t, 32>;
using Key128 = std::array<std::uint8_t, 16>;
using Nonce128 = std::array<std::uint8_t, 16>;
using Digest = std::array<std::uint8_t, 32>;

/// Keyed pseudorandom function: HMAC-SHA256.
Digest prf(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data);

/// PRF output truncated to the leading `bits` bits (1..32), returned
/// right-aligned.
std::uint32_t prf_tag(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data,
                      unsigned bits);

/// XORs `data` in place with an HMAC-SHA256 counter-mode keystream bound to
/// (key, iv). Applying it twice restores the input.
void apply_keystream(std::span<const std::uint8_t> key, std::uint64_t iv,
                     std::span<std::uint8_t> data);

std::vector<std::uint8_t> concat(std::initializer_list<std::span<const std::uint8_t>> parts);
std::span<const std::uint8_t> as_bytes(std::string_view s);

template <std::size_t N>
std::array<std::uint8_t, N> truncate(const Digest& d) {
  static_assert(N <= 32);
  std::array<std::uint8_t, N> out{};
  std::copy_n(d.begin(), N, out.begin());
  return out;
}

/// Deterministic generator of cryptographic-quality bytes: HMAC-SHA256 over
/// a 64-bit seed and a running counter. Reproducible for a fixed seed.
class SecureRandom {
 public:
  explicit SecureRandom(std::uint64_t seed, std::string_view label = "sidelink-drbg");

  void fill(std::span<std::uint8_t> out);
  std::uint32_t next_u32();
  std::uint64_t next_u64();

  template <std::size_t N>
  std::array<std::uint8_t, N> bytes() {
    std::array<std::uint8_t, N> out{};
    fill(out);
    return out;
  }

 private:
  Key256 key_{};
  std::uint64_t counter_ = 0;
};

}  // namespace sidelink::crypto

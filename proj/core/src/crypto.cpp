#include "sidelink/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <algorithm>
#include <stdexcept>

namespace sidelink::crypto {

Digest prf(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned len = 0;
  const auto* ok = HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(),
                        data.size(), out.data(), &len);
  if (ok == nullptr || len != out.size()) throw std::runtime_error("HMAC-SHA256 failed");
  return out;
}

std::uint32_t prf_tag(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data,
                      unsigned bits) {
  if (bits == 0 || bits > 32) throw std::invalid_argument("tag width must be 1..32 bits");
  const auto d = prf(key, data);
  const std::uint32_t word = (std::uint32_t{d[0]} << 24) | (std::uint32_t{d[1]} << 16) |
                             (std::uint32_t{d[2]} << 8) | std::uint32_t{d[3]};
  return bits == 32 ? word : word >> (32 - bits);
}

void apply_keystream(std::span<const std::uint8_t> key, std::uint64_t iv,
                     std::span<std::uint8_t> data) {
  std::array<std::uint8_t, 16> block_input{};
  for (int i = 0; i < 8; ++i) block_input[i] = static_cast<std::uint8_t>(iv >> (56 - 8 * i));
  std::size_t offset = 0;
  for (std::uint64_t block = 0; offset < data.size(); ++block) {
    for (int i = 0; i < 8; ++i) block_input[8 + i] = static_cast<std::uint8_t>(block >> (56 - 8 * i));
    const auto ks = prf(key, block_input);
    for (std::size_t i = 0; i < ks.size() && offset < data.size(); ++i, ++offset) data[offset] ^= ks[i];
  }
}

std::vector<std::uint8_t> concat(std::initializer_list<std::span<const std::uint8_t>> parts) {
  std::vector<std::uint8_t> out;
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

SecureRandom::SecureRandom(std::uint64_t seed, std::string_view label) {
  std::array<std::uint8_t, 8> seed_bytes{};
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<std::uint8_t>(seed >> (56 - 8 * i));
  key_ = prf(as_bytes(label), seed_bytes);
}

void SecureRandom::fill(std::span<std::uint8_t> out) {
  std::size_t offset = 0;
  while (offset < out.size()) {
    std::array<std::uint8_t, 8> ctr{};
    for (int i = 0; i < 8; ++i) ctr[i] = static_cast<std::uint8_t>(counter_ >> (56 - 8 * i));
    ++counter_;
    const auto block = prf(key_, ctr);
    const auto n = std::min(block.size(), out.size() - offset);
    std::copy_n(block.begin(), n, out.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += n;
  }
}

std::uint32_t SecureRandom::next_u32() {
  std::array<std::uint8_t, 4> b{};
  fill(b);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::uint64_t SecureRandom::next_u64() {
  return (std::uint64_t{next_u32()} << 32) | next_u32();
}

}  // namespace sidelink::crypto

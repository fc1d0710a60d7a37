#include "sidelink/bits.hpp"

#include <cstdio>

namespace sidelink {

BitString::BitString(std::vector<std::uint8_t> bytes, std::size_t bit_length)
    : bytes_(std::move(bytes)), bit_length_(bit_length) {
  if (bytes_.size() != (bit_length_ + 7) / 8) {
    throw FrameError("bit string byte count does not match bit length");
  }
  if (bit_length_ % 8 != 0) {
    const auto pad = 8 - bit_length_ % 8;
    bytes_.back() &= static_cast<std::uint8_t>(0xFFu << pad);
  }
}

BitString BitString::zeros(std::size_t bit_length) {
  return BitString(std::vector<std::uint8_t>((bit_length + 7) / 8, 0), bit_length);
}

bool BitString::bit(std::size_t index) const {
  if (index >= bit_length_) throw FrameError("bit index out of range");
  return (bytes_[index / 8] >> (7 - index % 8)) & 1u;
}

void BitString::push_bit(bool value) {
  if (bit_length_ % 8 == 0) bytes_.push_back(0);
  if (value) bytes_.back() |= static_cast<std::uint8_t>(1u << (7 - bit_length_ % 8));
  ++bit_length_;
}

void BitString::append(const BitString& other) {
  for (std::size_t i = 0; i < other.size(); ++i) push_bit(other.bit(i));
}

std::string BitString::hex() const {
  std::string out;
  out.reserve(bytes_.size() * 2 + 8);
  char buf[3];
  for (auto b : bytes_) {
    std::snprintf(buf, sizeof(buf), "%02x", b);
    out += buf;
  }
  out += '/';
  out += std::to_string(bit_length_);
  return out;
}

void BitWriter::put(std::uint64_t value, unsigned width) {
  if (width < 64 && (value >> width) != 0) {
    throw FrameError("value " + std::to_string(value) + " does not fit in " +
                     std::to_string(width) + " bits");
  }
  for (unsigned i = width; i-- > 0;) out_.push_bit((value >> i) & 1u);
}

std::uint64_t BitReader::get(unsigned width) {
  if (width > 64) throw FrameError("field wider than 64 bits");
  if (remaining() < width) throw FrameError("bit string truncated");
  std::uint64_t v = 0;
  for (unsigned i = 0; i < width; ++i) v = (v << 1) | (in_.bit(pos_++) ? 1u : 0u);
  return v;
}

BitString BitReader::get_bits(std::size_t width) {
  if (remaining() < width) throw FrameError("bit string truncated");
  BitString out;
  for (std::size_t i = 0; i < width; ++i) out.push_bit(in_.bit(pos_++));
  return out;
}

unsigned bits_for(std::uint64_t count) {
  unsigned w = 0;
  while (w < 64 && (std::uint64_t{1} << w) < count) ++w;
  return w;
}

}  // namespace sidelink

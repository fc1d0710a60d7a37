#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sidelink {

class FrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sequence of bits stored MSB-first in bytes. Trailing pad bits of the last
/// byte are always zero so that equal bit strings compare equal byte-wise.
class BitString {
 public:
  BitString() = default;
  BitString(std::vector<std::uint8_t> bytes, std::size_t bit_length);

  static BitString zeros(std::size_t bit_length);

  std::size_t size() const { return bit_length_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  bool bit(std::size_t index) const;

  void push_bit(bool value);
  void append(const BitString& other);

  /// Hex dump of the backing bytes followed by the bit length, e.g. "a5f0/12".
  std::string hex() const;

  friend bool operator==(const BitString&, const BitString&) = default;

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t bit_length_ = 0;
};

class BitWriter {
 public:
  /// Appends the low `width` bits of `value`, most significant first.
  void put(std::uint64_t value, unsigned width);
  void put_bool(bool value) { put(value ? 1 : 0, 1); }
  void put_bits(const BitString& bits) { out_.append(bits); }

  const BitString& bits() const { return out_; }
  BitString take() { return std::move(out_); }

 private:
  BitString out_;
};

class BitReader {
 public:
  explicit BitReader(const BitString& in) : in_(in) {}

  std::uint64_t get(unsigned width);
  bool get_bool() { return get(1) != 0; }
  BitString get_bits(std::size_t width);

  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  const BitString& in_;
  std::size_t pos_ = 0;
};

/// Smallest w such that 2^w >= count; 0 for count <= 1.
unsigned bits_for(std::uint64_t count);

}  // namespace sidelink

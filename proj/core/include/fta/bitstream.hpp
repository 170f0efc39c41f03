#pragma once

#include <cstdint>
#include <vector>

#include "fta/errors.hpp"

namespace fta {

// LSB-first bit packing: the first value written occupies the low bits of the
// first byte.

class BitWriter {
 public:
  void put(uint32_t value, int bits) {
    for (int i = 0; i < bits; ++i) {
      if (bit_ == 0) bytes_.push_back(0);
      if ((value >> i) & 1u) bytes_.back() |= static_cast<uint8_t>(1u << bit_);
      bit_ = (bit_ + 1) & 7;
    }
  }

  // Pad to the next byte boundary.
  void align() { bit_ = 0; }

  const std::vector<uint8_t>& bytes() const { return bytes_; }
  std::vector<uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<uint8_t> bytes_;
  int bit_ = 0;
};

class BitReader {
 public:
  BitReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}

  uint32_t get(int bits) {
    uint32_t v = 0;
    for (int i = 0; i < bits; ++i) {
      const size_t byte = pos_ >> 3;
      require(byte < size_, "bitstream: read past end");
      if ((data_[byte] >> (pos_ & 7)) & 1u) v |= 1u << i;
      ++pos_;
    }
    return v;
  }

  void align() { pos_ = (pos_ + 7) & ~static_cast<size_t>(7); }
  size_t byte_pos() const { return (pos_ + 7) >> 3; }

 private:
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
};

}  // namespace fta

#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace bcolor {

// Number of bits needed to write any value in [0, count).
inline int bits_for(uint64_t count) {
  if (count <= 1) return 0;
  return 64 - std::countl_zero(count - 1);
}

// ceil(log2 n), at least 1.
inline int ceil_log2(uint64_t n) {
  int b = bits_for(n);
  return b < 1 ? 1 : b;
}

class BitWriter {
 public:
  void clear() {
    words_.clear();
    size_ = 0;
  }

  void put(uint64_t value, int width) {
    if (width <= 0) return;
    if (width < 64) value &= (uint64_t{1} << width) - 1;
    const size_t off = size_ % 64;
    if (off == 0) words_.push_back(0);
    words_.back() |= value << off;
    if (off + width > 64) words_.push_back(value >> (64 - off));
    size_ += width;
  }

  void put_bit(bool b) { put(b ? 1 : 0, 1); }

  size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  const std::vector<uint64_t>& words() const { return words_; }

 private:
  std::vector<uint64_t> words_;
  size_t size_ = 0;
};

class BitReader {
 public:
  BitReader() = default;
  BitReader(const uint64_t* words, size_t size) : words_(words), size_(size) {}
  explicit BitReader(const BitWriter& w) : words_(w.words().data()), size_(w.size()) {}

  uint64_t get(int width) {
    if (width <= 0) return 0;
    if (pos_ + width > size_) throw std::out_of_range("bit reader past end of message");
    const size_t idx = pos_ / 64, off = pos_ % 64;
    uint64_t v = words_[idx] >> off;
    if (off + width > 64) v |= words_[idx + 1] << (64 - off);
    if (width < 64) v &= (uint64_t{1} << width) - 1;
    pos_ += width;
    return v;
  }

  bool get_bit() { return get(1) != 0; }
  size_t remaining() const { return size_ - pos_; }
  size_t size() const { return size_; }

 private:
  const uint64_t* words_ = nullptr;
  size_t size_ = 0;
  size_t pos_ = 0;
};

}  // namespace bcolor

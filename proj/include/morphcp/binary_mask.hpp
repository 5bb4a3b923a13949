#pragma once

#include <algorithm>
#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "morphcp/detail/bitrow.hpp"
#include "morphcp/error.hpp"

namespace morphcp {

struct Pixel {
  int row = 0;
  int col = 0;
  auto operator<=>(const Pixel&) const = default;
};

/// Largest accepted pixel count. Keeps every in-image distance and count
/// representable in 32-bit signed integers.
inline constexpr std::int64_t kMaxPixels = std::int64_t{1} << 30;

/// A 2-D boolean grid stored bit-packed per row.
///
/// Rows are padded to whole 64-bit words and the padding bits are always
/// zero, so equality, cardinality and the set operators work word by word.
class BinaryMask {
 public:
  using Word = detail::Word;

  BinaryMask(int width, int height) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw DataError("mask dimensions must be positive, got " + std::to_string(width) + "x" +
                      std::to_string(height));
    }
    if (static_cast<std::int64_t>(width) * height > kMaxPixels) {
      throw DataError("mask dimensions " + std::to_string(width) + "x" + std::to_string(height) +
                      " exceed the supported pixel count");
    }
    words_per_row_ = (static_cast<std::size_t>(width) + detail::kWordBits - 1) / detail::kWordBits;
    words_.assign(words_per_row_ * static_cast<std::size_t>(height), Word{0});
  }

  static BinaryMask filled(int width, int height) {
    BinaryMask m(width, height);
    std::fill(m.words_.begin(), m.words_.end(), ~Word{0});
    m.clear_padding();
    return m;
  }

  /// Nonzero bytes become set pixels. `bytes` is row-major, width*height long.
  static BinaryMask from_bytes(int width, int height, std::span<const std::uint8_t> bytes) {
    BinaryMask m(width, height);
    if (bytes.size() != m.pixel_count()) {
      throw DataError("byte buffer size does not match mask dimensions");
    }
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        if (bytes[static_cast<std::size_t>(r) * width + c] != 0) m.set(r, c);
      }
    }
    return m;
  }

  std::vector<std::uint8_t> to_bytes(std::uint8_t on = 255, std::uint8_t off = 0) const {
    std::vector<std::uint8_t> out(pixel_count(), off);
    for (int r = 0; r < height_; ++r) {
      for (int c = 0; c < width_; ++c) {
        if (test(r, c)) out[static_cast<std::size_t>(r) * width_ + c] = on;
      }
    }
    return out;
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  std::size_t words_per_row() const noexcept { return words_per_row_; }

  bool in_bounds(int r, int c) const noexcept {
    return r >= 0 && r < height_ && c >= 0 && c < width_;
  }

  bool test(int r, int c) const noexcept {
    const Word w = words_[index(r, c)];
    return ((w >> (c % detail::kWordBits)) & Word{1}) != 0;
  }
  bool test(Pixel p) const noexcept { return test(p.row, p.col); }

  /// Membership that tolerates out-of-grid coordinates.
  bool contains(Pixel p) const noexcept { return in_bounds(p.row, p.col) && test(p); }

  void set(int r, int c, bool value = true) noexcept {
    const Word bit = Word{1} << (c % detail::kWordBits);
    Word& w = words_[index(r, c)];
    w = value ? (w | bit) : (w & ~bit);
  }
  void set(Pixel p, bool value = true) noexcept { set(p.row, p.col, value); }

  std::size_t count() const noexcept {
    std::size_t n = 0;
    for (Word w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  bool any() const noexcept {
    return std::any_of(words_.begin(), words_.end(), [](Word w) { return w != 0; });
  }
  bool none() const noexcept { return !any(); }

  std::vector<Pixel> pixels() const {
    std::vector<Pixel> out;
    for (int r = 0; r < height_; ++r) {
      for (int c = 0; c < width_; ++c) {
        if (test(r, c)) out.push_back({r, c});
      }
    }
    return out;
  }

  std::span<Word> row(int r) noexcept {
    return {words_.data() + static_cast<std::size_t>(r) * words_per_row_, words_per_row_};
  }
  std::span<const Word> row(int r) const noexcept {
    return {words_.data() + static_cast<std::size_t>(r) * words_per_row_, words_per_row_};
  }

  bool same_shape(const BinaryMask& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  BinaryMask& operator|=(const BinaryMask& other) {
    require_same_shape(other, "union");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
    return *this;
  }
  BinaryMask& operator&=(const BinaryMask& other) {
    require_same_shape(other, "intersection");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= other.words_[i];
    return *this;
  }
  /// Set difference.
  BinaryMask& operator-=(const BinaryMask& other) {
    require_same_shape(other, "difference");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= ~other.words_[i];
    return *this;
  }

  friend BinaryMask operator|(BinaryMask a, const BinaryMask& b) { return a |= b; }
  friend BinaryMask operator&(BinaryMask a, const BinaryMask& b) { return a &= b; }
  friend BinaryMask operator-(BinaryMask a, const BinaryMask& b) { return a -= b; }

  BinaryMask complement() const {
    BinaryMask out = *this;
    for (Word& w : out.words_) w = ~w;
    out.clear_padding();
    return out;
  }

  /// |this ∩ other| without materializing the intersection.
  std::size_t intersection_count(const BinaryMask& other) const {
    require_same_shape(other, "intersection");
    std::size_t n = 0;
    for (std::size_t i = 0; i < words_.size(); ++i) {
      n += static_cast<std::size_t>(std::popcount(words_[i] & other.words_[i]));
    }
    return n;
  }

  bool is_subset_of(const BinaryMask& other) const {
    require_same_shape(other, "subset test");
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if ((words_[i] & ~other.words_[i]) != 0) return false;
    }
    return true;
  }

  bool operator==(const BinaryMask& other) const = default;

  /// Zeroes the bits past `width` in the last word of every row. Kernels that
  /// shift words toward higher columns call this before handing a mask back.
  void clear_padding() noexcept {
    const int tail = width_ % detail::kWordBits;
    if (tail == 0) return;
    const Word keep = (Word{1} << tail) - 1;
    for (int r = 0; r < height_; ++r) row(r)[words_per_row_ - 1] &= keep;
  }

  void require_same_shape(const BinaryMask& other, const char* what) const {
    if (!same_shape(other)) {
      throw DataError(std::string("dimension mismatch in ") + what + ": " + std::to_string(width_) +
                      "x" + std::to_string(height_) + " vs " + std::to_string(other.width_) + "x" +
                      std::to_string(other.height_));
    }
  }

 private:
  std::size_t index(int r, int c) const noexcept {
    return static_cast<std::size_t>(r) * words_per_row_ + static_cast<std::size_t>(c / detail::kWordBits);
  }

  int width_;
  int height_;
  std::size_t words_per_row_ = 0;
  std::vector<Word> words_;
};

}  // namespace morphcp

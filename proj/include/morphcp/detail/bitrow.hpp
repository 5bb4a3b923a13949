#pragma once

// Word-level kernels on bit-packed rows. Column c of a row lives in bit
// (c % 64) of word (c / 64), so "shifting up" moves pixels toward higher
// column indices. Bits pushed past the last word are dropped; callers clear
// the padding bits of the last word afterwards.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>

namespace morphcp::detail {

using Word = std::uint64_t;
inline constexpr int kWordBits = 64;

/// dst |= src moved `shift` columns toward higher indices. dst and src must not alias.
inline void or_shift_up(std::span<Word> dst, std::span<const Word> src, int shift) {
  const auto n = static_cast<std::ptrdiff_t>(src.size());
  const std::ptrdiff_t q = shift / kWordBits;
  const int b = shift % kWordBits;
  for (std::ptrdiff_t i = n - 1; i >= q; --i) {
    Word v = src[i - q] << b;
    if (b != 0 && i - q - 1 >= 0) v |= src[i - q - 1] >> (kWordBits - b);
    dst[i] |= v;
  }
}

/// dst |= src moved `shift` columns toward lower indices. dst and src must not alias.
inline void or_shift_down(std::span<Word> dst, std::span<const Word> src, int shift) {
  const auto n = static_cast<std::ptrdiff_t>(src.size());
  const std::ptrdiff_t q = shift / kWordBits;
  const int b = shift % kWordBits;
  for (std::ptrdiff_t i = 0; i + q < n; ++i) {
    Word v = src[i + q] >> b;
    if (b != 0 && i + q + 1 < n) v |= src[i + q + 1] << (kWordBits - b);
    dst[i] |= v;
  }
}

/// dst &= src moved by `dc` columns; vacated columns count as background.
inline void and_shift(std::span<Word> dst, std::span<const Word> src, int dc, std::span<Word> scratch) {
  std::fill(scratch.begin(), scratch.end(), Word{0});
  if (dc >= 0) {
    or_shift_up(scratch, src, dc);
  } else {
    or_shift_down(scratch, src, -dc);
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] &= scratch[i];
}

// acc holds x on entry; on exit acc = OR of x shifted up by 0..len-1.
// Doubling keeps this at O(words * log len).
inline void spread_up(std::span<Word> acc, int len, std::span<Word> scratch) {
  int covered = 1;
  while (covered < len) {
    const int step = std::min(covered, len - covered);
    std::copy(acc.begin(), acc.end(), scratch.begin());
    or_shift_up(acc, scratch, step);
    covered += step;
  }
}

inline void spread_down(std::span<Word> acc, int len, std::span<Word> scratch) {
  int covered = 1;
  while (covered < len) {
    const int step = std::min(covered, len - covered);
    std::copy(acc.begin(), acc.end(), scratch.begin());
    or_shift_down(acc, scratch, step);
    covered += step;
  }
}

/// dst |= OR over dc in [lo, hi] of src moved by dc columns.
/// `work` and `scratch` must each hold src.size() words.
inline void or_run(std::span<Word> dst, std::span<const Word> src, int lo, int hi,
                   std::span<Word> work, std::span<Word> scratch) {
  auto emit = [&] {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] |= work[i];
  };
  if (lo >= 0) {
    std::fill(work.begin(), work.end(), Word{0});
    or_shift_up(work, src, lo);
    spread_up(work, hi - lo + 1, scratch);
    emit();
  } else if (hi <= 0) {
    std::fill(work.begin(), work.end(), Word{0});
    or_shift_down(work, src, -hi);
    spread_down(work, hi - lo + 1, scratch);
    emit();
  } else {
    // Straddles zero: each direction is spread from the unshifted row so no
    // pixel is clipped at one border and then needed at the other.
    std::copy(src.begin(), src.end(), work.begin());
    spread_up(work, hi + 1, scratch);
    emit();
    std::copy(src.begin(), src.end(), work.begin());
    spread_down(work, -lo + 1, scratch);
    emit();
  }
}

}  // namespace morphcp::detail

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "morphcp/binary_mask.hpp"
#include "morphcp/detail/bitrow.hpp"
#include "morphcp/error.hpp"
#include "morphcp/structuring_element.hpp"

namespace morphcp {

namespace detail {

/// Dilation by an element given as horizontal runs. Output pixel (r, c) is set
/// iff some run offset (dr, dc) has (r - dr, c - dc) set in the input;
/// contributions from outside the grid are dropped.
inline BinaryMask dilate_runs(const BinaryMask& mask, std::span<const StructuringElement::Run> runs) {
  BinaryMask out(mask.width(), mask.height());
  const std::size_t words = mask.words_per_row();
  std::vector<Word> work(words), scratch(words);
  const int h = mask.height();
  for (const auto& run : runs) {
    const int first = std::max(0, -run.dr);
    const int last = std::min(h, h - run.dr);
    for (int src = first; src < last; ++src) {
      auto in = mask.row(src);
      if (std::all_of(in.begin(), in.end(), [](Word w) { return w == 0; })) continue;
      or_run(out.row(src + run.dr), in, run.lo, run.hi, work, scratch);
    }
  }
  out.clear_padding();
  return out;
}

/// Runs of the discrete ball, built directly so large radii never
/// materialize an offset list.
inline std::vector<StructuringElement::Run> ball_runs(GrowShape shape, int radius) {
  std::vector<StructuringElement::Run> runs;
  runs.reserve(2 * static_cast<std::size_t>(radius) + 1);
  const long long r2 = static_cast<long long>(radius) * radius;
  for (int dr = -radius; dr <= radius; ++dr) {
    int half = 0;
    switch (shape) {
      case GrowShape::kL1Disc: half = radius - std::abs(dr); break;
      case GrowShape::kLinfSquare: half = radius; break;
      case GrowShape::kL2Disc: {
        const long long rest = r2 - static_cast<long long>(dr) * dr;
        auto h = static_cast<long long>(std::sqrt(static_cast<double>(rest)));
        while (h * h > rest) --h;
        while ((h + 1) * (h + 1) <= rest) ++h;
        half = static_cast<int>(h);
        break;
      }
    }
    runs.push_back({dr, -half, half});
  }
  return runs;
}

}  // namespace detail

/// Single binary dilation, clipped to the image rectangle.
inline BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se) {
  if (se.is_identity()) return mask;
  return detail::dilate_runs(mask, se.runs());
}

/// λ-fold dilation; λ = 0 returns the input.
inline BinaryMask dilate_iter(const BinaryMask& mask, const StructuringElement& se, int lambda) {
  if (lambda < 0) throw ContractError("dilate_iter: lambda must be nonnegative");
  BinaryMask current = mask;
  for (int i = 0; i < lambda; ++i) {
    BinaryMask next = dilate(current, se);
    // Further iterations cannot change a fixed point.
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

/// Binary erosion; pixels outside the grid count as background.
inline BinaryMask erode(const BinaryMask& mask, const StructuringElement& se) {
  if (se.is_identity()) return mask;
  BinaryMask out = BinaryMask::filled(mask.width(), mask.height());
  const int h = mask.height();
  std::vector<detail::Word> scratch(mask.words_per_row());
  std::vector<detail::Word> zero(mask.words_per_row(), 0);
  for (int r = 0; r < h; ++r) {
    auto dst = out.row(r);
    for (const Offset& o : se.offsets()) {
      const int src = r + o.dr;
      if (src < 0 || src >= h) {
        std::fill(dst.begin(), dst.end(), detail::Word{0});
        break;
      }
      // Output (r, c) needs input (r + dr, c + dc): move the source row by -dc.
      detail::and_shift(dst, mask.row(src), -o.dc, scratch);
    }
  }
  out.clear_padding();
  return out;
}

/// Moves every pixel by (dr, dc); pixels leaving the grid are dropped.
inline BinaryMask shifted(const BinaryMask& mask, int dr, int dc) {
  return detail::dilate_runs(mask, std::vector<StructuringElement::Run>{{dr, dc, dc}});
}

// ---------------------------------------------------------------------------
// Nested families

/// C_λ = λ-fold dilation by a fixed element.
struct IteratedSE {
  StructuringElement se;
  bool operator==(const IteratedSE&) const = default;
};

/// C_λ = one dilation by the ball B(λ) of the given shape.
struct GrowingSE {
  GrowShape shape;
  bool operator==(const GrowingSE&) const = default;
};

/// C_λ = pixels whose soft score is at least 1 - λ. Realized by the conformal
/// module, which owns the soft-score maps.
struct SoftThreshold {
  bool operator==(const SoftThreshold&) const = default;
};

using NestedFamilySpec = std::variant<IteratedSE, GrowingSE, SoftThreshold>;

inline bool is_morphological(const NestedFamilySpec& spec) {
  return !std::holds_alternative<SoftThreshold>(spec);
}

inline std::string describe(const NestedFamilySpec& spec) {
  if (const auto* it = std::get_if<IteratedSE>(&spec)) {
    if (it->se == StructuringElement::cross()) return "se=cross";
    if (it->se == StructuringElement::square()) return "se=square";
    return "se=custom(" + std::to_string(it->se.size()) + " offsets)";
  }
  if (const auto* g = std::get_if<GrowingSE>(&spec)) return "grow=" + std::string(to_string(g->shape));
  return "threshold";
}

/// Metrics with an exact two-pass distance transform.
enum class Metric { kL1, kLinf };

/// The metric whose distance map thresholds to C_λ, when the family has one.
inline std::optional<Metric> distance_metric(const NestedFamilySpec& spec) {
  if (const auto* it = std::get_if<IteratedSE>(&spec)) {
    if (it->se == StructuringElement::cross()) return Metric::kL1;
    if (it->se == StructuringElement::square()) return Metric::kLinf;
    return std::nullopt;
  }
  if (const auto* g = std::get_if<GrowingSE>(&spec)) {
    if (g->shape == GrowShape::kL1Disc) return Metric::kL1;
    if (g->shape == GrowShape::kLinfSquare) return Metric::kLinf;
  }
  return std::nullopt;
}

/// Search cap for λ. Every origin-containing element with a nonzero offset on
/// each axis has saturated the image by then.
inline int lambda_cap(const BinaryMask& mask) { return mask.width() + mask.height(); }

/// C_λ(base) for a morphological family.
inline BinaryMask nested_set(const NestedFamilySpec& spec, const BinaryMask& base, int lambda) {
  if (lambda < 0) throw ContractError("nested_set: lambda must be nonnegative");
  if (const auto* it = std::get_if<IteratedSE>(&spec)) return dilate_iter(base, it->se, lambda);
  if (const auto* g = std::get_if<GrowingSE>(&spec)) {
    if (lambda == 0) return base;
    // Balls wider than the image act like the saturating ball.
    const int radius = std::min(lambda, lambda_cap(base));
    return detail::dilate_runs(base, detail::ball_runs(g->shape, radius));
  }
  throw ContractError("nested_set: the threshold family is built from soft-score maps, not masks");
}

/// Pixels added to `pred` by the prediction set, pset \ pred.
inline BinaryMask margin(const BinaryMask& pred, const BinaryMask& pset) {
  pred.require_same_shape(pset, "margin");
  if (!pred.is_subset_of(pset)) {
    throw ContractError("margin: prediction is not contained in the prediction set");
  }
  return pset - pred;
}

// ---------------------------------------------------------------------------
// Distance transforms

/// Per-pixel distance to the nearest set pixel. Pixels with no set pixel
/// anywhere carry `infinity`, which exceeds width + height.
struct DistanceMap {
  int width = 0;
  int height = 0;
  std::int32_t infinity = 0;
  std::vector<std::int32_t> values;

  std::int32_t at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
  bool finite(std::int32_t d) const { return d < infinity; }

  /// {p : distance(p) <= λ}.
  BinaryMask within(std::int64_t lambda) const {
    BinaryMask out(width, height);
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        const std::int32_t d = at(r, c);
        if (d < infinity && d <= lambda) out.set(r, c);
      }
    }
    return out;
  }
};

/// Exact L1 (city-block) or L∞ (chessboard) distance to `target` by a
/// forward and a backward raster sweep.
inline DistanceMap distance_map(const BinaryMask& target, Metric metric) {
  const int w = target.width();
  const int h = target.height();
  DistanceMap dm;
  dm.width = w;
  dm.height = h;
  dm.infinity = w + h + 1;
  const std::int32_t inf = dm.infinity;
  dm.values.assign(target.pixel_count(), inf);
  auto at = [&](int r, int c) -> std::int32_t& { return dm.values[static_cast<std::size_t>(r) * w + c]; };
  auto relax = [&](std::int32_t& d, int r, int c) {
    const std::int32_t n = at(r, c);
    if (n < inf && n + 1 < d) d = n + 1;
  };
  const bool diag = metric == Metric::kLinf;

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      std::int32_t& d = at(r, c);
      if (target.test(r, c)) {
        d = 0;
        continue;
      }
      if (r > 0) {
        relax(d, r - 1, c);
        if (diag && c > 0) relax(d, r - 1, c - 1);
        if (diag && c + 1 < w) relax(d, r - 1, c + 1);
      }
      if (c > 0) relax(d, r, c - 1);
    }
  }
  for (int r = h - 1; r >= 0; --r) {
    for (int c = w - 1; c >= 0; --c) {
      std::int32_t& d = at(r, c);
      if (d == 0) continue;
      if (r + 1 < h) {
        relax(d, r + 1, c);
        if (diag && c + 1 < w) relax(d, r + 1, c + 1);
        if (diag && c > 0) relax(d, r + 1, c - 1);
      }
      if (c + 1 < w) relax(d, r, c + 1);
    }
  }
  return dm;
}

}  // namespace morphcp

#pragma once

#include <algorithm>
#include <compare>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "morphcp/error.hpp"

namespace morphcp {

struct Offset {
  int dr = 0;
  int dc = 0;
  auto operator<=>(const Offset&) const = default;
};

/// Largest |dr| or |dc| an element may carry.
inline constexpr int kMaxElementRadius = 1 << 15;

/// Shape family used to realize a structuring element that grows with λ.
enum class GrowShape { kL1Disc, kL2Disc, kLinfSquare };

inline std::string_view to_string(GrowShape shape) {
  switch (shape) {
    case GrowShape::kL1Disc: return "l1";
    case GrowShape::kL2Disc: return "l2";
    case GrowShape::kLinfSquare: return "linf";
  }
  return "?";
}

inline std::optional<GrowShape> parse_grow_shape(std::string_view text) {
  if (text == "l1") return GrowShape::kL1Disc;
  if (text == "l2") return GrowShape::kL2Disc;
  if (text == "linf") return GrowShape::kLinfSquare;
  return std::nullopt;
}

/// A finite set of pixel offsets containing the origin.
///
/// The only element without the origin is the empty identity element
/// returned by `identity()`, whose dilation leaves a mask unchanged.
/// Offsets are kept sorted and deduplicated; they are also grouped into
/// horizontal runs per row delta, which is what the dilation kernel consumes.
class StructuringElement {
 public:
  /// A contiguous span of column deltas [lo, hi] at one row delta.
  struct Run {
    int dr;
    int lo;
    int hi;
    bool operator==(const Run&) const = default;
  };

  explicit StructuringElement(std::vector<Offset> offsets) : offsets_(std::move(offsets)) {
    if (offsets_.empty()) throw ConfigError("structuring element must not be empty");
    std::sort(offsets_.begin(), offsets_.end());
    offsets_.erase(std::unique(offsets_.begin(), offsets_.end()), offsets_.end());
    if (!std::binary_search(offsets_.begin(), offsets_.end(), Offset{0, 0})) {
      throw ConfigError("structuring element must contain the origin (0,0)");
    }
    for (const Offset& o : offsets_) {
      if (std::abs(o.dr) > kMaxElementRadius || std::abs(o.dc) > kMaxElementRadius) {
        throw ConfigError("structuring element offset (" + std::to_string(o.dr) + "," +
                          std::to_string(o.dc) + ") exceeds the maximum radius");
      }
      radius_ = std::max({radius_, std::abs(o.dr), std::abs(o.dc)});
    }
    build_runs();
  }

  static StructuringElement identity() { return StructuringElement(); }

  /// 3x3 cross, 4-connectivity.
  static StructuringElement cross() { return StructuringElement({{-1, 0}, {0, -1}, {0, 0}, {0, 1}, {1, 0}}); }

  /// 3x3 square, 8-connectivity.
  static StructuringElement square() { return ball(GrowShape::kLinfSquare, 1); }

  /// Discrete ball of the given radius in the shape's metric.
  static StructuringElement ball(GrowShape shape, int radius) {
    if (radius < 0) throw ConfigError("ball radius must be nonnegative");
    if (radius > kMaxElementRadius) throw ConfigError("ball radius exceeds the maximum radius");
    std::vector<Offset> offs;
    const long long r2 = static_cast<long long>(radius) * radius;
    for (int dr = -radius; dr <= radius; ++dr) {
      for (int dc = -radius; dc <= radius; ++dc) {
        bool inside = false;
        switch (shape) {
          case GrowShape::kL1Disc: inside = std::abs(dr) + std::abs(dc) <= radius; break;
          case GrowShape::kLinfSquare: inside = true; break;
          case GrowShape::kL2Disc:
            inside = static_cast<long long>(dr) * dr + static_cast<long long>(dc) * dc <= r2;
            break;
        }
        if (inside) offs.push_back({dr, dc});
      }
    }
    return StructuringElement(std::move(offs));
  }

  bool is_identity() const noexcept { return offsets_.empty(); }
  const std::vector<Offset>& offsets() const noexcept { return offsets_; }
  std::size_t size() const noexcept { return offsets_.size(); }
  int radius() const noexcept { return radius_; }
  const std::vector<Run>& runs() const noexcept { return runs_; }

  bool contains(Offset o) const { return std::binary_search(offsets_.begin(), offsets_.end(), o); }

  /// True when every offset of this element also belongs to `other`.
  bool is_subset_of(const StructuringElement& other) const {
    return std::includes(other.offsets_.begin(), other.offsets_.end(), offsets_.begin(), offsets_.end());
  }

  bool operator==(const StructuringElement& other) const { return offsets_ == other.offsets_; }

 private:
  StructuringElement() = default;

  void build_runs() {
    runs_.clear();
    for (const Offset& o : offsets_) {
      if (!runs_.empty() && runs_.back().dr == o.dr && runs_.back().hi + 1 == o.dc) {
        runs_.back().hi = o.dc;
      } else {
        runs_.push_back({o.dr, o.dc, o.dc});
      }
    }
  }

  std::vector<Offset> offsets_;
  std::vector<Run> runs_;
  int radius_ = 0;
};

/// B(λ): the ball of radius λ, with B(0) the empty identity element.
inline StructuringElement grow_se(GrowShape shape, int lambda) {
  if (lambda < 0) throw ConfigError("lambda must be nonnegative");
  if (lambda == 0) return StructuringElement::identity();
  return StructuringElement::ball(shape, lambda);
}

/// Parses whitespace-separated "dr dc" pairs, one per line; '#' starts a comment.
inline std::vector<Offset> parse_offsets(std::string_view text) {
  std::vector<Offset> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    Offset o;
    std::string rest;
    if (!(fields >> o.dr >> o.dc) || (fields >> rest)) {
      throw ConfigError("offsets line " + std::to_string(line_no) + ": expected two integers \"dr dc\"");
    }
    out.push_back(o);
  }
  return out;
}

}  // namespace morphcp

#pragma once

// Brute-force reference implementations. Deliberately naive: plain loops over
// pixels and offsets, no bit tricks, no distance transforms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <vector>

#include "morphcp/binary_mask.hpp"
#include "morphcp/conformal.hpp"
#include "morphcp/morphology.hpp"
#include "morphcp/structuring_element.hpp"

namespace oracle {

using morphcp::BinaryMask;
using morphcp::Offset;

inline BinaryMask dilate(const BinaryMask& m, const std::vector<Offset>& se) {
  BinaryMask out(m.width(), m.height());
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      if (!m.test(r, c)) continue;
      for (const Offset& o : se) {
        const int rr = r + o.dr, cc = c + o.dc;
        if (rr >= 0 && rr < m.height() && cc >= 0 && cc < m.width()) out.set(rr, cc);
      }
    }
  }
  return out;
}

inline BinaryMask dilate_iter(BinaryMask m, const std::vector<Offset>& se, int lambda) {
  for (int i = 0; i < lambda; ++i) m = dilate(m, se);
  return m;
}

inline BinaryMask erode(const BinaryMask& m, const std::vector<Offset>& se) {
  BinaryMask out(m.width(), m.height());
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      bool all = true;
      for (const Offset& o : se) {
        const int rr = r + o.dr, cc = c + o.dc;
        if (!(rr >= 0 && rr < m.height() && cc >= 0 && cc < m.width() && m.test(rr, cc))) all = false;
      }
      if (all) out.set(r, c);
    }
  }
  return out;
}

inline std::vector<Offset> ball(morphcp::GrowShape shape, int radius) {
  std::vector<Offset> out;
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      bool in = false;
      switch (shape) {
        case morphcp::GrowShape::kL1Disc: in = std::abs(dr) + std::abs(dc) <= radius; break;
        case morphcp::GrowShape::kL2Disc: in = dr * dr + dc * dc <= radius * radius; break;
        case morphcp::GrowShape::kLinfSquare: in = true; break;
      }
      if (in) out.push_back({dr, dc});
    }
  }
  return out;
}

/// Nested set by definition: iterated dilation, or one dilation by the ball
/// (empty ball at λ = 0 means the base itself).
inline BinaryMask nested_set(const morphcp::NestedFamilySpec& spec, const BinaryMask& base, int lambda) {
  if (const auto* it = std::get_if<morphcp::IteratedSE>(&spec)) return dilate_iter(base, it->se.offsets(), lambda);
  const auto& g = std::get<morphcp::GrowingSE>(spec);
  if (lambda == 0) return base;
  return dilate(base, ball(g.shape, lambda));
}

/// Exact nearest-set-pixel distance, O(N^2). -1 when the target is empty.
inline std::vector<int> distances(const BinaryMask& target, morphcp::Metric metric) {
  const auto set = target.pixels();
  std::vector<int> out(target.pixel_count(), -1);
  for (int r = 0; r < target.height(); ++r) {
    for (int c = 0; c < target.width(); ++c) {
      int best = std::numeric_limits<int>::max();
      for (const auto& p : set) {
        const int a = std::abs(p.row - r), b = std::abs(p.col - c);
        best = std::min(best, metric == morphcp::Metric::kL1 ? a + b : std::max(a, b));
      }
      if (!set.empty()) out[static_cast<std::size_t>(r) * target.width() + c] = best;
    }
  }
  return out;
}

inline bool meets(std::size_t covered, std::size_t total, double tau) {
  if (total == 0) return true;
  return static_cast<double>(covered) / static_cast<double>(total) >= tau;
}

/// Linear scan over λ = 0, 1, ... up to w + h; -1 for INFEASIBLE.
inline int score(const BinaryMask& truth, const BinaryMask& pred, const morphcp::NestedFamilySpec& spec, double tau) {
  const int cap = truth.width() + truth.height();
  for (int lambda = 0; lambda <= cap; ++lambda) {
    const BinaryMask set = oracle::nested_set(spec, pred, lambda);
    if (meets(truth.intersection_count(set), truth.count(), tau)) return lambda;
  }
  return -1;
}

/// Smallest λ = 1 - t over every distinct soft value t (and t = 0) whose
/// superlevel set covers a τ fraction of the truth.
inline double threshold_score(const BinaryMask& truth, const morphcp::SoftScoreMap& soft, double tau) {
  std::vector<double> candidates{0.0};
  for (float v : soft.values()) candidates.push_back(1.0 - static_cast<double>(v));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (double lambda : candidates) {
    std::size_t covered = 0;
    for (const auto& p : truth.pixels()) {
      if (1.0 - static_cast<double>(soft.at(p.row, p.col)) <= lambda) ++covered;
    }
    if (meets(covered, truth.count(), tau)) return lambda;
  }
  return 1.0;
}

/// k-th smallest with k = ceil((n+1)(1-alpha)) computed in exact rational
/// arithmetic for alpha = num/den.
inline std::size_t rank(std::size_t n, std::int64_t num, std::int64_t den) {
  const std::int64_t top = static_cast<std::int64_t>(n + 1) * (den - num);
  return static_cast<std::size_t>(std::max<std::int64_t>(1, (top + den - 1) / den));
}

}  // namespace oracle

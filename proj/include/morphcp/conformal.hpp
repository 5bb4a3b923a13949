#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "morphcp/binary_mask.hpp"
#include "morphcp/detail/parallel.hpp"
#include "morphcp/error.hpp"
#include "morphcp/morphology.hpp"

namespace morphcp {

/// Error level α in (0, 1).
class RiskLevel {
 public:
  explicit RiskLevel(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw ConfigError("alpha must lie in (0, 1), got " + std::to_string(alpha));
    }
  }
  double value() const noexcept { return alpha_; }
  double confidence() const noexcept { return 1.0 - alpha_; }
  bool operator==(const RiskLevel&) const = default;

 private:
  double alpha_;
};

/// Required covered fraction τ of the ground truth, in [0, 1].
class CoverageRatio {
 public:
  explicit CoverageRatio(double tau) : tau_(tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) {
      throw ConfigError("tau must lie in [0, 1], got " + std::to_string(tau));
    }
  }
  double value() const noexcept { return tau_; }
  bool operator==(const CoverageRatio&) const = default;

 private:
  double tau_;
};

/// Nonconformity score of a morphological family: a margin size, or
/// INFEASIBLE when no λ reaches the coverage target. INFEASIBLE orders above
/// every finite value.
class Score {
 public:
  constexpr Score() = default;

  static Score of(std::int64_t lambda) {
    if (lambda < 0 || lambda >= kInfeasible) throw ContractError("score out of range");
    return Score(static_cast<std::uint32_t>(lambda));
  }
  static constexpr Score infeasible() { return Score(kInfeasible); }

  constexpr bool is_finite() const noexcept { return raw_ != kInfeasible; }
  int value() const {
    if (!is_finite()) throw ContractError("INFEASIBLE score has no numeric value");
    return static_cast<int>(raw_);
  }

  auto operator<=>(const Score&) const = default;

  std::string to_string() const { return is_finite() ? std::to_string(raw_) : "INFEASIBLE"; }

 private:
  static constexpr std::uint32_t kInfeasible = std::numeric_limits<std::int32_t>::max();
  constexpr explicit Score(std::uint32_t raw) : raw_(raw) {}
  std::uint32_t raw_ = 0;
};

inline bool is_infeasible(const Score& s) { return !s.is_finite(); }
inline bool is_infeasible(double) { return false; }

// ---------------------------------------------------------------------------
// Coverage

/// covered / total >= τ, with an empty truth always covered. Every coverage
/// decision in the library goes through this predicate so that fast paths
/// and literal evaluations agree bit for bit.
inline bool meets_tau(std::size_t covered, std::size_t total, CoverageRatio tau) {
  if (total == 0) return true;
  return static_cast<double>(covered) / static_cast<double>(total) >= tau.value();
}

/// Smallest covered-pixel count that satisfies `meets_tau` for `total` pixels.
inline std::size_t required_count(CoverageRatio tau, std::size_t total) {
  if (total == 0) return 0;
  auto c = static_cast<std::size_t>(
      std::clamp(std::ceil(tau.value() * static_cast<double>(total)), 0.0, static_cast<double>(total)));
  while (c > 0 && meets_tau(c - 1, total, tau)) --c;
  while (c < total && !meets_tau(c, total, tau)) ++c;
  return c;
}

/// |truth ∩ pset| / |truth|; 1 for an empty truth.
inline double coverage_ratio(const BinaryMask& truth, const BinaryMask& pset) {
  const std::size_t total = truth.count();
  const std::size_t covered = truth.intersection_count(pset);
  if (total == 0) return 1.0;
  return static_cast<double>(covered) / static_cast<double>(total);
}

inline bool covers(const BinaryMask& truth, const BinaryMask& pset, CoverageRatio tau) {
  return meets_tau(truth.intersection_count(pset), truth.count(), tau);
}

/// Binary miscoverage loss, 1 iff the coverage ratio falls below τ.
inline int coverage_loss(const BinaryMask& truth, const BinaryMask& pset, CoverageRatio tau) {
  return covers(truth, pset, tau) ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Scores

/// Score read off a distance map of the prediction: the required-count-th
/// smallest distance over truth pixels.
inline Score score_by_distance(const BinaryMask& truth, const BinaryMask& pred, Metric metric,
                               CoverageRatio tau) {
  truth.require_same_shape(pred, "score");
  const std::size_t need = required_count(tau, truth.count());
  if (need == 0) return Score::of(0);
  const DistanceMap dm = distance_map(pred, metric);
  std::vector<std::int32_t> d;
  d.reserve(truth.count());
  for (int r = 0; r < truth.height(); ++r) {
    for (int c = 0; c < truth.width(); ++c) {
      if (truth.test(r, c)) d.push_back(dm.at(r, c));
    }
  }
  auto nth = d.begin() + static_cast<std::ptrdiff_t>(need - 1);
  std::nth_element(d.begin(), nth, d.end());
  return dm.finite(*nth) ? Score::of(*nth) : Score::infeasible();
}

/// Score by evaluating the family itself: step-by-step dilation for an
/// iterated element, bisection over λ for a growing one.
inline Score score_by_dilation(const BinaryMask& truth, const BinaryMask& pred, const NestedFamilySpec& spec,
                               CoverageRatio tau) {
  truth.require_same_shape(pred, "score");
  const int cap = lambda_cap(pred);
  if (const auto* it = std::get_if<IteratedSE>(&spec)) {
    BinaryMask current = pred;
    for (int lambda = 0; lambda <= cap; ++lambda) {
      if (covers(truth, current, tau)) return Score::of(lambda);
      BinaryMask next = dilate(current, it->se);
      if (next == current) break;
      current = std::move(next);
    }
    return Score::infeasible();
  }
  if (std::holds_alternative<GrowingSE>(spec)) {
    auto ok = [&](int lambda) { return covers(truth, nested_set(spec, pred, lambda), tau); };
    if (!ok(cap)) return Score::infeasible();
    int lo = 0;
    int hi = cap;
    while (lo < hi) {
      const int mid = lo + (hi - lo) / 2;
      if (ok(mid)) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    return Score::of(lo);
  }
  throw ContractError("score: the threshold family is scored with score_threshold");
}

/// Smallest λ whose prediction set covers at least a τ fraction of `truth`.
inline Score score(const BinaryMask& truth, const BinaryMask& pred, const NestedFamilySpec& spec,
                   CoverageRatio tau) {
  if (!is_morphological(spec)) throw ContractError("score: the threshold family is scored with score_threshold");
  if (auto metric = distance_metric(spec)) return score_by_distance(truth, pred, *metric, tau);
  return score_by_dilation(truth, pred, spec, tau);
}

// ---------------------------------------------------------------------------
// Conformal quantile

namespace detail {

// ⌈(n+1)(1-α)⌉. The tolerance absorbs products like 10 * (1 - 0.7) = 3.0000000000000004.
inline std::size_t conformal_rank(std::size_t n, RiskLevel alpha) {
  const double x = static_cast<double>(n + 1) * alpha.confidence();
  return static_cast<std::size_t>(std::max(1.0, std::ceil(x - 1e-9)));
}

}  // namespace detail

/// Smallest calibration size for which `quantile_rank` succeeds.
inline std::size_t min_calibration_size(RiskLevel alpha) {
  auto rank = [&](std::size_t n) { return detail::conformal_rank(n, alpha); };
  auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(1.0 / alpha.value() - 1.0 - 1e-9)));
  while (n > 1 && rank(n - 1) <= n - 1) --n;
  while (rank(n) > n) ++n;
  return n;
}

/// k = ⌈(n+1)(1-α)⌉, the ascending rank of the calibrated score.
/// Throws FeasibilityError when k exceeds n.
inline std::size_t quantile_rank(std::size_t n, RiskLevel alpha) {
  const std::size_t k = detail::conformal_rank(n, alpha);
  if (k > n) {
    std::ostringstream msg;
    msg << "calibration sample too small: the sample size must be n >= 1/alpha - 1 (alpha=" << alpha.value()
        << " needs n >= " << min_calibration_size(alpha) << ", got n=" << n << ")";
    throw FeasibilityError(msg.str());
  }
  return k;
}

/// k-th smallest score with k = ⌈(n+1)(1-α)⌉.
template <class S>
S conformal_quantile(std::vector<S> scores, RiskLevel alpha) {
  const std::size_t k = quantile_rank(scores.size(), alpha);
  auto nth = scores.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(scores.begin(), nth, scores.end());
  return *nth;
}

// ---------------------------------------------------------------------------
// Calibration

/// Everything needed to reproduce a calibration and to build prediction sets.
template <class S>
struct Calibration {
  NestedFamilySpec family;
  RiskLevel alpha;
  CoverageRatio tau;
  std::size_t n = 0;
  std::size_t k = 0;
  S lambda_hat{};
  std::vector<S> scores;  // ascending

  bool infeasible() const { return is_infeasible(lambda_hat); }
  bool operator==(const Calibration&) const = default;
};

using CalibrationResult = Calibration<Score>;
using ThresholdCalibration = Calibration<double>;

template <class S>
Calibration<S> calibrate_from_scores(std::vector<S> scores, NestedFamilySpec family, CoverageRatio tau,
                                     RiskLevel alpha) {
  const std::size_t n = scores.size();
  const std::size_t k = quantile_rank(n, alpha);
  std::sort(scores.begin(), scores.end());
  S lambda_hat = scores[k - 1];
  return Calibration<S>{std::move(family), alpha, tau, n, k, lambda_hat, std::move(scores)};
}

/// Element type of a calibration range for morphological families.
template <class P>
concept MaskPair = requires(const P& p) {
  requires std::same_as<std::remove_cvref_t<decltype(p.truth)>, BinaryMask>;
  requires std::same_as<std::remove_cvref_t<decltype(p.pred)>, BinaryMask>;
};

struct SegmentationPair {
  BinaryMask truth;
  BinaryMask pred;
};

namespace detail {

template <class Range, class Fn>
auto score_all(const Range& pairs, int jobs, Fn&& fn) {
  using Ref = decltype(*std::begin(pairs));
  using Item = decltype(fn(*std::begin(pairs)));
  // Ranges that yield temporaries (e.g. transform views) are materialized.
  constexpr bool kByRef = std::is_lvalue_reference_v<Ref>;
  using Slot = std::conditional_t<kByRef, const std::remove_cvref_t<Ref>*, std::remove_cvref_t<Ref>>;
  std::vector<Slot> items;
  for (auto&& p : pairs) {
    if constexpr (kByRef) {
      items.push_back(&p);
    } else {
      items.push_back(std::move(p));
    }
  }
  std::vector<Item> out(items.size());
  parallel_for(items.size(), jobs, [&](std::size_t i) {
    try {
      if constexpr (kByRef) {
        out[i] = fn(*items[i]);
      } else {
        out[i] = fn(items[i]);
      }
    } catch (const Error& e) {
      throw DataError("calibration pair #" + std::to_string(i) + ": " + e.what());
    }
  });
  return out;
}

}  // namespace detail

/// Scores every (truth, pred) pair and takes the conformal quantile.
template <class Range>
  requires MaskPair<std::remove_cvref_t<decltype(*std::begin(std::declval<const Range&>()))>>
CalibrationResult calibrate(const Range& pairs, const NestedFamilySpec& spec, CoverageRatio tau, RiskLevel alpha,
                            int jobs = 1) {
  if (!is_morphological(spec)) throw ContractError("calibrate: use calibrate_threshold for the threshold family");
  quantile_rank(static_cast<std::size_t>(std::distance(std::begin(pairs), std::end(pairs))), alpha);
  auto scores = detail::score_all(pairs, jobs, [&](const auto& p) { return score(p.truth, p.pred, spec, tau); });
  return calibrate_from_scores(std::move(scores), spec, tau, alpha);
}

/// A calibrated prediction set. `full_image_fallback` marks the all-ones set
/// emitted when the calibrated margin is INFEASIBLE.
struct PredictionSet {
  BinaryMask mask;
  bool full_image_fallback = false;
};

inline PredictionSet predict_set(const BinaryMask& pred, const CalibrationResult& calib) {
  if (!is_morphological(calib.family)) throw ContractError("predict_set: calibration uses the threshold family");
  if (calib.infeasible()) return {BinaryMask::filled(pred.width(), pred.height()), true};
  return {nested_set(calib.family, pred, calib.lambda_hat.value()), false};
}

// ---------------------------------------------------------------------------
// Soft-score thresholding baseline

/// Per-pixel soft scores (e.g. sigmoid outputs) in [0, 1].
class SoftScoreMap {
 public:
  SoftScoreMap(int width, int height, std::vector<float> values)
      : width_(width), height_(height), values_(std::move(values)) {
    if (width < 1 || height < 1) throw DataError("soft map dimensions must be positive");
    if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw DataError("soft map value count does not match its dimensions");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const float v = values_[i];
      if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
        throw DataError("soft map value at pixel index " + std::to_string(i) + " is outside [0, 1]");
      }
    }
  }

  /// 1 on set pixels, 0 elsewhere.
  static SoftScoreMap indicator(const BinaryMask& mask) {
    std::vector<float> v(mask.pixel_count(), 0.0f);
    for (int r = 0; r < mask.height(); ++r) {
      for (int c = 0; c < mask.width(); ++c) {
        if (mask.test(r, c)) v[static_cast<std::size_t>(r) * mask.width() + c] = 1.0f;
      }
    }
    return SoftScoreMap(mask.width(), mask.height(), std::move(v));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  float at(int r, int c) const { return values_[static_cast<std::size_t>(r) * width_ + c]; }
  const std::vector<float>& values() const noexcept { return values_; }

  bool same_shape(const BinaryMask& m) const { return m.width() == width_ && m.height() == height_; }
  void require_same_shape(const BinaryMask& m, const char* what) const {
    if (!same_shape(m)) {
      throw DataError(std::string("dimension mismatch in ") + what + ": mask " + std::to_string(m.width()) + "x" +
                      std::to_string(m.height()) + " vs soft map " + std::to_string(width_) + "x" +
                      std::to_string(height_));
    }
  }

  bool operator==(const SoftScoreMap&) const = default;

 private:
  int width_;
  int height_;
  std::vector<float> values_;
};

/// The λ coordinate of a soft value, 1 - v. Both scoring and prediction go
/// through this so a calibrated λ admits exactly the pixels it scored.
inline double threshold_lambda(float v) { return 1.0 - static_cast<double>(v); }

/// Pixels with soft value >= t.
inline BinaryMask threshold_set(const SoftScoreMap& soft, double t) {
  BinaryMask out(soft.width(), soft.height());
  for (int r = 0; r < soft.height(); ++r) {
    for (int c = 0; c < soft.width(); ++c) {
      if (static_cast<double>(soft.at(r, c)) >= t) out.set(r, c);
    }
  }
  return out;
}

/// The threshold family indexed by λ = 1 - t, which grows with λ.
inline BinaryMask threshold_family_set(const SoftScoreMap& soft, double lambda) {
  BinaryMask out(soft.width(), soft.height());
  for (int r = 0; r < soft.height(); ++r) {
    for (int c = 0; c < soft.width(); ++c) {
      if (threshold_lambda(soft.at(r, c)) <= lambda) out.set(r, c);
    }
  }
  return out;
}

/// Smallest λ = 1 - t at which the thresholded set covers a τ fraction of
/// `truth`; 0 for an empty truth.
inline double score_threshold(const BinaryMask& truth, const SoftScoreMap& soft, CoverageRatio tau) {
  soft.require_same_shape(truth, "threshold score");
  const std::size_t need = required_count(tau, truth.count());
  if (need == 0) return 0.0;
  std::vector<double> lambdas;
  lambdas.reserve(truth.count());
  for (int r = 0; r < truth.height(); ++r) {
    for (int c = 0; c < truth.width(); ++c) {
      if (truth.test(r, c)) lambdas.push_back(threshold_lambda(soft.at(r, c)));
    }
  }
  auto nth = lambdas.begin() + static_cast<std::ptrdiff_t>(need - 1);
  std::nth_element(lambdas.begin(), nth, lambdas.end());
  return *nth;
}

template <class P>
concept SoftPair = requires(const P& p) {
  requires std::same_as<std::remove_cvref_t<decltype(p.truth)>, BinaryMask>;
  requires std::same_as<std::remove_cvref_t<decltype(p.soft)>, SoftScoreMap>;
};

template <class Range>
  requires SoftPair<std::remove_cvref_t<decltype(*std::begin(std::declval<const Range&>()))>>
ThresholdCalibration calibrate_threshold(const Range& pairs, CoverageRatio tau, RiskLevel alpha, int jobs = 1) {
  quantile_rank(static_cast<std::size_t>(std::distance(std::begin(pairs), std::end(pairs))), alpha);
  auto scores = detail::score_all(pairs, jobs, [&](const auto& p) { return score_threshold(p.truth, p.soft, tau); });
  return calibrate_from_scores(std::move(scores), NestedFamilySpec{SoftThreshold{}}, tau, alpha);
}

inline BinaryMask predict_threshold_set(const SoftScoreMap& soft, const ThresholdCalibration& calib) {
  return threshold_family_set(soft, calib.lambda_hat);
}

}  // namespace morphcp

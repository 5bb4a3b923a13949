#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "morphcp/binary_mask.hpp"
#include "morphcp/conformal.hpp"
#include "morphcp/error.hpp"

namespace morphcp {

/// Fraction of test pairs whose coverage ratio reaches τ.
class CoverageTally {
 public:
  explicit CoverageTally(CoverageRatio tau) : tau_(tau) {}

  void add(std::size_t covered, std::size_t truth_size) {
    ++pairs_;
    if (meets_tau(covered, truth_size, tau_)) ++hits_;
  }

  std::size_t pairs() const noexcept { return pairs_; }
  double value() const {
    if (pairs_ == 0) throw ContractError("empirical coverage of an empty test set");
    return static_cast<double>(hits_) / static_cast<double>(pairs_);
  }

 private:
  CoverageRatio tau_;
  std::size_t pairs_ = 0;
  std::size_t hits_ = 0;
};

struct StretchResult {
  double mean = 0.0;
  std::size_t used = 0;
  std::size_t empty_predictions = 0;  // excluded: |pred| = 0 leaves the ratio undefined
};

/// Mean of |C| / |pred| over pairs with a nonempty prediction.
class StretchTally {
 public:
  void add(std::size_t set_size, std::size_t pred_size) {
    if (pred_size == 0) {
      ++empty_;
      return;
    }
    sum_ += static_cast<double>(set_size) / static_cast<double>(pred_size);
    ++used_;
  }

  StretchResult result() const {
    if (used_ == 0) throw DataError("stretch is undefined: every prediction in the test set is empty");
    return {sum_ / static_cast<double>(used_), used_, empty_};
  }

 private:
  double sum_ = 0.0;
  std::size_t used_ = 0;
  std::size_t empty_ = 0;
};

inline double empirical_coverage(std::span<const BinaryMask> truths, std::span<const BinaryMask> sets,
                                 CoverageRatio tau) {
  if (truths.size() != sets.size()) throw ContractError("empirical_coverage: truths and sets differ in length");
  if (truths.empty()) throw ContractError("empirical coverage of an empty test set");
  CoverageTally tally(tau);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    tally.add(truths[i].intersection_count(sets[i]), truths[i].count());
  }
  return tally.value();
}

inline StretchResult stretch(std::span<const BinaryMask> preds, std::span<const BinaryMask> sets) {
  if (preds.size() != sets.size()) throw ContractError("stretch: predictions and sets differ in length");
  if (preds.empty()) throw ContractError("stretch of an empty test set");
  StretchTally tally;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    preds[i].require_same_shape(sets[i], "stretch");
    tally.add(sets[i].count(), preds[i].count());
  }
  return tally.result();
}

// ---------------------------------------------------------------------------
// Runs and aggregation

struct RunMetrics {
  std::size_t run_index = 0;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  double tau = 0.0;
  std::size_t n_calibration = 0;
  std::size_t n_test = 0;
  double coverage = 0.0;
  double stretch = 0.0;
  std::size_t empty_predictions = 0;
  double lambda_hat = 0.0;  // meaningless when lambda_infeasible
  bool lambda_infeasible = false;
  bool operator==(const RunMetrics&) const = default;
};

/// Mean and sample (n - 1) standard deviation; `count` = 0 means undefined.
struct Summary {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;
  bool operator==(const Summary&) const = default;
};

inline Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

struct RunReport {
  std::string family;
  double alpha = 0.0;
  double tau = 0.0;
  std::vector<RunMetrics> runs;
  Summary coverage;
  Summary stretch;
  Summary lambda_hat;  // over runs with a finite λ̂
  std::size_t infeasible_runs = 0;
  bool operator==(const RunReport&) const = default;
};

inline RunReport aggregate(std::vector<RunMetrics> runs, std::string family) {
  if (runs.empty()) throw ContractError("aggregate: no runs");
  RunReport report;
  report.family = std::move(family);
  report.alpha = runs.front().alpha;
  report.tau = runs.front().tau;
  std::vector<double> cov, str, lam;
  for (const RunMetrics& m : runs) {
    if (m.alpha != report.alpha || m.tau != report.tau) {
      throw ContractError("aggregate: runs mix different (alpha, tau) configurations");
    }
    cov.push_back(m.coverage);
    str.push_back(m.stretch);
    if (m.lambda_infeasible) {
      ++report.infeasible_runs;
    } else {
      lam.push_back(m.lambda_hat);
    }
  }
  report.coverage = summarize(cov);
  report.stretch = summarize(str);
  report.lambda_hat = summarize(lam);
  report.runs = std::move(runs);
  return report;
}

namespace detail {

inline std::string cell(const Summary& s) {
  if (s.count == 0) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f (%.3f)", s.mean, s.stddev);
  return buf;
}

inline std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

}  // namespace detail

/// Plain-text table with columns 1-alpha, tau, Cov, phi, avg lambda; the
/// standard deviation follows each mean in parentheses.
inline std::string format_table(std::span<const RunReport> reports) {
  std::string out = detail::pad("1-alpha", 8) + detail::pad("tau", 8) + detail::pad("Cov", 17) +
                    detail::pad("phi", 17) + detail::pad("avg lambda", 19) + "\n";
  for (const RunReport& r : reports) {
    out += detail::pad(detail::fixed(1.0 - r.alpha, 3), 8);
    out += detail::pad(detail::fixed(r.tau, 3), 8);
    out += detail::pad(detail::cell(r.coverage), 17);
    out += detail::pad(detail::cell(r.stretch), 17);
    out += detail::pad(detail::cell(r.lambda_hat), 19);
    out += "\n";
  }
  return out;
}

}  // namespace morphcp

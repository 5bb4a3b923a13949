#pragma once

// Repeated split / calibrate / evaluate runs over a dataset.
//
// Scores do not depend on the split, so each image is profiled once: the
// profile answers "how many truth pixels does C_λ cover, and how large is
// C_λ" for any λ. For families with a distance transform this is a lookup
// in sorted distances; otherwise C_λ is built with `nested_set` and memoized.

#include <algorithm>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "morphcp/binary_mask.hpp"
#include "morphcp/conformal.hpp"
#include "morphcp/data.hpp"
#include "morphcp/detail/parallel.hpp"
#include "morphcp/error.hpp"
#include "morphcp/metrics.hpp"
#include "morphcp/morphology.hpp"
#include "morphcp/serialize.hpp"

namespace morphcp {

/// Counts describing C_λ for one image.
struct SetOutcome {
  std::size_t covered = 0;     // |truth ∩ C_λ|
  std::size_t truth_size = 0;  // |truth|
  std::size_t set_size = 0;    // |C_λ|
  std::size_t pred_size = 0;   // |pred|
};

class MorphologicalProfile {
 public:
  MorphologicalProfile(const BinaryMask& truth, const BinaryMask& pred, NestedFamilySpec spec)
      : truth_(truth), pred_(pred), spec_(std::move(spec)) {
    truth.require_same_shape(pred, "profile");
    if (!is_morphological(spec_)) throw ContractError("morphological profile of the threshold family");
    if (auto metric = distance_metric(spec_)) {
      const DistanceMap dm = distance_map(pred, *metric);
      infinity_ = dm.infinity;
      cumulative_.assign(static_cast<std::size_t>(dm.infinity) + 1, 0);
      for (std::int32_t d : dm.values) ++cumulative_[static_cast<std::size_t>(d)];
      for (std::size_t i = 1; i < cumulative_.size(); ++i) cumulative_[i] += cumulative_[i - 1];
      for (int r = 0; r < truth.height(); ++r) {
        for (int c = 0; c < truth.width(); ++c) {
          if (truth.test(r, c)) truth_distances_.push_back(dm.at(r, c));
        }
      }
      std::sort(truth_distances_.begin(), truth_distances_.end());
      fast_ = true;
    }
  }

  Score score(CoverageRatio tau) const {
    if (!fast_) return morphcp::score(truth_, pred_, spec_, tau);
    const std::size_t need = required_count(tau, truth_distances_.size());
    if (need == 0) return Score::of(0);
    const std::int32_t d = truth_distances_[need - 1];
    return d < infinity_ ? Score::of(d) : Score::infeasible();
  }

  SetOutcome at(const Score& lambda) const {
    SetOutcome o{0, truth_.count(), 0, pred_.count()};
    if (!lambda.is_finite()) {
      o.covered = o.truth_size;
      o.set_size = truth_.pixel_count();
      return o;
    }
    const int l = lambda.value();
    if (fast_) {
      const auto capped = static_cast<std::size_t>(std::min<std::int64_t>(l, infinity_ - 1));
      o.set_size = cumulative_[capped];
      o.covered = static_cast<std::size_t>(
          std::upper_bound(truth_distances_.begin(), truth_distances_.end(), static_cast<std::int32_t>(capped)) -
          truth_distances_.begin());
      return o;
    }
    std::lock_guard lock(mutex_);
    auto it = memo_.find(l);
    if (it == memo_.end()) {
      const BinaryMask set = nested_set(spec_, pred_, l);
      it = memo_.emplace(l, std::pair{truth_.intersection_count(set), set.count()}).first;
    }
    o.covered = it->second.first;
    o.set_size = it->second.second;
    return o;
  }

 private:
  const BinaryMask& truth_;
  const BinaryMask& pred_;
  NestedFamilySpec spec_;
  bool fast_ = false;
  std::int32_t infinity_ = 0;
  std::vector<std::size_t> cumulative_;        // cumulative_[d] = #{p : dist(p) <= d}
  std::vector<std::int32_t> truth_distances_;  // ascending
  mutable std::mutex mutex_;
  mutable std::map<int, std::pair<std::size_t, std::size_t>> memo_;
};

class ThresholdProfile {
 public:
  ThresholdProfile(const BinaryMask& truth, const BinaryMask& pred, const SoftScoreMap& soft)
      : truth_size_(truth.count()), pred_size_(pred.count()) {
    soft.require_same_shape(truth, "threshold profile");
    truth.require_same_shape(pred, "threshold profile");
    all_.reserve(truth.pixel_count());
    for (int r = 0; r < truth.height(); ++r) {
      for (int c = 0; c < truth.width(); ++c) {
        const double l = threshold_lambda(soft.at(r, c));
        all_.push_back(l);
        if (truth.test(r, c)) truth_lambdas_.push_back(l);
      }
    }
    std::sort(all_.begin(), all_.end());
    std::sort(truth_lambdas_.begin(), truth_lambdas_.end());
  }

  double score(CoverageRatio tau) const {
    const std::size_t need = required_count(tau, truth_lambdas_.size());
    return need == 0 ? 0.0 : truth_lambdas_[need - 1];
  }

  SetOutcome at(double lambda) const {
    auto upto = [lambda](const std::vector<double>& v) {
      return static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), lambda) - v.begin());
    };
    return {upto(truth_lambdas_), truth_size_, upto(all_), pred_size_};
  }

 private:
  std::size_t truth_size_;
  std::size_t pred_size_;
  std::vector<double> all_;            // ascending λ coordinate of every pixel
  std::vector<double> truth_lambdas_;  // ascending, truth pixels only
};

// ---------------------------------------------------------------------------

struct EvaluationConfig {
  NestedFamilySpec family = IteratedSE{StructuringElement::cross()};
  std::vector<double> alphas{0.1};
  std::vector<double> taus{1.0};
  SplitPlan plan;
  int jobs = 1;
};

struct EvaluationReport {
  std::string family;
  SplitPlan plan;
  std::size_t dataset_size = 0;
  std::vector<RunReport> rows;  // alpha-major, then tau
};

struct ComparisonRow {
  RunReport morphology;
  RunReport thresholding;
};

struct ComparisonReport {
  std::string family;
  SplitPlan plan;
  std::size_t dataset_size = 0;
  std::vector<ComparisonRow> rows;
};

namespace detail {

inline void check_config(std::size_t n, const EvaluationConfig& cfg) {
  cfg.plan.validate();
  if (cfg.alphas.empty() || cfg.taus.empty()) throw ConfigError("at least one alpha and one tau are required");
  for (double t : cfg.taus) CoverageRatio{t};
  const std::size_t n_cal = std::min(n, calibration_size(n, cfg.plan.calibration_fraction));
  if (n_cal == n) throw ConfigError("calibration fraction leaves no test pairs");
  for (double a : cfg.alphas) quantile_rank(n_cal, RiskLevel(a));
}

inline void require_truth(std::span<const Sample> samples) {
  for (const Sample& s : samples) {
    if (!s.truth) throw DataError("entry '" + s.id + "': evaluation needs a truth mask");
  }
}

/// One run: calibrate on the split's calibration part, score the test part.
template <class S, class Profiles>
RunMetrics run_once(const std::vector<S>& scores, const Profiles& profiles, const Split& split,
                    const NestedFamilySpec& family, CoverageRatio tau, RiskLevel alpha, std::size_t run,
                    std::uint64_t seed) {
  std::vector<S> cal;
  cal.reserve(split.calibration.size());
  for (std::size_t i : split.calibration) cal.push_back(scores[i]);
  const Calibration<S> calib = calibrate_from_scores(std::move(cal), family, tau, alpha);
  CoverageTally cov(tau);
  StretchTally str;
  for (std::size_t i : split.test) {
    const SetOutcome o = profiles[i]->at(calib.lambda_hat);
    cov.add(o.covered, o.truth_size);
    str.add(o.set_size, o.pred_size);
  }
  const StretchResult sr = str.result();
  RunMetrics m;
  m.run_index = run;
  m.seed = seed;
  m.alpha = alpha.value();
  m.tau = tau.value();
  m.n_calibration = split.calibration.size();
  m.n_test = split.test.size();
  m.coverage = cov.value();
  m.stretch = sr.mean;
  m.empty_predictions = sr.empty_predictions;
  m.lambda_infeasible = calib.infeasible();
  if constexpr (std::is_same_v<S, Score>) {
    if (!m.lambda_infeasible) m.lambda_hat = calib.lambda_hat.value();
  } else {
    m.lambda_hat = calib.lambda_hat;
  }
  return m;
}

template <class S, class Profiles>
std::vector<S> score_profiles(const Profiles& profiles, CoverageRatio tau, int jobs) {
  std::vector<S> scores(profiles.size());
  parallel_for(profiles.size(), jobs, [&](std::size_t i) { scores[i] = profiles[i]->score(tau); });
  return scores;
}

inline std::vector<std::unique_ptr<MorphologicalProfile>> morph_profiles(std::span<const Sample> samples,
                                                                          const NestedFamilySpec& family, int jobs) {
  std::vector<std::unique_ptr<MorphologicalProfile>> out(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    out[i] = std::make_unique<MorphologicalProfile>(*samples[i].truth, samples[i].pred, family);
  });
  return out;
}

inline std::vector<std::unique_ptr<ThresholdProfile>> threshold_profiles(std::span<const Sample> samples, int jobs) {
  for (const Sample& s : samples) {
    if (!s.soft) throw DataError("entry '" + s.id + "': the threshold family needs a soft map");
  }
  std::vector<std::unique_ptr<ThresholdProfile>> out(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    out[i] = std::make_unique<ThresholdProfile>(*samples[i].truth, samples[i].pred, *samples[i].soft);
  });
  return out;
}

inline std::vector<Split> plan_splits(std::size_t n, const SplitPlan& plan) {
  std::vector<Split> splits;
  for (std::size_t r = 0; r < plan.run_count; ++r) splits.push_back(split_indices(n, plan, r));
  return splits;
}

/// One RunReport per (alpha, tau), alpha-major. Scores are computed once per
/// tau and shared by every alpha and run.
template <class S, class Profiles>
std::vector<RunReport> evaluate_rows(const Profiles& profiles, const std::vector<Split>& splits,
                                     const EvaluationConfig& cfg, const NestedFamilySpec& family) {
  std::vector<std::vector<S>> scores_by_tau;
  for (double t : cfg.taus) scores_by_tau.push_back(score_profiles<S>(profiles, CoverageRatio(t), cfg.jobs));
  const std::string name = describe(family);
  std::vector<RunReport> rows;
  for (double a : cfg.alphas) {
    for (std::size_t ti = 0; ti < cfg.taus.size(); ++ti) {
      std::vector<RunMetrics> runs(splits.size());
      parallel_for(runs.size(), cfg.jobs, [&](std::size_t r) {
        runs[r] = run_once(scores_by_tau[ti], profiles, splits[r], family, CoverageRatio(cfg.taus[ti]), RiskLevel(a),
                           r, cfg.plan.seed);
      });
      rows.push_back(aggregate(std::move(runs), name));
    }
  }
  return rows;
}

}  // namespace detail

/// Runs the split / calibrate / evaluate protocol for every (alpha, tau).
inline EvaluationReport evaluate(std::span<const Sample> samples, const EvaluationConfig& cfg) {
  detail::check_config(samples.size(), cfg);
  detail::require_truth(samples);
  const auto splits = detail::plan_splits(samples.size(), cfg.plan);
  EvaluationReport report{describe(cfg.family), cfg.plan, samples.size(), {}};
  if (is_morphological(cfg.family)) {
    const auto profiles = detail::morph_profiles(samples, cfg.family, cfg.jobs);
    report.rows = detail::evaluate_rows<Score>(profiles, splits, cfg, cfg.family);
  } else {
    const auto profiles = detail::threshold_profiles(samples, cfg.jobs);
    report.rows = detail::evaluate_rows<double>(profiles, splits, cfg, cfg.family);
  }
  return report;
}

/// Morphological and threshold conformalization on identical splits.
inline ComparisonReport compare(std::span<const Sample> samples, const EvaluationConfig& cfg) {
  if (!is_morphological(cfg.family)) throw ConfigError("compare needs a morphological family to compare against");
  detail::check_config(samples.size(), cfg);
  detail::require_truth(samples);
  const auto thresh = detail::threshold_profiles(samples, cfg.jobs);
  const auto morph = detail::morph_profiles(samples, cfg.family, cfg.jobs);
  const auto splits = detail::plan_splits(samples.size(), cfg.plan);
  auto m_rows = detail::evaluate_rows<Score>(morph, splits, cfg, cfg.family);
  auto t_rows = detail::evaluate_rows<double>(thresh, splits, cfg, SoftThreshold{});
  ComparisonReport report{describe(cfg.family), cfg.plan, samples.size(), {}};
  for (std::size_t i = 0; i < m_rows.size(); ++i) report.rows.push_back({std::move(m_rows[i]), std::move(t_rows[i])});
  return report;
}

// ---------------------------------------------------------------------------
// Report documents

inline constexpr const char* kEvaluationFormat = "morphcp.evaluation";
inline constexpr const char* kComparisonFormat = "morphcp.comparison";
inline constexpr int kReportVersion = 1;

inline nlohmann::json plan_to_json(const SplitPlan& p) {
  return {{"seed", p.seed}, {"calibration_fraction", p.calibration_fraction}, {"runs", p.run_count}};
}

inline SplitPlan plan_from_json(const nlohmann::json& j) {
  return {j.at("seed").get<std::uint64_t>(), j.at("calibration_fraction").get<double>(),
          j.at("runs").get<std::size_t>()};
}

inline nlohmann::json evaluation_to_json(const EvaluationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const RunReport& row : r.rows) rows.push_back(run_report_to_json(row));
  return {{"format", kEvaluationFormat}, {"version", kReportVersion}, {"family", r.family},
          {"plan", plan_to_json(r.plan)}, {"dataset_size", r.dataset_size}, {"rows", std::move(rows)}};
}

inline EvaluationReport evaluation_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kEvaluationFormat) throw DataError("not an evaluation report");
    if (j.at("version").get<int>() != kReportVersion) throw DataError("unsupported evaluation report version");
    EvaluationReport r{j.at("family").get<std::string>(), plan_from_json(j.at("plan")),
                       j.at("dataset_size").get<std::size_t>(), {}};
    for (const auto& row : j.at("rows")) r.rows.push_back(run_report_from_json(row));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed evaluation report: ") + e.what());
  }
}

inline nlohmann::json comparison_to_json(const ComparisonReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const ComparisonRow& row : r.rows) {
    rows.push_back({{"alpha", row.morphology.alpha},
                    {"tau", row.morphology.tau},
                    {"morphology", run_report_to_json(row.morphology)},
                    {"thresholding", run_report_to_json(row.thresholding)}});
  }
  return {{"format", kComparisonFormat}, {"version", kReportVersion}, {"family", r.family},
          {"plan", plan_to_json(r.plan)}, {"dataset_size", r.dataset_size}, {"rows", std::move(rows)}};
}

/// Columns 1-alpha, tau, phi_morphology, phi_thresholding, followed by both
/// coverages.
inline std::string format_comparison(const ComparisonReport& r) {
  using detail::fixed;
  using detail::pad;
  auto mean = [](const Summary& s) { return s.count ? fixed(s.mean, 3) : std::string("n/a"); };
  std::string out = pad("1-alpha", 8) + pad("tau", 8) + pad("phi_morphology", 16) + pad("phi_thresholding", 18) +
                    pad("Cov_morphology", 16) + pad("Cov_thresholding", 18) + "\n";
  for (const ComparisonRow& row : r.rows) {
    out += pad(fixed(1.0 - row.morphology.alpha, 3), 8);
    out += pad(fixed(row.morphology.tau, 3), 8);
    out += pad(mean(row.morphology.stretch), 16);
    out += pad(mean(row.thresholding.stretch), 18);
    out += pad(mean(row.morphology.coverage), 16);
    out += pad(mean(row.thresholding.coverage), 18);
    out += "\n";
  }
  return out;
}

}  // namespace morphcp

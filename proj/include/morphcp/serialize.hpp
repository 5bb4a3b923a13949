#pragma once

// Versioned JSON documents: calibration models and run reports.

#include <algorithm>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "morphcp/conformal.hpp"
#include "morphcp/error.hpp"
#include "morphcp/metrics.hpp"
#include "morphcp/morphology.hpp"

namespace morphcp {

inline constexpr const char* kCalibrationFormat = "morphcp.calibration";
inline constexpr int kCalibrationVersion = 1;

// ---------------------------------------------------------------------------
// Family

inline nlohmann::json family_to_json(const NestedFamilySpec& spec) {
  if (const auto* it = std::get_if<IteratedSE>(&spec)) {
    nlohmann::json offsets = nlohmann::json::array();
    for (const Offset& o : it->se.offsets()) offsets.push_back({o.dr, o.dc});
    std::string element = "custom";
    if (it->se == StructuringElement::cross()) element = "cross";
    if (it->se == StructuringElement::square()) element = "square";
    return {{"kind", "iterated_se"}, {"element", element}, {"offsets", std::move(offsets)}};
  }
  if (const auto* g = std::get_if<GrowingSE>(&spec)) {
    return {{"kind", "growing_se"}, {"shape", std::string(to_string(g->shape))}};
  }
  return {{"kind", "threshold"}};
}

inline NestedFamilySpec family_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "iterated_se") {
    std::vector<Offset> offs;
    for (const auto& o : j.at("offsets")) offs.push_back({o.at(0).get<int>(), o.at(1).get<int>()});
    return IteratedSE{StructuringElement(std::move(offs))};
  }
  if (kind == "growing_se") {
    auto shape = parse_grow_shape(j.at("shape").get<std::string>());
    if (!shape) throw DataError("unknown grow shape " + j.at("shape").dump());
    return GrowingSE{*shape};
  }
  if (kind == "threshold") return SoftThreshold{};
  throw DataError("unknown family kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Calibration

namespace detail {

inline nlohmann::json score_to_json(const Score& s) {
  if (!s.is_finite()) return "INFEASIBLE";
  return s.value();
}
inline nlohmann::json score_to_json(double s) { return s; }

inline Score score_from_json(const nlohmann::json& j, Score*) {
  if (j.is_string()) {
    if (j.get<std::string>() != "INFEASIBLE") throw DataError("unknown score value " + j.dump());
    return Score::infeasible();
  }
  return Score::of(j.get<std::int64_t>());
}
inline double score_from_json(const nlohmann::json& j, double*) { return j.get<double>(); }

}  // namespace detail

/// The score multiset is stored as an ascending histogram of (score, count).
template <class S>
nlohmann::json calibration_to_json(const Calibration<S>& c) {
  nlohmann::json hist = nlohmann::json::array();
  for (std::size_t i = 0; i < c.scores.size();) {
    std::size_t j = i;
    while (j < c.scores.size() && c.scores[j] == c.scores[i]) ++j;
    hist.push_back({detail::score_to_json(c.scores[i]), j - i});
    i = j;
  }
  return {{"format", kCalibrationFormat},
          {"version", kCalibrationVersion},
          {"family", family_to_json(c.family)},
          {"alpha", c.alpha.value()},
          {"tau", c.tau.value()},
          {"n", c.n},
          {"k", c.k},
          {"lambda_hat", detail::score_to_json(c.lambda_hat)},
          {"infeasible", c.infeasible()},
          {"score_histogram", std::move(hist)}};
}

using AnyCalibration = std::variant<CalibrationResult, ThresholdCalibration>;

namespace detail {

template <class S>
Calibration<S> calibration_body(const nlohmann::json& j, NestedFamilySpec family) {
  std::vector<S> scores;
  for (const auto& bin : j.at("score_histogram")) {
    const S s = score_from_json(bin.at(0), static_cast<S*>(nullptr));
    const auto count = bin.at(1).get<std::size_t>();
    scores.insert(scores.end(), count, s);
  }
  Calibration<S> c{std::move(family),
                   RiskLevel(j.at("alpha").get<double>()),
                   CoverageRatio(j.at("tau").get<double>()),
                   j.at("n").get<std::size_t>(),
                   j.at("k").get<std::size_t>(),
                   score_from_json(j.at("lambda_hat"), static_cast<S*>(nullptr)),
                   std::move(scores)};
  if (c.scores.size() != c.n) throw DataError("score histogram does not sum to n");
  if (!std::is_sorted(c.scores.begin(), c.scores.end())) throw DataError("score histogram is not ascending");
  if (c.k != quantile_rank(c.n, c.alpha) || !(c.scores[c.k - 1] == c.lambda_hat)) {
    throw DataError("lambda_hat is inconsistent with the stored scores");
  }
  return c;
}

}  // namespace detail

inline AnyCalibration calibration_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kCalibrationFormat) throw DataError("not a calibration document");
    if (j.at("version").get<int>() != kCalibrationVersion) {
      throw DataError("unsupported calibration version " + j.at("version").dump());
    }
    NestedFamilySpec family = family_from_json(j.at("family"));
    if (is_morphological(family)) return detail::calibration_body<Score>(j, std::move(family));
    return detail::calibration_body<double>(j, std::move(family));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed calibration document: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("invalid calibration document: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Reports

namespace detail {

inline nlohmann::json summary_to_json(const Summary& s) {
  if (s.count == 0) return {{"mean", nullptr}, {"std", nullptr}, {"count", 0}};
  return {{"mean", s.mean}, {"std", s.stddev}, {"count", s.count}};
}

inline Summary summary_from_json(const nlohmann::json& j) {
  Summary s;
  s.count = j.at("count").get<std::size_t>();
  if (s.count > 0) {
    s.mean = j.at("mean").get<double>();
    s.stddev = j.at("std").get<double>();
  }
  return s;
}

}  // namespace detail

inline nlohmann::json run_metrics_to_json(const RunMetrics& m) {
  return {{"run", m.run_index},
          {"seed", m.seed},
          {"alpha", m.alpha},
          {"tau", m.tau},
          {"n_calibration", m.n_calibration},
          {"n_test", m.n_test},
          {"coverage", m.coverage},
          {"stretch", m.stretch},
          {"empty_predictions", m.empty_predictions},
          {"lambda_hat", m.lambda_infeasible ? nlohmann::json("INFEASIBLE") : nlohmann::json(m.lambda_hat)}};
}

inline RunMetrics run_metrics_from_json(const nlohmann::json& j) {
  RunMetrics m;
  m.run_index = j.at("run").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.alpha = j.at("alpha").get<double>();
  m.tau = j.at("tau").get<double>();
  m.n_calibration = j.at("n_calibration").get<std::size_t>();
  m.n_test = j.at("n_test").get<std::size_t>();
  m.coverage = j.at("coverage").get<double>();
  m.stretch = j.at("stretch").get<double>();
  m.empty_predictions = j.at("empty_predictions").get<std::size_t>();
  const auto& lam = j.at("lambda_hat");
  m.lambda_infeasible = lam.is_string();
  if (!m.lambda_infeasible) m.lambda_hat = lam.get<double>();
  return m;
}

inline nlohmann::json run_report_to_json(const RunReport& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const RunMetrics& m : r.runs) runs.push_back(run_metrics_to_json(m));
  return {{"family", r.family},
          {"alpha", r.alpha},
          {"tau", r.tau},
          {"std_denominator", "n-1"},
          {"summary",
           {{"coverage", detail::summary_to_json(r.coverage)},
            {"stretch", detail::summary_to_json(r.stretch)},
            {"lambda_hat", detail::summary_to_json(r.lambda_hat)}}},
          {"infeasible_runs", r.infeasible_runs},
          {"runs", std::move(runs)}};
}

inline RunReport run_report_from_json(const nlohmann::json& j) {
  try {
    RunReport r;
    r.family = j.at("family").get<std::string>();
    r.alpha = j.at("alpha").get<double>();
    r.tau = j.at("tau").get<double>();
    const auto& s = j.at("summary");
    r.coverage = detail::summary_from_json(s.at("coverage"));
    r.stretch = detail::summary_from_json(s.at("stretch"));
    r.lambda_hat = detail::summary_from_json(s.at("lambda_hat"));
    r.infeasible_runs = j.at("infeasible_runs").get<std::size_t>();
    for (const auto& m : j.at("runs")) r.runs.push_back(run_metrics_from_json(m));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed run report: ") + e.what());
  }
}

}  // namespace morphcp

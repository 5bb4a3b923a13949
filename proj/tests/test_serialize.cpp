#include <gtest/gtest.h>

#include "morphcp/error.hpp"
#include "morphcp/serialize.hpp"

using namespace morphcp;

TEST(Family, RoundTrip) {
  const std::vector<NestedFamilySpec> specs{IteratedSE{StructuringElement::cross()},
                                            IteratedSE{StructuringElement::square()},
                                            IteratedSE{StructuringElement({{0, 0}, {0, 2}, {-1, 1}})},
                                            GrowingSE{GrowShape::kL2Disc}, SoftThreshold{}};
  for (const auto& s : specs) EXPECT_EQ(family_from_json(family_to_json(s)), s) << describe(s);
  EXPECT_EQ(family_to_json(specs[0]).at("element"), "cross");
  EXPECT_THROW(family_from_json({{"kind", "mystery"}}), DataError);
}

TEST(Calibration, RoundTripMorphological) {
  std::vector<Score> s{Score::of(3), Score::of(0), Score::of(3), Score::infeasible(), Score::of(1),
                       Score::of(2), Score::of(2), Score::of(9), Score::of(4)};
  const auto c = calibrate_from_scores(s, IteratedSE{StructuringElement::cross()}, CoverageRatio(0.9), RiskLevel(0.2));
  const auto j = calibration_to_json(c);
  EXPECT_EQ(j.at("lambda_hat"), 9);
  EXPECT_EQ(j.at("score_histogram").size(), 7u);
  EXPECT_EQ(std::get<CalibrationResult>(calibration_from_json(j)), c);

  const auto inf = calibrate_from_scores(s, IteratedSE{StructuringElement::cross()}, CoverageRatio(1.0), RiskLevel(0.1));
  const auto ji = calibration_to_json(inf);
  EXPECT_EQ(ji.at("lambda_hat"), "INFEASIBLE");
  EXPECT_TRUE(ji.at("infeasible").get<bool>());
  EXPECT_EQ(std::get<CalibrationResult>(calibration_from_json(ji)), inf);
}

TEST(Calibration, RoundTripThreshold) {
  const std::vector<double> s{0.25, 0.5, 0.125, 0.75, 0.0, 1.0, 0.5, 0.5, 0.875};
  const auto c = calibrate_from_scores(s, SoftThreshold{}, CoverageRatio(1.0), RiskLevel(0.2));
  EXPECT_EQ(std::get<ThresholdCalibration>(calibration_from_json(calibration_to_json(c))), c);
}

TEST(Calibration, RejectsTamperedDocuments) {
  const auto c = calibrate_from_scores(std::vector<Score>(9, Score::of(2)), IteratedSE{StructuringElement::cross()},
                                       CoverageRatio(1.0), RiskLevel(0.1));
  auto j = calibration_to_json(c);
  auto bad = j;
  bad["lambda_hat"] = 5;
  EXPECT_THROW(calibration_from_json(bad), DataError);
  bad = j;
  bad["n"] = 10;
  EXPECT_THROW(calibration_from_json(bad), DataError);
  bad = j;
  bad["version"] = 7;
  EXPECT_THROW(calibration_from_json(bad), DataError);
  bad = j;
  bad["alpha"] = 1.5;
  EXPECT_THROW(calibration_from_json(bad), DataError);
  bad = j;
  bad.erase("tau");
  EXPECT_THROW(calibration_from_json(bad), DataError);
}

TEST(Reports, RunReportRoundTrip) {
  RunMetrics a;
  a.alpha = 0.1;
  a.tau = 0.99;
  a.n_calibration = 20;
  a.n_test = 20;
  a.coverage = 0.95;
  a.stretch = 1.3;
  a.lambda_hat = 4;
  RunMetrics b = a;
  b.run_index = 1;
  b.coverage = 0.85;
  b.lambda_infeasible = true;
  b.lambda_hat = 0;
  const RunReport r = aggregate({a, b}, "se=cross");
  const auto j = run_report_to_json(r);
  EXPECT_EQ(j.at("std_denominator"), "n-1");
  EXPECT_EQ(j.at("runs").at(1).at("lambda_hat"), "INFEASIBLE");
  const RunReport back = run_report_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back, r);
}

TEST(Reports, EmptyLambdaSummaryIsNull) {
  RunMetrics a;
  a.alpha = 0.1;
  a.tau = 1.0;
  a.lambda_infeasible = true;
  const RunReport r = aggregate({a}, "se=cross");
  const auto j = run_report_to_json(r);
  EXPECT_TRUE(j.at("summary").at("lambda_hat").at("mean").is_null());
  EXPECT_EQ(run_report_from_json(j), r);
}

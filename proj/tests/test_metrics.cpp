#include <gtest/gtest.h>

#include "generators.hpp"
#include "morphcp/error.hpp"
#include "morphcp/metrics.hpp"
#include "morphcp/morphology.hpp"

using namespace morphcp;

namespace {

BinaryMask single(int r, int c) {
  BinaryMask m(8, 8);
  m.set(r, c);
  return m;
}

}  // namespace

TEST(EmpiricalCoverage, Examples) {
  std::vector<BinaryMask> truths{single(1, 1), single(2, 2), single(3, 3), single(4, 4)};
  std::vector<BinaryMask> full(4, BinaryMask::filled(8, 8));
  EXPECT_DOUBLE_EQ(empirical_coverage(truths, full, CoverageRatio(1.0)), 1.0);
  std::vector<BinaryMask> none(4, BinaryMask(8, 8));
  EXPECT_DOUBLE_EQ(empirical_coverage(truths, none, CoverageRatio(0.0)), 1.0);
  std::vector<BinaryMask> sets{single(1, 1), single(2, 2), single(3, 3), single(0, 0)};
  EXPECT_DOUBLE_EQ(empirical_coverage(truths, sets, CoverageRatio(1.0)), 0.75);
  EXPECT_THROW(empirical_coverage(truths, std::span(sets).first(3), CoverageRatio(1.0)), ContractError);
}

TEST(Stretch, Examples) {
  std::vector<BinaryMask> preds{single(1, 1), single(5, 5)};
  EXPECT_DOUBLE_EQ(stretch(preds, preds).mean, 1.0);
  std::vector<BinaryMask> sets{dilate(preds[0], StructuringElement::cross()), preds[1]};
  EXPECT_DOUBLE_EQ(stretch(std::span(preds).first(1), std::span(sets).first(1)).mean, 5.0);

  BinaryMask p2 = single(4, 4);
  p2.set(4, 5);
  BinaryMask s1 = single(0, 0);
  s1.set(0, 1);
  BinaryMask s2 = p2;
  s2.set(5, 4);
  s2.set(5, 5);
  std::vector<BinaryMask> mp{single(0, 0), p2}, ms{s1, s2};
  EXPECT_DOUBLE_EQ(stretch(mp, ms).mean, 2.0);
}

TEST(Stretch, EmptyPredictionsAreExcludedAndCounted) {
  std::vector<BinaryMask> preds{single(1, 1), BinaryMask(8, 8)};
  std::vector<BinaryMask> sets{single(1, 1), BinaryMask::filled(8, 8)};
  const StretchResult r = stretch(preds, sets);
  EXPECT_DOUBLE_EQ(r.mean, 1.0);
  EXPECT_EQ(r.used, 1u);
  EXPECT_EQ(r.empty_predictions, 1u);
  std::vector<BinaryMask> empty{BinaryMask(8, 8)};
  EXPECT_THROW(stretch(empty, empty), DataError);
}

TEST(Stretch, AtLeastOneAndNondecreasingInLambda) {
  auto rng = gen::rng(51);
  std::vector<BinaryMask> preds;
  for (int i = 0; i < 10; ++i) preds.push_back(gen::blobs(rng, 30, 30, 2));
  double prev = 1.0;
  for (int lambda = 0; lambda < 8; ++lambda) {
    std::vector<BinaryMask> sets;
    for (const auto& p : preds) sets.push_back(dilate_iter(p, StructuringElement::cross(), lambda));
    const double s = stretch(preds, sets).mean;
    EXPECT_GE(s, prev);
    prev = s;
  }
}

TEST(Summarize, SampleStandardDeviation) {
  const std::vector<double> v{0.9, 1.0};
  const Summary s = summarize(v);
  EXPECT_DOUBLE_EQ(s.mean, 0.95);
  EXPECT_NEAR(s.stddev, std::sqrt(0.005), 1e-15);
  EXPECT_EQ(summarize(std::vector<double>{3.0}).stddev, 0.0);
  EXPECT_EQ(summarize(std::vector<double>{}).count, 0u);
}

TEST(Aggregate, Examples) {
  RunMetrics a;
  a.alpha = 0.1;
  a.tau = 1.0;
  a.coverage = 0.9;
  a.stretch = 1.5;
  a.lambda_hat = 3;
  RunMetrics b = a;
  b.run_index = 1;
  b.coverage = 1.0;
  const RunReport r = aggregate({a, b}, "se=cross");
  EXPECT_DOUBLE_EQ(r.coverage.mean, 0.95);
  EXPECT_EQ(r.stretch.stddev, 0.0);
  EXPECT_EQ(r.runs.size(), 2u);
  EXPECT_THROW(aggregate({}, "x"), ContractError);
  b.alpha = 0.2;
  EXPECT_THROW(aggregate({a, b}, "x"), ContractError);
}

TEST(Aggregate, InfeasibleRunsLeaveLambdaAverage) {
  RunMetrics a;
  a.alpha = 0.1;
  a.tau = 1.0;
  a.coverage = 1.0;
  a.stretch = 2.0;
  a.lambda_hat = 4;
  RunMetrics b = a;
  b.lambda_infeasible = true;
  b.lambda_hat = 0;
  const RunReport r = aggregate({a, b}, "se=cross");
  EXPECT_EQ(r.infeasible_runs, 1u);
  EXPECT_EQ(r.lambda_hat.count, 1u);
  EXPECT_DOUBLE_EQ(r.lambda_hat.mean, 4.0);
}

TEST(FormatTable, Columns) {
  RunMetrics a;
  a.alpha = 0.1;
  a.tau = 0.99;
  a.coverage = 0.9;
  a.stretch = 1.25;
  a.lambda_hat = 3;
  const RunReport r = aggregate({a, a}, "se=cross");
  const std::string t = format_table(std::span(&r, 1));
  for (const char* s : {"1-alpha", "tau", "Cov", "phi", "avg lambda", "0.900", "0.990", "1.250 (0.000)"}) {
    EXPECT_NE(t.find(s), std::string::npos) << s << "\n" << t;
  }
}

#include <gtest/gtest.h>

#include <cmath>

#include "generators.hpp"
#include "morphcp/conformal.hpp"
#include "morphcp/error.hpp"
#include "oracles.hpp"

using namespace morphcp;

TEST(SoftScoreMap, Validates) {
  EXPECT_THROW(SoftScoreMap(2, 2, {0.f, 0.f, 0.f}), DataError);
  EXPECT_THROW(SoftScoreMap(2, 1, {0.f, 1.5f}), DataError);
  try {
    SoftScoreMap(2, 2, {0.f, 0.f, 0.f, std::nanf("")});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
}

TEST(ThresholdSet, Examples) {
  auto rng = gen::rng(41);
  const SoftScoreMap s = gen::soft(rng, 13, 7, 10);
  EXPECT_EQ(threshold_set(s, 0.0), BinaryMask::filled(13, 7));
  EXPECT_TRUE(threshold_set(s, 1.0001).none());
  for (int i = 0; i < 20; ++i) {
    const double a = morphcp::uniform01(rng), b = morphcp::uniform01(rng);
    const double lo = std::min(a, b), hi = std::max(a, b);
    EXPECT_TRUE(threshold_set(s, hi).is_subset_of(threshold_set(s, lo)));
  }
}

TEST(ThresholdScore, Examples) {
  BinaryMask truth(4, 4);
  truth.set(1, 1);
  truth.set(2, 2);
  EXPECT_EQ(score_threshold(truth, SoftScoreMap::indicator(truth), CoverageRatio(1.0)), 0.0);
  EXPECT_EQ(score_threshold(truth, SoftScoreMap(4, 4, std::vector<float>(16, 0.f)), CoverageRatio(0.5)), 1.0);
  EXPECT_EQ(score_threshold(BinaryMask(4, 4), SoftScoreMap(4, 4, std::vector<float>(16, 0.f)), CoverageRatio(1.0)),
            0.0);
}

TEST(ThresholdScore, MatchesScanOverDistinctThresholds) {
  auto rng = gen::rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = gen::between(rng, 1, 12), h = gen::between(rng, 1, 12);
    const BinaryMask truth = gen::any_mask(rng, w, h);
    const SoftScoreMap soft = gen::soft(rng, w, h, gen::between(rng, 1, 300));
    const double tau = morphcp::uniform01(rng);
    const double s = score_threshold(truth, soft, CoverageRatio(tau));
    ASSERT_EQ(s, oracle::threshold_score(truth, soft, tau));
    ASSERT_TRUE(covers(truth, threshold_family_set(soft, s), CoverageRatio(tau)));
  }
}

TEST(ThresholdCalibrate, Examples) {
  struct P {
    BinaryMask truth;
    SoftScoreMap soft;
  };
  std::vector<P> pairs;
  for (int i = 0; i < 10; ++i) {
    BinaryMask t(3, 3);
    t.set(1, 1);
    pairs.push_back({t, SoftScoreMap::indicator(t)});
  }
  EXPECT_EQ(calibrate_threshold(pairs, CoverageRatio(1.0), RiskLevel(0.1)).lambda_hat, 0.0);

  const std::vector<float> v{0.9f, 0.1f, 0.5f, 0.3f, 0.7f, 0.2f, 0.8f, 0.4f, 0.6f};
  pairs.clear();
  for (float x : v) {
    BinaryMask t(1, 1);
    t.set(0, 0);
    pairs.push_back({t, SoftScoreMap(1, 1, {x})});
  }
  const auto c = calibrate_threshold(pairs, CoverageRatio(1.0), RiskLevel(0.2));
  EXPECT_EQ(c.k, 8u);
  EXPECT_EQ(c.lambda_hat, 1.0 - static_cast<double>(0.2f));
  EXPECT_TRUE(predict_threshold_set(SoftScoreMap(1, 1, {0.2f}), c).test(0, 0));
  EXPECT_FALSE(predict_threshold_set(SoftScoreMap(1, 1, {0.1f}), c).test(0, 0));
}

TEST(ThresholdCalibrate, SetsCoverTheirCalibrationPairs) {
  auto rng = gen::rng(43);
  struct P {
    BinaryMask truth;
    SoftScoreMap soft;
  };
  std::vector<P> pairs;
  for (int i = 0; i < 30; ++i) pairs.push_back({gen::any_mask(rng, 9, 9), gen::soft(rng, 9, 9, 50)});
  const auto c = calibrate_threshold(pairs, CoverageRatio(0.8), RiskLevel(0.1));
  std::size_t covered = 0;
  for (const auto& p : pairs) covered += covers(p.truth, predict_threshold_set(p.soft, c), CoverageRatio(0.8));
  EXPECT_GE(covered, c.k);
}

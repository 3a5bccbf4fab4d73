#include "lipgate/error.hpp"
#include "lipgate/metrics.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace lipgate;

namespace {

// Values drawn from a small alphabet so ties are common.
std::vector<double> tie_heavy(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, 5);
  std::vector<double> v(n);
  for (double& x : v) x = 0.5 * d(rng);
  return v;
}

std::vector<EvalRecord> random_records(std::size_t n, std::uint64_t seed, bool ties) {
  const auto lip = ties ? tie_heavy(n, seed) : oracle::uniform(n, seed);
  const auto err = oracle::uniform(n, seed + 1, 0.0, 0.1);
  std::vector<EvalRecord> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = {i, Label::Id, err[i], lip[i], 0.0};
  return r;
}

}  // namespace

TEST(Mae, Basics) {
  const Image a(2, {0, 0, 0, 0});
  const Image b(2, {1, 3, 0, 0});
  EXPECT_EQ(mae(a, b), 1.0);
  EXPECT_EQ(mae(b, b), 0.0);
  const auto x = oracle::uniform(256, 1), y = oracle::uniform(256, 2);
  double s = 0.0;
  for (std::size_t i = 0; i < 256; ++i) s += std::abs(x[i] - y[i]);
  EXPECT_NEAR(mae(x, y), s / 256.0, 1e-12);
  EXPECT_THROW(mae(std::span(x).first(3), y), ShapeError);
  EXPECT_THROW(mae(Image(4), Image(8)), ShapeError);
}

TEST(Ranks, AverageTies) {
  const std::vector<double> x{3, 1, 3, 2};
  EXPECT_EQ(average_ranks(x), (std::vector<double>{3.5, 1, 3.5, 2}));
}

TEST(Spearman, HandOracle) {
  const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4};
  EXPECT_EQ(spearman(x, y), 0.8);
  const std::vector<double> up{2, 5, 9, 11}, down{4, 3, 2, 1};
  EXPECT_EQ(spearman(x, up), 1.0);
  EXPECT_EQ(spearman(x, down), -1.0);
}

TEST(Spearman, MatchesBruteForce) {
  for (std::uint64_t f = 0; f < 1000; ++f) {
    const std::size_t n = 3 + f % 60;
    const bool ties = f % 2 == 0;
    const auto x = ties ? tie_heavy(n, f) : oracle::uniform(n, f);
    const auto y = ties ? tie_heavy(n, f + 7777) : oracle::normal(n, f + 7777);
    const auto rx = oracle::brute_ranks(x), ry = oracle::brute_ranks(y);
    const bool flat = std::all_of(rx.begin(), rx.end(), [&](double r) { return r == rx[0]; }) ||
                      std::all_of(ry.begin(), ry.end(), [&](double r) { return r == ry[0]; });
    if (flat) {
      EXPECT_THROW(spearman(x, y), UndefinedCorrelationError);
      continue;
    }
    EXPECT_NEAR(spearman(x, y), oracle::brute_spearman(x, y), 1e-12) << "fixture " << f;
  }
}

TEST(Spearman, MonotoneInvariance) {
  for (std::uint64_t f = 0; f < 50; ++f) {
    const auto x = oracle::normal(40, f);
    const auto y = oracle::normal(40, f + 100);
    std::vector<double> ex(x.size()), y3(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      ex[i] = std::exp(x[i]);
      y3[i] = y[i] * y[i] * y[i];
    }
    EXPECT_NEAR(spearman(x, y), spearman(ex, y3), 1e-12);
  }
}

TEST(Spearman, Errors) {
  const std::vector<double> a{1, 2, 3}, flat{2, 2, 2}, two{1, 2};
  EXPECT_THROW(spearman(a, flat), UndefinedCorrelationError);
  EXPECT_THROW(spearman(two, two), InvalidArgument);
  EXPECT_THROW(spearman(a, two), ShapeError);
}

TEST(Quantile, LinearInterpolation) {
  const std::vector<double> v{4, 1, 3, 2};
  EXPECT_EQ(quantile(v, 0.0), 1.0);
  EXPECT_EQ(quantile(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.75), 3.25);
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
  EXPECT_THROW(quantile(v, 1.5), InvalidArgument);
  EXPECT_THROW(quantile({}, 0.5), InvalidArgument);
}

TEST(Auc, Examples) {
  const std::vector<double> id{0.1, 0.4}, ood{0.35, 0.8};
  EXPECT_EQ(roc_auc(id, ood).auc, 0.75);
  const std::vector<double> low{1, 2, 3}, high{4, 5};
  EXPECT_EQ(roc_auc(low, high).auc, 1.0);
  EXPECT_EQ(roc_auc(low, low).auc, 0.5);
  const RocCurve c = roc_auc(id, ood);
  EXPECT_EQ(c.points.front().fpr, 0.0);
  EXPECT_EQ(c.points.front().tpr, 0.0);
  EXPECT_EQ(c.points.back().fpr, 1.0);
  EXPECT_EQ(c.points.back().tpr, 1.0);
}

TEST(Auc, MatchesPairCounting) {
  for (std::uint64_t f = 0; f < 1000; ++f) {
    const std::size_t ni = 1 + f % 40, no = 1 + (f * 7) % 33;
    const bool ties = f % 2 == 0;
    const auto id = ties ? tie_heavy(ni, f) : oracle::uniform(ni, f);
    const auto ood = ties ? tie_heavy(no, f + 5) : oracle::uniform(no, f + 5, 0.2, 1.2);
    const double expect = oracle::brute_auc(id, ood);
    EXPECT_NEAR(roc_auc(id, ood).auc, expect, 1e-12) << "fixture " << f;
    EXPECT_NEAR(pair_counting_auc(id, ood), expect, 1e-12);
  }
}

TEST(Auc, ComplementAndMonotoneInvariance) {
  for (std::uint64_t f = 0; f < 100; ++f) {
    const auto a = tie_heavy(20, f), b = tie_heavy(15, f + 1);
    EXPECT_EQ(roc_auc(a, b).auc + roc_auc(b, a).auc, 1.0);
    std::vector<double> ea(a.size()), eb(b.size());
    std::transform(a.begin(), a.end(), ea.begin(), [](double v) { return std::exp(3 * v) - 7; });
    std::transform(b.begin(), b.end(), eb.begin(), [](double v) { return std::exp(3 * v) - 7; });
    EXPECT_EQ(roc_auc(ea, eb).auc, roc_auc(a, b).auc);
  }
  EXPECT_THROW(roc_auc({}, std::vector<double>{1.0}), InvalidArgument);
}

TEST(Referral, FullSetAtZero) {
  const auto r = random_records(30, 1, false);
  const ReferralCurve c = referral_curve(r);
  ASSERT_EQ(c.fractions.size(), kDefaultReferralSteps);
  double lip = 0, err = 0, top = 0;
  for (const auto& e : r) {
    lip += e.lipschitz;
    err += e.mae;
    top = std::max(top, e.lipschitz);
  }
  EXPECT_NEAR(c.mean_lip[0], lip / 30, 1e-15);
  EXPECT_NEAR(c.mean_mae[0], err / 30, 1e-15);
  EXPECT_EQ(c.max_lip[0], top);
  EXPECT_EQ(c.referred[0], 0u);
  EXPECT_EQ(c.referred.back(), 29u);
}

TEST(Referral, ConstantLipschitz) {
  auto r = random_records(25, 2, false);
  for (auto& e : r) e.lipschitz = 0.7;
  const ReferralCurve c = referral_curve(r);
  for (double v : c.mean_lip) EXPECT_NEAR(v, 0.7, 1e-15);
}

TEST(Referral, RankCorrelatedHalf) {
  std::vector<EvalRecord> r;
  const auto err = oracle::uniform(40, 3);
  for (std::size_t i = 0; i < 40; ++i) r.push_back({i, Label::Id, err[i], 10 * err[i], 0});
  const ReferralCurve c = referral_curve(r, 3);
  auto sorted = err;
  std::sort(sorted.begin(), sorted.end());
  double low = 0.0;
  for (std::size_t i = 0; i < 20; ++i) low += sorted[i];
  EXPECT_EQ(c.fractions[1], 0.5);
  EXPECT_NEAR(c.mean_mae[1], low / 20.0, 1e-15);
}

TEST(Referral, MeanLipNonincreasingAndMatchesOracle) {
  for (std::uint64_t f = 0; f < 1000; ++f) {
    const auto r = random_records(1 + f % 80, f, f % 3 == 0);
    const std::size_t steps = 2 + f % 120;
    const ReferralCurve c = referral_curve(r, steps);
    for (std::size_t j = 1; j < steps; ++j) ASSERT_LE(c.mean_lip[j], c.mean_lip[j - 1]) << f;
    for (std::size_t j : {std::size_t{0}, steps / 2, steps - 1}) {
      const auto o = oracle::retain(r, c.referred[j]);
      EXPECT_NEAR(c.mean_lip[j], o.mean_lip, 1e-12);
      EXPECT_NEAR(c.mean_mae[j], o.mean_mae, 1e-12);
      EXPECT_EQ(c.max_lip[j], o.max_lip);
    }
  }
}

TEST(Referral, Errors) {
  EXPECT_THROW(referral_curve({}), InvalidArgument);
  const auto r = random_records(3, 1, false);
  EXPECT_THROW(referral_curve(r, 1), InvalidArgument);
}

TEST(Threshold, FeasibleAtFullMean) {
  for (std::uint64_t f = 0; f < 200; ++f) {
    const auto r = random_records(5 + f % 50, f, f % 2 == 0);
    const ReferralCurve c = referral_curve(r);
    const GateThreshold t = select_threshold(c, c.mean_mae[0]);
    EXPECT_EQ(t.fraction, 0.0);
    EXPECT_EQ(t.referred, 0u);
    EXPECT_EQ(t.gamma, c.max_lip[0]);
  }
}

TEST(Threshold, InfeasibleReportsMinimum) {
  const auto r = random_records(10, 4, false);
  const ReferralCurve c = referral_curve(r);
  const double lowest = *std::min_element(c.mean_mae.begin(), c.mean_mae.end());
  try {
    select_threshold(c, lowest / 2);
    FAIL() << "expected InfeasibleThresholdError";
  } catch (const InfeasibleThresholdError& e) {
    EXPECT_EQ(e.min_achievable_mae(), lowest);
  }
}

TEST(Threshold, TenRecordScan) {
  // Decreasing curve: mae rises with lipschitz.
  std::vector<EvalRecord> r;
  for (std::size_t i = 0; i < 10; ++i) r.push_back({i, Label::Id, 0.01 * (i + 1), 0.1 * (i + 1), 0});
  const ReferralCurve c = referral_curve(r, 11);
  for (double limit : {0.0551, 0.0501, 0.0401, 0.0301, 0.0151, 0.0101}) {
    const auto o = oracle::scan_threshold(r, 11, limit);
    ASSERT_TRUE(o.feasible);
    const GateThreshold t = select_threshold(c, limit);
    EXPECT_EQ(t.gamma, o.gamma);
    EXPECT_EQ(t.fraction, o.fraction);
    EXPECT_EQ(t.referred, o.referred);
  }
}

TEST(Threshold, MatchesScanOnRandomSets) {
  for (std::uint64_t f = 0; f < 1000; ++f) {
    const auto r = random_records(2 + f % 60, f + 3, f % 4 == 0);
    const std::size_t steps = 2 + f % 50;
    const ReferralCurve c = referral_curve(r, steps);
    const double limit = c.mean_mae[0] * (0.3 + 0.7 * oracle::uniform(1, f)[0]);
    const auto o = oracle::scan_threshold(r, steps, limit);
    if (!o.feasible) {
      EXPECT_THROW(select_threshold(c, limit), InfeasibleThresholdError);
      continue;
    }
    const GateThreshold t = select_threshold(c, limit);
    EXPECT_EQ(t.referred, o.referred) << f;
    EXPECT_EQ(t.gamma, o.gamma) << f;
  }
}

TEST(FpQuadrant, FilterOracle) {
  const auto r = random_records(200, 9, false);
  const auto got = fp_quadrant(r, 0.4, 0.05);
  std::vector<EvalRecord> want;
  for (const auto& e : r)
    if (e.lipschitz < 0.4 && e.mae > 0.05) want.push_back(e);
  EXPECT_EQ(got, want);
  EXPECT_TRUE(fp_quadrant(r, 0.0, 1.0).empty());
  EXPECT_EQ(kDefaultFpLipMax, 0.6);
  EXPECT_EQ(kDefaultFpMaeMin, 0.023);
}

TEST(Labels, RoundTrip) {
  EXPECT_EQ(parse_label("id"), Label::Id);
  EXPECT_EQ(parse_label(to_string(Label::Ood)), Label::Ood);
  EXPECT_THROW(parse_label("x"), FormatError);
}

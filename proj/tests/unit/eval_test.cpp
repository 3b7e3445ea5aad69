#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "../support/oracles.hpp"
#include "dcprophet/error.hpp"
#include "dcprophet/eval.hpp"

using namespace dcprophet;
using namespace dcprophet::eval;

namespace {
constexpr auto N = FailureType::Normal;
constexpr auto IR = FailureType::ImmediateReboot;
constexpr auto SR = FailureType::SlowReboot;
constexpr auto FD = FailureType::ForcibleDecommission;
}  // namespace

TEST(Confusion, Basics) {
  const std::vector<FailureType> a{N, IR, SR, FD};
  const auto diag = confusion(a, a);
  for (std::size_t p = 0; p < 4; ++p) {
    for (std::size_t q = 0; q < 4; ++q) EXPECT_EQ(diag.at(FailureType(p), FailureType(q)), p == q ? 1u : 0u);
  }
  const std::vector<FailureType> pred{N}, act{IR};
  EXPECT_EQ(confusion(pred, act).at(N, IR), 1u);
  EXPECT_EQ(confusion({}, {}).total(), 0u);
  EXPECT_THROW(confusion(pred, a), std::invalid_argument);
}

TEST(PrecisionRecall, Cases) {
  const std::vector<FailureType> a{N, IR, SR, FD};
  for (const auto c : a) {
    const auto pr = precision_recall(confusion(a, a), c);
    EXPECT_EQ(*pr.precision, 1.0);
    EXPECT_EQ(*pr.recall, 1.0);
  }
  const std::vector<FailureType> pred{N, N}, act{N, SR};
  const auto never = precision_recall(confusion(pred, act), SR);
  EXPECT_FALSE(never.precision);
  EXPECT_EQ(*never.recall, 0.0);

  ConfusionMatrix cm;
  for (int i = 0; i < 8; ++i) cm.add(IR, IR);
  cm.add(IR, N);
  cm.add(IR, N);
  cm.add(N, IR);
  cm.add(N, IR);
  const auto pr = precision_recall(cm, IR);
  EXPECT_DOUBLE_EQ(*pr.precision, 0.8);
  EXPECT_DOUBLE_EQ(*pr.recall, 0.8);
}

TEST(FBeta, Values) {
  EXPECT_EQ(f_beta(1.0, 1.0), 1.0);
  EXPECT_EQ(f_beta(0.0, 0.0), 0.0);
  for (const double v : {0.0, 0.1, 0.37, 0.5, 0.99, 1.0}) {
    for (const double beta : {0.5, 1.0, 3.0, 10.0}) EXPECT_NEAR(f_beta(v, v, beta), v, 1e-15);
  }
  const double oracle = 10.0 * 0.729 * 0.795 / (9.0 * 0.729 + 0.795);
  EXPECT_NEAR(f_beta(0.729, 0.795, 3.0), oracle, 1e-12);
  EXPECT_NEAR(f_beta(0.729, 0.795, 3.0), 0.7879, 1e-4);
  EXPECT_THROW(f_beta(0.5, 0.5, 0.0), std::invalid_argument);
  EXPECT_FALSE(f_beta(PrecisionRecall{}));
  EXPECT_EQ(*f_beta(PrecisionRecall{std::nullopt, 0.5}), 0.0);
}

TEST(Auc, Examples) {
  const std::vector<double> sep{0.1, 0.2, 0.8, 0.9};
  const std::vector<std::uint8_t> lab{0, 0, 1, 1};
  EXPECT_EQ(roc_auc(sep, lab), 1.0);
  const std::vector<double> same(4, 0.5);
  EXPECT_EQ(roc_auc(same, lab), 0.5);
  const std::vector<double> s{0.9, 0.4, 0.6, 0.7};
  const std::vector<std::uint8_t> p{1, 0, 1, 0};
  EXPECT_EQ(roc_auc(s, p), 0.75);
  const std::vector<std::uint8_t> one_class{1, 1, 1, 1};
  EXPECT_THROW(roc_auc(s, one_class), UndefinedAucError);
}

TEST(Auc, MatchesPairCountingAndSymmetries) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    const bool ties = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = ties ? static_cast<double>(rng() % 5) : std::uniform_real_distribution<double>()(rng);
      y[i] = rng() % 2;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_EQ(roc_auc(s, y), oracle::pair_count_auc(s, y));

    std::vector<double> warped(n);
    for (std::size_t i = 0; i < n; ++i) warped[i] = std::exp(3.0 * s[i]) - 7.0;
    EXPECT_EQ(roc_auc(warped, y), roc_auc(s, y));
    if (!ties) {
      std::vector<std::uint8_t> flipped(n);
      for (std::size_t i = 0; i < n; ++i) flipped[i] = 1 - y[i];
      EXPECT_NEAR(roc_auc(s, y) + roc_auc(s, flipped), 1.0, 1e-12);
    }
  }
}

TEST(Roc, CurveEndpoints) {
  const std::vector<double> s{0.9, 0.4, 0.6, 0.7};
  const std::vector<std::uint8_t> p{1, 0, 1, 0};
  const auto c = roc_curve(s, p);
  ASSERT_EQ(c.size(), 5u);
  EXPECT_EQ(c.front().fpr, 0.0);
  EXPECT_EQ(c.front().tpr, 0.0);
  EXPECT_EQ(c.back().fpr, 1.0);
  EXPECT_EQ(c.back().tpr, 1.0);
  double area = 0.0;
  for (std::size_t i = 1; i < c.size(); ++i) area += (c[i].fpr - c[i - 1].fpr) * (c[i].tpr + c[i - 1].tpr) / 2;
  EXPECT_DOUBLE_EQ(area, roc_auc(s, p));
  std::ostringstream out;
  write_roc_csv(out, c);
  EXPECT_EQ(out.str().substr(0, 18), "fpr,tpr,threshold\n");
}

TEST(Binary, PoolingEqualsDirectBinarization) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<FailureType> pred(100), act(100);
    for (std::size_t i = 0; i < 100; ++i) {
      pred[i] = FailureType(rng() % 4);
      act[i] = FailureType(rng() % 4);
    }
    const auto pooled = binary_precision_recall(confusion(pred, act));
    std::size_t tp = 0, pp = 0, ap = 0;
    for (std::size_t i = 0; i < 100; ++i) {
      tp += is_failure(pred[i]) && is_failure(act[i]);
      pp += is_failure(pred[i]);
      ap += is_failure(act[i]);
    }
    EXPECT_EQ(*pooled.precision, static_cast<double>(tp) / static_cast<double>(pp));
    EXPECT_EQ(*pooled.recall, static_cast<double>(tp) / static_cast<double>(ap));
  }
}

TEST(Report, PerfectPredictionsScoreOne) {
  const std::vector<FailureType> a{N, N, IR, SR, N, FD};
  const std::vector<double> scores{0.1, 0.2, 0.9, 0.8, 0.3, 0.7};
  const auto r = make_report(a, a, scores);
  EXPECT_EQ(*r.binary_f3, 1.0);
  EXPECT_EQ(*r.macro_f3, 1.0);
  EXPECT_EQ(*r.auc, 1.0);
  std::ostringstream kv;
  write_report_kv(kv, r);
  EXPECT_NE(kv.str().find("binary.f3=1\n"), std::string::npos);

  const std::vector<FailureType> normals{N, N};
  const auto none = make_report(normals, normals, std::vector<double>{0.1, 0.2});
  EXPECT_FALSE(none.auc);
  EXPECT_FALSE(none.macro_f3);
  std::ostringstream kv2;
  write_report_kv(kv2, none);
  EXPECT_NE(kv2.str().find("precision.FD=undefined"), std::string::npos);
}

TEST(Latency, CountsCallsAndWarmsUp) {
  std::size_t calls = 0;
  const std::vector<std::vector<double>> xs{{1.0}, {2.0}, {3.0}};
  const auto stats = measure_latency([&](std::span<const double>) { ++calls; }, xs, 10);
  EXPECT_EQ(calls, 13u);
  EXPECT_EQ(stats.calls, 10u);
  EXPECT_LE(stats.mean_ms, stats.max_ms);
  EXPECT_LE(stats.p99_ms, stats.max_ms);
  const auto single = measure_latency([](std::span<const double>) {}, xs, 1);
  EXPECT_EQ(single.mean_ms, single.max_ms);
  EXPECT_THROW(measure_latency([](std::span<const double>) {}, {}, 5), std::invalid_argument);
}

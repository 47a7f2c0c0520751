/*
 * Copyright 2026 The histpolicy Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "histpolicy/errors.h"
#include "histpolicy/metrics.h"
#include "test_util.h"

namespace histpolicy {
namespace {

using testing::brute_auroc;
using testing::brute_auroc_multiclass;
using testing::random_probs;
using testing::reference_sce;

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::vector<std::size_t> sample_labels(const Matrix& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::size_t> y(probs.rows);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    double r = u(rng), acc = 0.0;
    y[i] = probs.cols - 1;
    for (std::size_t j = 0; j < probs.cols; ++j) {
      acc += probs(i, j);
      if (r < acc) {
        y[i] = j;
        break;
      }
    }
  }
  return y;
}

TEST(AurocBinary, ConcordantPairExample) {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y = {0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(auroc_binary(s, y), 0.75);
  EXPECT_DOUBLE_EQ(brute_auroc(s, y), 0.75);
}

TEST(AurocBinary, SeparatedAndTiedEdgeCases) {
  const std::vector<int> y = {0, 1, 0, 1};
  EXPECT_EQ(auroc_binary(std::vector<double>{0.1, 0.9, 0.2, 0.8}, y), 1.0);
  EXPECT_EQ(auroc_binary(std::vector<double>{0.3, 0.3, 0.3, 0.3}, y), 0.5);
  EXPECT_THROW(auroc_binary(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}),
               UndefinedMetricError);
}

TEST(AurocBinary, MatchesPairCountingWithTies) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> level(0, 9), bit(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(60);
    std::vector<int> y(60);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = level(rng) / 10.0;
      y[i] = bit(rng);
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_NEAR(auroc_binary(s, y), brute_auroc(s, y), 1e-12);
  }
}

TEST(AurocBinary, MonotoneInvarianceAndComplement) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  std::vector<double> s(200), e(200);
  std::vector<int> y(200), flipped(200);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = normal(rng);
    e[i] = std::exp(s[i]);
    y[i] = normal(rng) + s[i] > 0 ? 1 : 0;
    flipped[i] = 1 - y[i];
  }
  EXPECT_EQ(auroc_binary(s, y), auroc_binary(e, y));
  EXPECT_NEAR(auroc_binary(s, y) + auroc_binary(s, flipped), 1.0, 1e-12);
}

TEST(AurocBinary, WeightsActLikeDuplicates) {
  const std::vector<double> s = {0.2, 0.5, 0.5, 0.9, 0.1};
  const std::vector<int> y = {0, 1, 0, 1, 1};
  const std::vector<double> w = {2, 1, 0, 3, 1};
  std::vector<double> ds;
  std::vector<int> dy;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (int r = 0; r < static_cast<int>(w[i]); ++r) {
      ds.push_back(s[i]);
      dy.push_back(y[i]);
    }
  }
  EXPECT_NEAR(*auroc_binary_weighted(s, y, w), brute_auroc(ds, dy), 1e-12);
  EXPECT_FALSE(auroc_binary_weighted(s, y, std::vector<double>{1, 0, 1, 0, 0}).has_value());
}

TEST(AurocMulticlass, MatchesOneVsRestOracle) {
  std::mt19937_64 rng(3);
  for (std::size_t k : {2u, 3u, 6u}) {
    const auto probs = random_probs(300, k, rng);
    auto y = sample_labels(probs, rng);
    EXPECT_NEAR(auroc_multiclass(probs, y), brute_auroc_multiclass(probs, y), 1e-12);
  }
}

TEST(AurocMulticlass, ReducesToBinary) {
  std::mt19937_64 rng(4);
  const auto probs = random_probs(100, 2, rng);
  const auto y = sample_labels(probs, rng);
  std::vector<int> yi(y.begin(), y.end());
  EXPECT_NEAR(auroc_multiclass(probs, y), auroc_binary(probs.column(1), yi), 1e-12);
}

TEST(AurocMulticlass, EdgeCases) {
  const std::vector<std::size_t> y = {0, 1, 2, 2, 1};
  Matrix perfect(5, 3), uniform(5, 3, 1.0 / 3.0);
  for (std::size_t i = 0; i < 5; ++i) perfect(i, y[i]) = 1.0;
  EXPECT_EQ(auroc_multiclass(perfect, y), 1.0);
  EXPECT_EQ(auroc_multiclass(uniform, y), 0.5);
  const std::vector<std::size_t> one = {2, 2, 2, 2, 2};
  EXPECT_THROW(auroc_multiclass(uniform, one), UndefinedMetricError);
}

TEST(AurocMulticlass, WeightedAverageUsesPrevalence) {
  std::mt19937_64 rng(5);
  const auto probs = random_probs(120, 3, rng);
  const auto y = sample_labels(probs, rng);
  double expected = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<int> yk(y.size());
    double count = 0;
    for (std::size_t i = 0; i < y.size(); ++i) count += (yk[i] = y[i] == k);
    expected += count / y.size() * brute_auroc(probs.column(k), yk);
  }
  EXPECT_NEAR(auroc_multiclass(probs, y, AurocAverage::kWeighted), expected, 1e-12);
}

TEST(Calibration, EceHandExample) {
  const auto probs = from_rows({{0.9, 0.1}, {0.9, 0.1}, {0.6, 0.4}});
  const std::vector<std::size_t> y = {0, 1, 0};
  EXPECT_NEAR(expected_calibration_error(probs, y), 0.4, 1e-12);
}

TEST(Calibration, PerfectPredictorsHaveZeroError) {
  const std::vector<std::size_t> y = {0, 2, 1, 2};
  Matrix onehot(4, 3);
  for (std::size_t i = 0; i < 4; ++i) onehot(i, y[i]) = 1.0;
  EXPECT_EQ(expected_calibration_error(onehot, y), 0.0);
  EXPECT_EQ(static_calibration_error(onehot, y), 0.0);
  // Confidence 0.75 with exactly three of four correct.
  const auto probs = from_rows({{0.75, 0.25}, {0.75, 0.25}, {0.75, 0.25}, {0.75, 0.25}});
  EXPECT_NEAR(expected_calibration_error(probs, std::vector<std::size_t>{0, 0, 0, 1}), 0.0, 1e-12);
}

TEST(Calibration, BinEdgesAreHalfOpen) {
  EXPECT_EQ(calibration_bin(0.0, 10), 0u);
  EXPECT_EQ(calibration_bin(0.1, 10), 0u);
  EXPECT_EQ(calibration_bin(0.1000001, 10), 1u);
  EXPECT_EQ(calibration_bin(1.0, 10), 9u);
  EXPECT_EQ(calibration_bin(0.5, 4), 1u);
}

TEST(Calibration, SceHandCase) {
  // Every probability lands in its own bin, so each column contributes the
  // mean absolute gap: (0.1 + 0.2 + 0.3 + 0.8 + 0.4 + 0.1) / 6.
  const auto probs =
      from_rows({{0.1, 0.9}, {0.2, 0.8}, {0.7, 0.3}, {0.8, 0.2}, {0.4, 0.6}, {0.9, 0.1}});
  const std::vector<std::size_t> y = {1, 1, 0, 1, 1, 0};
  EXPECT_NEAR(static_calibration_error(probs, y), 19.0 / 60.0, 1e-12);
  EXPECT_NEAR(static_calibration_error(probs, y), reference_sce(probs, y, 10), 1e-12);
}

TEST(Calibration, SceMatchesReferenceOnRandomData) {
  std::mt19937_64 rng(6);
  for (std::size_t bins : {5u, 10u, 15u}) {
    const auto probs = random_probs(250, 4, rng);
    std::uniform_int_distribution<std::size_t> lab(0, 3);
    std::vector<std::size_t> y(250);
    for (auto& v : y) v = lab(rng);
    const double sce = static_calibration_error(probs, y, bins);
    EXPECT_NEAR(sce, reference_sce(probs, y, bins), 1e-12);
    EXPECT_GE(sce, 0.0);
    EXPECT_LE(sce, 1.0);
    const double ece = expected_calibration_error(probs, y, bins);
    EXPECT_GE(ece, 0.0);
    EXPECT_LE(ece, 1.0);
  }
}

TEST(Calibration, CalibratedPredictorHasSmallSce) {
  std::mt19937_64 rng(7);
  const auto probs = random_probs(10000, 4, rng);
  const auto y = sample_labels(probs, rng);
  EXPECT_LT(static_calibration_error(probs, y), 0.02);
}

TEST(Accuracy, ArgmaxAgreement) {
  const auto probs = from_rows({{0.6, 0.4}, {0.3, 0.7}, {0.5, 0.5}});
  EXPECT_NEAR(accuracy(probs, std::vector<std::size_t>{0, 0, 0}), 2.0 / 3.0, 1e-15);
}

TEST(Confusion, CountsAgreePairs) {
  const std::vector<std::size_t> a = {0, 1, 2, 1, 0};
  const auto diag = confusion_matrix(a, a, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (i != j) {
        EXPECT_EQ(diag[i][j], 0u);
      }
    }
  }
  EXPECT_EQ(diag[1][1], 2u);
  const std::vector<std::size_t> x = {0, 1, 1, 0}, y = {1, 0, 0, 1};
  const auto anti = confusion_matrix(x, y, 2);
  EXPECT_EQ(anti[0][0] + anti[1][1], 0u);
  EXPECT_EQ(anti[0][1] + anti[1][0], 4u);
  const std::vector<std::size_t> r = {0, 0, 2, 1, 2, 2}, c = {1, 0, 2, 2, 0, 2};
  const auto m = confusion_matrix(r, c, 3);
  EXPECT_EQ(m[2][0] + m[2][1] + m[2][2], 3u);
  EXPECT_EQ(m[0][1], 1u);
}

TEST(Bootstrap, IdenticalUnitsGiveZeroWidth) {
  const std::vector<double> v(30, 0.42);
  const auto est = bootstrap_mean(v, {.replicates = 200, .seed = 1});
  EXPECT_DOUBLE_EQ(est.ci_low, 0.42);
  EXPECT_DOUBLE_EQ(est.ci_high, 0.42);
  EXPECT_DOUBLE_EQ(est.value, 0.42);
}

TEST(Bootstrap, SeedDeterminesInterval) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  std::vector<double> v(50);
  for (auto& x : v) x = normal(rng);
  const auto a = bootstrap_mean(v, {.replicates = 300, .seed = 5});
  const auto b = bootstrap_mean(v, {.replicates = 300, .seed = 5});
  const auto c = bootstrap_mean(v, {.replicates = 300, .seed = 50000});
  EXPECT_EQ(a.ci_low, b.ci_low);
  EXPECT_EQ(a.ci_high, b.ci_high);
  EXPECT_NE(a.ci_low, c.ci_low);
}

TEST(Bootstrap, MeanIntervalCoverage) {
  int covered = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::mt19937_64 rng(1000 + trial);
    std::normal_distribution<double> normal;
    std::vector<double> v(200);
    for (auto& x : v) x = normal(rng);
    const auto est = bootstrap_mean(v, {.replicates = 1000, .seed = static_cast<std::uint64_t>(trial)});
    covered += est.ci_low <= 0.0 && 0.0 <= est.ci_high;
  }
  EXPECT_GE(covered, 90);
}

TEST(Bootstrap, FrequentUndefinedReplicatesWiden) {
  // Undefined whenever unit 0 is left out, which happens about 37% of the time.
  const auto stat = [](std::span<const double> w) -> std::optional<double> {
    if (w[0] == 0.0) return std::nullopt;
    return std::accumulate(w.begin(), w.end(), 0.0);
  };
  const auto est = bootstrap_ci(40, stat, {.replicates = 400, .seed = 3});
  EXPECT_TRUE(est.widened);
  EXPECT_GT(est.n_undefined, 80u);
  EXPECT_EQ(est.n_bootstrap + est.n_undefined, 400u);
}

TEST(PatientAurocTest, MatchesRowExpansion) {
  std::mt19937_64 rng(9);
  const std::size_t patients = 25;
  const auto probs = random_probs(150, 3, rng);
  const auto y = sample_labels(probs, rng);
  std::vector<std::size_t> patient(150);
  for (std::size_t i = 0; i < 150; ++i) patient[i] = i % patients;
  const PatientAuroc fast(probs, y, patient, patients);
  const auto slow = patient_resample(probs, y, patient, patients,
                                     [](const Matrix& p, std::span<const std::size_t> l) {
                                       return auroc_multiclass(p, l);
                                     });
  std::uniform_int_distribution<int> mult(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> w(patients);
    for (auto& v : w) v = mult(rng);
    const auto a = fast(w);
    const auto b = slow(w);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      EXPECT_NEAR(*a, *b, 1e-12);
    }
  }
  const std::vector<double> ones(patients, 1.0);
  EXPECT_NEAR(*fast(ones), auroc_multiclass(probs, y), 1e-12);
}

TEST(PatientAurocTest, IntervalContainsPoint) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const auto probs = random_probs(400, 3, rng);
    const auto y = sample_labels(probs, rng);
    std::vector<std::size_t> patient(400);
    for (std::size_t i = 0; i < 400; ++i) patient[i] = i / 8;
    const PatientAuroc stat(probs, y, patient, 50);
    const auto est = bootstrap_ci(50, stat, {.replicates = 300, .seed = static_cast<std::uint64_t>(trial)});
    EXPECT_TRUE(est.contains_point());
  }
}

}  // namespace
}  // namespace histpolicy

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

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "histpolicy/errors.h"
#include "histpolicy/models.h"
#include "histpolicy/optim.h"
#include "test_util.h"

namespace histpolicy {
namespace {

StateMatrix make_matrix(const std::vector<std::vector<double>>& rows,
                        const std::vector<std::size_t>& labels, std::size_t k) {
  StateMatrix m;
  for (std::size_t c = 0; c < rows.front().size(); ++c) m.feature_names.push_back("f" + std::to_string(c));
  for (std::size_t j = 0; j < k; ++j) m.action_labels.push_back("a" + std::to_string(j));
  m.rows = rows.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.values.insert(m.values.end(), rows[i].begin(), rows[i].end());
    m.labels.push_back(labels[i]);
    m.patient.push_back(i);
    m.patient_ids.push_back("p" + std::to_string(i));
    m.stage.push_back(1);
    m.prev_action.push_back(0);
    m.severity.push_back(std::nullopt);
    m.fold.push_back(0);
  }
  return m;
}

// Gaussian features with labels drawn from a fixed softmax.
StateMatrix linear_task(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t k) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<double>> w(k, std::vector<double>(d));
  for (auto& r : w) for (auto& v : r) v = normal(rng);
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(d);
    for (auto& v : x) v = normal(rng);
    std::vector<double> s(k);
    double mx = -1e300;
    for (std::size_t j = 0; j < k; ++j) {
      s[j] = std::inner_product(x.begin(), x.end(), w[j].begin(), 0.0);
      mx = std::max(mx, s[j]);
    }
    double z = 0.0;
    for (auto& v : s) z += (v = std::exp(v - mx));
    double r = u(rng) * z, acc = 0.0;
    std::size_t y = k - 1;
    for (std::size_t j = 0; j < k; ++j) {
      acc += s[j];
      if (r < acc) {
        y = j;
        break;
      }
    }
    rows.push_back(x);
    labels.push_back(y);
  }
  return make_matrix(rows, labels, k);
}

std::vector<std::size_t> iota_classes(std::size_t k) {
  std::vector<std::size_t> c(k);
  std::iota(c.begin(), c.end(), 0);
  return c;
}

std::vector<double> flat_params(const LogisticRegression& m) {
  std::vector<double> p;
  for (Eigen::Index r = 0; r < m.weights().rows(); ++r) {
    for (Eigen::Index c = 0; c < m.weights().cols(); ++c) p.push_back(m.weights()(r, c));
  }
  for (Eigen::Index r = 0; r < m.intercepts().size(); ++r) p.push_back(m.intercepts()(r));
  return p;
}

double mean_log_loss(const PolicyModel& model, const StateMatrix& m) {
  const auto probs = model.predict_proba(m);
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i) s -= std::log(std::max(probs(i, m.labels[i]), 1e-300));
  return s / static_cast<double>(m.rows);
}

// ---------------------------------------------------------------------------

TEST(Lbfgs, MinimizesRosenbrock) {
  Objective f = [](const std::vector<double>& x, std::vector<double>& g) {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    g[0] = -2 * a - 400 * x[0] * b;
    g[1] = 200 * b;
    return a * a + 100 * b * b;
  };
  std::vector<double> x = {-1.2, 1.0};
  const auto r = minimize_lbfgs(f, x);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(x[0], 1.0, 1e-5);
  EXPECT_NEAR(x[1], 1.0, 1e-5);
}

TEST(Lbfgs, SolvesQuadraticExactly) {
  // f = 0.5 x'Ax - b'x with A = diag(1..5); optimum x_i = b_i / i.
  Objective f = [](const std::vector<double>& x, std::vector<double>& g) {
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double a = static_cast<double>(i + 1);
      g[i] = a * x[i] - 1.0;
      v += 0.5 * a * x[i] * x[i] - x[i];
    }
    return v;
  };
  std::vector<double> x(5, 3.0);
  minimize_lbfgs(f, x, {.max_iter = 200, .grad_tol = 1e-10, .memory = 5});
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], 1.0 / (i + 1), 1e-9);
}

// ---------------------------------------------------------------------------

TEST(LogReg, SeparatedDataIsConfident) {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 20; ++i) {
    rows.push_back({static_cast<double>(i % 2)});
    labels.push_back(i % 2);
  }
  const auto m = make_matrix(rows, labels, 2);
  const auto model = fit_logreg(m, 1e3);
  const double one[] = {1.0};
  EXPECT_GT(model->predict_proba(one)[1], 0.9);
}

TEST(LogReg, MatchesGridSearchOptimum) {
  // Noisy 1-D binary data. With two classes the penalized optimum has
  // w_1 = -w_0, so the objective reduces to a binary logistic loss in
  // (beta, delta) = (2 w_1, b_1 - b_0) with penalty beta^2 / (4 C N).
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 60; ++i) {
    const double x = normal(rng);
    rows.push_back({x});
    labels.push_back(u(rng) < 1.0 / (1.0 + std::exp(-(1.5 * x - 0.5))) ? 1 : 0);
  }
  const auto m = make_matrix(rows, labels, 2);
  const double C = 0.5;
  const double n = static_cast<double>(m.rows);
  auto objective = [&](double beta, double delta) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) {
      const double z = beta * m.at(i, 0) + delta;
      s += labels[i] ? std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    }
    return s / n + beta * beta / (4.0 * C * n);
  };
  double best = 1e300, bb = 0, bd = 0;
  for (double step : {0.05, 0.005, 0.0005}) {
    const double cb = bb, cd = bd;
    for (int i = -40; i <= 40; ++i) {
      for (int j = -40; j <= 40; ++j) {
        const double beta = (step == 0.05 ? 0.0 : cb) + i * step;
        const double delta = (step == 0.05 ? 0.0 : cd) + j * step;
        const double v = objective(beta, delta);
        if (v < best) {
          best = v;
          bb = beta;
          bd = delta;
        }
      }
    }
  }
  const auto model = fit_logreg(m, C);
  const double beta = model->weights()(1, 0) - model->weights()(0, 0);
  const double delta = model->intercepts()(1) - model->intercepts()(0);
  EXPECT_NEAR(beta, bb, 2e-3);
  EXPECT_NEAR(delta, bd, 2e-3);
  EXPECT_LE(objective(beta, delta), best + 1e-9);
}

TEST(LogReg, ExtremePenaltyGivesPriors) {
  const auto m = linear_task(3, 400, 3, 3);
  const auto model = fit_logreg(m, 1e-9);
  std::vector<double> prior(3, 0.0);
  for (auto y : m.labels) prior[y] += 1.0 / static_cast<double>(m.rows);
  const auto probs = model->predict_proba(m);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(probs(i, j), prior[j], 0.01);
  }
}

TEST(LogReg, RowOrderDoesNotMatter) {
  const auto m = linear_task(5, 300, 4, 3);
  std::vector<std::size_t> perm(m.rows);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
  const auto a = fit_logreg(m, 1.0, 2000, 1e-10);
  const auto b = fit_logreg(m.subset(perm), 1.0, 2000, 1e-10);
  const auto pa = flat_params(*a), pb = flat_params(*b);
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_NEAR(pa[i], pb[i], 1e-8);
}

TEST(LogReg, GradientMatchesFiniteDifferences) {
  const auto m = linear_task(8, 50, 3, 3);
  const auto classes = iota_classes(3);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  std::vector<double> p(3 * 3 + 3);
  for (auto& v : p) v = normal(rng);
  std::vector<double> g(p.size()), scratch(p.size());
  logreg_objective(m, classes, 0.7, p, g);
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto hi = p, lo = p;
    hi[i] += 1e-6;
    lo[i] -= 1e-6;
    const double fd = (logreg_objective(m, classes, 0.7, hi, scratch) -
                       logreg_objective(m, classes, 0.7, lo, scratch)) / 2e-6;
    EXPECT_NEAR(g[i], fd, 1e-7);
  }
}

TEST(LogReg, OptimumSatisfiesFirstOrderConditions) {
  const auto m = linear_task(11, 500, 5, 4);
  const auto model = fit_logreg(m, 10.0);
  std::vector<double> g(flat_params(*model).size());
  logreg_objective(m, model->fitted_classes(), 10.0, flat_params(*model), g);
  double inf = 0.0;
  for (double v : g) inf = std::max(inf, std::abs(v));
  EXPECT_LE(inf, 1e-5);
}

TEST(LogReg, ZeroInputGivesSoftmaxOfIntercepts) {
  const auto m = linear_task(12, 200, 2, 3);
  const auto model = fit_logreg(m, 1.0);
  const double zero[] = {0.0, 0.0};
  const auto p = model->predict_proba(zero);
  const auto& b = model->intercepts();
  const double z = std::exp(b(0)) + std::exp(b(1)) + std::exp(b(2));
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(p[j], std::exp(b(j)) / z, 1e-12);
}

TEST(LogReg, SingleClassIsFitError) {
  const auto m = make_matrix({{0.0}, {1.0}}, {1, 1}, 3);
  EXPECT_THROW(fit_logreg(m, 1.0), FitError);
}

TEST(LogReg, AbsentClassGetsZeroProbability) {
  auto m = linear_task(13, 200, 2, 2);
  m.action_labels.push_back("a2");
  const auto model = fit_logreg(m, 1.0);
  const auto probs = model->predict_proba(m);
  for (std::size_t i = 0; i < m.rows; ++i) {
    EXPECT_EQ(probs(i, 2), 0.0);
    EXPECT_NEAR(probs(i, 0) + probs(i, 1), 1.0, 1e-12);
  }
}

// ---------------------------------------------------------------------------

TEST(Tree, PerfectSplitAtDepthOne) {
  const auto m = make_matrix({{0, 5}, {1, 3}, {0, 4}, {1, 5}, {0, 3}, {1, 4}}, {0, 1, 0, 1, 0, 1}, 2);
  const auto tree = fit_tree(m, SplitCriterion::kGini, 1, 2);
  EXPECT_EQ(tree->leaf_count(), 2u);
  EXPECT_EQ(tree->depth(), 1);
  EXPECT_EQ(tree->nodes()[0].feature, 0);
  EXPECT_DOUBLE_EQ(tree->nodes()[0].threshold, 0.5);
  const auto pred = argmax_rows(tree->predict_proba(m));
  EXPECT_EQ(pred, m.labels);
}

TEST(Tree, MinSamplesSplitCanForbidSplitting) {
  const auto m = linear_task(1, 100, 3, 3);
  const auto tree = fit_tree(m, SplitCriterion::kEntropy, 10, 128);
  EXPECT_EQ(tree->leaf_count(), 1u);
  EXPECT_EQ(tree->depth(), 0);
  std::vector<double> freq(3, 0.0);
  for (auto y : m.labels) freq[y] += 0.01;
  const auto p = tree->predict_proba(m.row(0));
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(p[j], freq[j], 1e-12);
}

TEST(Tree, EqualGainPrefersLowestFeature) {
  const auto m = make_matrix({{0, 0}, {0, 0}, {1, 1}, {1, 1}}, {0, 0, 1, 1}, 2);
  const auto tree = fit_tree(m, SplitCriterion::kGini, 3, 2);
  EXPECT_EQ(tree->nodes()[0].feature, 0);
}

TEST(Tree, ClassPureDataGivesDepthZero) {
  const auto m = make_matrix({{0.1}, {0.7}, {0.3}}, {2, 2, 2}, 3);
  const auto tree = fit_tree(m, SplitCriterion::kGini, 5, 2);
  EXPECT_EQ(tree->leaf_count(), 1u);
  for (std::size_t i = 0; i < m.rows; ++i) EXPECT_GE(tree->predict_proba(m.row(i))[2], 0.99);
}

TEST(Tree, LeafProbabilitiesAreExactFrequencies) {
  const auto m = linear_task(21, 400, 4, 4);
  for (auto crit : {SplitCriterion::kGini, SplitCriterion::kEntropy}) {
    const auto tree = fit_tree(m, crit, 4, 8);
    EXPECT_LE(tree->depth(), 4);
    std::map<std::size_t, std::vector<std::size_t>> routed;
    for (std::size_t i = 0; i < m.rows; ++i) {
      auto& c = routed[tree->leaf_index(m.row(i))];
      c.resize(4);
      ++c[m.labels[i]];
    }
    EXPECT_EQ(routed.size(), tree->leaf_count());
    for (const auto& [leaf, counts] : routed) {
      const auto total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
      std::size_t i = 0;
      while (tree->leaf_index(m.row(i)) != leaf) ++i;
      const auto p = tree->predict_proba(m.row(i));
      for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_EQ(p[j], static_cast<double>(counts[j]) / static_cast<double>(total));
      }
    }
  }
}

TEST(Tree, DotExportListsEveryNode) {
  const auto tree = fit_tree(linear_task(4, 100, 2, 2), SplitCriterion::kGini, 2, 2);
  const auto dot = tree->to_dot();
  EXPECT_EQ(dot.rfind("digraph", 0), 0u);
  for (std::size_t i = 0; i < tree->nodes().size(); ++i) {
    EXPECT_NE(dot.find("  " + std::to_string(i) + " [label="), std::string::npos);
  }
}

// ---------------------------------------------------------------------------

StateMatrix binary_features(std::uint64_t seed, std::size_t n, std::size_t best, double imbalance = 0.0) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5), flip(0.15), weak(0.45);
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(5);
    for (auto& v : x) v = coin(rng) ? 1.0 : 0.0;
    std::size_t y = static_cast<std::size_t>(x[best]);
    if (flip(rng)) y = 1 - y;
    if (y == 1 && u(rng) < imbalance) y = 0;
    // Weakly informative neighbour.
    if (best + 1 < 5 && weak(rng)) x[best + 1] = static_cast<double>(y);
    rows.push_back(x);
    labels.push_back(y);
  }
  return make_matrix(rows, labels, 2);
}

TEST(RiskScore, SigmoidOfZeroScore) {
  RiskScore rs({"f0", "f1"}, {"a0", "a1"}, {2, -1}, -1.0);
  const double x[] = {1.0, 1.0};
  EXPECT_EQ(rs.score(x), 0.0);
  EXPECT_DOUBLE_EQ(rs.predict_proba(x)[1], 0.5);
}

TEST(RiskScore, SingleFeatureMatchesExhaustiveSearch) {
  const auto m = binary_features(31, 400, 2);
  const int max_coef = 5;
  // Oracle: every (feature, integer weight) pair with the intercept fitted by
  // a fine 1-D scan.
  double best_loss = 1e300;
  std::size_t best_feature = 0;
  for (std::size_t f = 0; f < 5; ++f) {
    for (int w = -max_coef; w <= max_coef; ++w) {
      if (w == 0) continue;
      for (int b = -1000; b <= 1000; ++b) {
        std::vector<double> margins(m.rows);
        for (std::size_t i = 0; i < m.rows; ++i) margins[i] = b * 0.01 + w * m.at(i, f);
        const double loss = weighted_log_loss(margins, m.labels, 1.0);
        if (loss < best_loss) {
          best_loss = loss;
          best_feature = f;
        }
      }
    }
  }
  EXPECT_EQ(best_feature, 2u);
  const auto rs = fit_riskscore(m, max_coef, 1, 1.0);
  for (std::size_t f = 0; f < 5; ++f) {
    if (f == best_feature) EXPECT_NE(rs->weights()[f], 0);
    else EXPECT_EQ(rs->weights()[f], 0);
  }
}

TEST(RiskScore, PositiveWeightRaisesRecall) {
  const auto m = binary_features(32, 600, 1, 0.6);
  auto recall = [&](const RiskScore& rs) {
    double tp = 0, pos = 0;
    for (std::size_t i = 0; i < m.rows; ++i) {
      if (m.labels[i] != 1) continue;
      ++pos;
      if (rs.predict_proba(m.row(i))[1] >= 0.5) ++tp;
    }
    return tp / pos;
  };
  const auto r1 = fit_riskscore(m, 5, 5, 1.0);
  const auto r5 = fit_riskscore(m, 5, 5, 5.0);
  EXPECT_GE(recall(*r5), recall(*r1));
}

TEST(RiskScore, CoefficientsRespectBounds) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = binary_features(40 + seed, 300, seed % 5);
    for (int max_coef : {1, 3}) {
      for (int max_size : {1, 2, 4}) {
        const auto rs = fit_riskscore(m, max_coef, max_size, 1.0 + seed);
        int nonzero = 0;
        for (int w : rs->weights()) {
          EXPECT_LE(std::abs(w), max_coef);
          nonzero += w != 0;
        }
        EXPECT_LE(nonzero, max_size);
      }
    }
  }
}

TEST(RiskScore, MulticlassIsUnsupported) {
  EXPECT_THROW(fit_riskscore(linear_task(1, 60, 2, 3), 5, 5, 1.0), UnsupportedModelError);
}

// ---------------------------------------------------------------------------

TEST(Mlp, GradientCheckOnEverySearchShape) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  const std::size_t n = 7, inputs = 4, k = 3;
  Eigen::MatrixXd x(n, inputs);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  std::vector<std::size_t> y = {0, 1, 2, 2, 1, 0, 1};
  std::set<std::vector<int>> shapes;
  for (auto p : {DatasetProfile::kAdniLike, DatasetProfile::kRaLike, DatasetProfile::kSepsisLike}) {
    for (const auto& h : HyperparamSpace::for_profile(p).mlp_hidden) shapes.insert(h);
  }
  for (const auto& hidden : shapes) {
    auto net = MlpNetwork::init(inputs, hidden, k, 9);
    // Nonzero biases keep ReLU kinks away from the evaluation point.
    for (auto& b : net.biases) for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.1 * normal(rng);
    MlpNetwork grad = net;
    net.loss(x, y, &grad);
    const auto analytic = grad.flatten();
    auto params = net.flatten();
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double orig = params[i];
      params[i] = orig + 1e-5;
      net.assign(params);
      const double hi = net.loss(x, y);
      params[i] = orig - 1e-5;
      net.assign(params);
      const double lo = net.loss(x, y);
      params[i] = orig;
      const double fd = (hi - lo) / 2e-5;
      const double rel = std::abs(fd - analytic[i]) / std::max(1e-4, std::abs(fd) + std::abs(analytic[i]));
      worst = std::max(worst, rel);
    }
    net.assign(params);
    EXPECT_LT(worst, 1e-5) << "hidden size " << hidden.size();
  }
}

StateMatrix xor_task(std::size_t copies) {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < copies; ++c) {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        rows.push_back({static_cast<double>(a), static_cast<double>(b)});
        labels.push_back(static_cast<std::size_t>(a ^ b));
      }
    }
  }
  return make_matrix(rows, labels, 2);
}

TEST(Mlp, LearnsXor) {
  const auto m = xor_task(16);
  const auto model = fit_mlp(m, m, {.hidden = {16}, .learning_rate = 1e-2, .batch_size = 16,
                                    .max_epochs = 500, .patience = 500, .seed = 1});
  EXPECT_LE(model->epochs_run(), 500);
  EXPECT_EQ(argmax_rows(model->predict_proba(m)), m.labels);
}

TEST(Mlp, EarlyStoppingCounter) {
  EarlyStopping stop(5);
  std::vector<bool> decisions;
  for (int e = 0; e < 10; ++e) {
    decisions.push_back(stop.update(1.0 + e));
    if (decisions.back()) break;
  }
  EXPECT_EQ(stop.epochs(), 6);
  EXPECT_EQ(stop.best_epoch(), 1);
  EXPECT_EQ(std::count(decisions.begin(), decisions.end(), true), 1);

  EarlyStopping equal(2);
  EXPECT_FALSE(equal.update(1.0));
  EXPECT_FALSE(equal.update(1.0));
  EXPECT_TRUE(equal.update(1.0));
}

TEST(Mlp, ReturnsBestValidationSnapshot) {
  const auto train = linear_task(50, 200, 3, 3);
  const auto val = linear_task(51, 100, 3, 3);
  const auto model = fit_mlp(train, val, {.hidden = {16}, .learning_rate = 1e-2, .batch_size = 32,
                                          .max_epochs = 60, .patience = 5, .seed = 3});
  EXPECT_GE(model->best_epoch(), 1);
  EXPECT_LE(model->best_epoch(), model->epochs_run());
  EXPECT_LE(model->epochs_run() - model->best_epoch(), 5);
}

TEST(Mlp, SeededFitIsReproducible) {
  const auto train = linear_task(52, 120, 3, 3);
  const MlpOptions o{.hidden = {8}, .learning_rate = 1e-2, .batch_size = 16, .max_epochs = 10,
                     .patience = 5, .seed = 77};
  EXPECT_EQ(fit_mlp(train, train, o)->network().flatten(), fit_mlp(train, train, o)->network().flatten());
}

TEST(Mlp, NonFiniteLossDiverges) {
  auto m = linear_task(53, 64, 2, 2);
  m.values[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(fit_mlp(m, m, {.hidden = {16}, .learning_rate = 1e-3, .batch_size = 8,
                              .max_epochs = 50, .patience = 50, .seed = 1}),
               DivergenceError);
}

TEST(Capacity, MlpFitsNonlinearTaskBetterThanLogReg) {
  std::mt19937_64 rng(60);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 400; ++i) {
    const double a = u(rng), b = u(rng);
    rows.push_back({a, b});
    labels.push_back(a * b > 0 ? 1 : 0);
  }
  const auto m = make_matrix(rows, labels, 2);
  const auto lr = fit_logreg(m, 1e3);
  const auto mlp = fit_mlp(m, m, {.hidden = {64, 64}, .learning_rate = 1e-2, .batch_size = 32,
                                  .max_epochs = 200, .patience = 20, .seed = 2});
  EXPECT_GE(mean_log_loss(*lr, m) + 1e-6, mean_log_loss(*mlp, m));
}

// ---------------------------------------------------------------------------

TEST(Contract, ProbabilitiesSumToOneForEveryKind) {
  const auto train = linear_task(70, 200, 3, 2);
  std::vector<ModelPtr> models = {
      fit_logreg(train, 1.0), fit_tree(train, SplitCriterion::kGini, 4, 2),
      fit_mlp(train, train, {.hidden = {8}, .max_epochs = 5, .seed = 1})};
  auto binarized = train;
  for (auto& v : binarized.values) v = v > 0 ? 1.0 : 0.0;
  models.push_back(fit_riskscore(binarized, 3, 3, 1.0));
  for (const auto& model : models) {
    const auto probs = model->predict_proba(train);
    for (std::size_t i = 0; i < train.rows; ++i) {
      double s = 0.0;
      for (double p : probs.row(i)) {
        EXPECT_GE(p, 0.0);
        s += p;
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Contract, FeatureMismatchIsContractError) {
  const auto train = linear_task(71, 50, 2, 2);
  const auto model = fit_logreg(train, 1.0);
  auto renamed = train;
  renamed.feature_names[1] = "other";
  EXPECT_THROW(model->predict_proba(renamed), ContractError);
  auto relabeled = train;
  relabeled.action_labels[0] = "zzz";
  EXPECT_THROW(model->predict_proba(relabeled), ContractError);
}

TEST(Serialization, RoundTripPreservesPredictions) {
  const auto train = linear_task(72, 150, 3, 3);
  auto binary = linear_task(73, 150, 3, 2);
  for (auto& v : binary.values) v = v > 0 ? 1.0 : 0.0;
  std::vector<std::pair<ModelPtr, const StateMatrix*>> cases = {
      {fit_logreg(train, 1.0), &train},
      {fit_tree(train, SplitCriterion::kEntropy, 3, 2), &train},
      {fit_mlp(train, train, {.hidden = {8, 8}, .max_epochs = 3, .seed = 1}), &train},
      {fit_riskscore(binary, 4, 3, 2.0), &binary}};
  for (const auto& [model, data] : cases) {
    const auto doc = model->to_json();
    EXPECT_EQ(doc.at("format_version"), kModelFormatVersion);
    const auto back = model_from_json(nlohmann::json::parse(doc.dump()));
    EXPECT_EQ(back->kind(), model->kind());
    EXPECT_EQ(back->predict_proba(*data).data, model->predict_proba(*data).data);
  }
  EXPECT_THROW(model_from_json({{"kind", "svm"}}), std::exception);
}

TEST(Argmax, LowestIndexOnTies) {
  Matrix p(2, 3);
  p(0, 0) = 0.4, p(0, 1) = 0.4, p(0, 2) = 0.2;
  p(1, 0) = 0.1, p(1, 1) = 0.45, p(1, 2) = 0.45;
  EXPECT_EQ(argmax_rows(p), (std::vector<std::size_t>{0, 1}));
}

// ---------------------------------------------------------------------------

TEST(Hyperparams, DrawsComeFromDeclaredSets) {
  const auto space = HyperparamSpace::for_profile(DatasetProfile::kSepsisLike);
  const auto lr = sample_hyperparams(space, ModelKind::kLogisticRegression, 9);
  ASSERT_EQ(lr.size(), 5u);
  for (const auto& h : lr) {
    const double c = std::get<LogRegParams>(h).C;
    EXPECT_NE(std::find(space.lr_C.begin(), space.lr_C.end(), c), space.lr_C.end());
  }
  EXPECT_EQ(space.lr_C.size(), 7u);
  const std::set<int> depths = {3, 5, 7, 9, 11, 13, 15};
  std::set<int> seen;
  for (const auto& h : sample_hyperparams(space, ModelKind::kDecisionTree, 1, 200)) {
    const int d = std::get<TreeParams>(h).max_depth;
    EXPECT_TRUE(depths.count(d));
    seen.insert(d);
  }
  EXPECT_EQ(seen, depths);
}

TEST(Hyperparams, SeedDeterminesDraws) {
  const auto space = HyperparamSpace::for_profile(DatasetProfile::kRaLike);
  for (auto kind : {ModelKind::kLogisticRegression, ModelKind::kDecisionTree, ModelKind::kRiskScore,
                    ModelKind::kMlp}) {
    const auto a = sample_hyperparams(space, kind, 42, 8);
    const auto b = sample_hyperparams(space, kind, 42, 8);
    const auto c = sample_hyperparams(space, kind, 43, 8);
    std::string sa, sb, sc;
    for (std::size_t i = 0; i < 8; ++i) {
      EXPECT_EQ(hyperparams_kind(a[i]), kind);
      sa += hyperparams_to_json(a[i]).dump();
      sb += hyperparams_to_json(b[i]).dump();
      sc += hyperparams_to_json(c[i]).dump();
    }
    EXPECT_EQ(sa, sb);
    EXPECT_NE(sa, sc);
  }
}

TEST(Hyperparams, ProfilesAndSelectionMetric) {
  EXPECT_EQ(HyperparamSpace::for_profile(DatasetProfile::kRaLike).dt_max_depth,
            (std::vector<int>{2, 3, 4, 5, 6, 7, 8}));
  EXPECT_EQ(default_selection_metric(DatasetProfile::kAdniLike), SelectionMetric::kAuroc);
  EXPECT_EQ(default_selection_metric(DatasetProfile::kRaLike), SelectionMetric::kAuroc);
  EXPECT_EQ(default_selection_metric(DatasetProfile::kSepsisLike), SelectionMetric::kAccuracy);
  EXPECT_EQ(default_selection_metric(DatasetProfile::kCopdLike), SelectionMetric::kAccuracy);
  EXPECT_EQ(parse_profile("copd-like"), DatasetProfile::kCopdLike);
  EXPECT_THROW(parse_profile("icu"), ConfigError);
  EXPECT_EQ(parse_model_kind("rs"), ModelKind::kRiskScore);
}

TEST(Hyperparams, FitModelDispatches) {
  const auto train = linear_task(80, 100, 2, 2);
  EXPECT_EQ(fit_model(TreeParams{}, train, train, 1)->kind(), ModelKind::kDecisionTree);
  EXPECT_EQ(fit_model(LogRegParams{}, train, train, 1)->kind(), ModelKind::kLogisticRegression);
  EXPECT_EQ(fit_model(MlpParams{.max_epochs = 2}, train, train, 1)->kind(), ModelKind::kMlp);
}

}  // namespace
}  // namespace histpolicy

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

#include <map>
#include <set>
#include <random>

#include "histpolicy/errors.h"
#include "histpolicy/staterep.h"
#include "test_util.h"

namespace histpolicy {
namespace {

using testing::numeric_set;

NumericEpisodeSet two_by_three() {
  return numeric_set({{{1, 2, 3, 4}, {5, 6, 7, 8}, {9, 10, 11, 12}},
                      {{-1, -2, -3, -4}, {0, 0, 0, 0}, {2, 2, 2, 2}}},
                     {{0, 1, 2}, {2, 2, 1}}, {"MTX", "TNF", "JAK"});
}

NumericEpisodeSet random_set(std::uint64_t seed, std::size_t patients, std::size_t width,
                             std::size_t k) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<std::size_t> len(1, 7), act(0, k - 1);
  std::vector<std::vector<std::vector<double>>> ctx(patients);
  std::vector<std::vector<std::size_t>> actions(patients);
  for (std::size_t p = 0; p < patients; ++p) {
    const auto n = len(rng);
    for (std::size_t t = 0; t < n; ++t) {
      std::vector<double> row(width);
      for (auto& v : row) v = normal(rng);
      ctx[p].push_back(row);
      actions[p].push_back(act(rng));
    }
  }
  std::vector<std::string> labels;
  for (std::size_t j = 0; j < k; ++j) labels.push_back("a" + std::to_string(j));
  auto set = numeric_set(ctx, actions, labels, 0);
  if (width > 1) set.columns[1].aggregate_eligible = false;
  return set;
}

TEST(Aggregate, CountsPreviousActions) {
  const auto set = numeric_set({{{0}, {0}, {0}, {0}}}, {{0, 1, 0, 2}}, {"MTX", "TNF", "JAK"});
  const auto out = aggregate_history(set, set.episodes[0], 4, AggregateOp::kSum);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[1], 2.0);
  EXPECT_EQ(out[2], 1.0);
  EXPECT_EQ(out[3], 0.0);
  const auto names = aggregate_feature_names(set, AggregateOp::kSum);
  EXPECT_EQ(names[2], "action:TNF@agg_sum");
}

TEST(Aggregate, MaxOfNumericPrefix) {
  const auto set = numeric_set({{{3.2}, {5.1}, {4.0}}}, {{0, 0, 0}}, {"a", "b"});
  EXPECT_EQ(aggregate_history(set, set.episodes[0], 3, AggregateOp::kMax)[0], 5.1);
  EXPECT_EQ(aggregate_history(set, set.episodes[0], 1, AggregateOp::kMax)[0], 3.2);
}

TEST(Aggregate, EmptyActionPrefixIsZero) {
  const auto set = numeric_set({{{3.0}, {1.0}}}, {{1, 0}}, {"a", "b"});
  const auto out = aggregate_history(set, set.episodes[0], 1, AggregateOp::kMean);
  EXPECT_EQ(out, (std::vector<double>{3.0, 0.0, 0.0}));
}

TEST(Aggregate, SkipsIneligibleVariables) {
  auto set = numeric_set({{{1, 50}, {2, 50}}}, {{0, 1}}, {"a", "b"});
  set.columns[1].aggregate_eligible = false;
  const auto names = aggregate_feature_names(set, AggregateOp::kSum);
  for (const auto& n : names) EXPECT_EQ(n.find("v2@"), std::string::npos);
  EXPECT_EQ(aggregate_history(set, set.episodes[0], 2, AggregateOp::kSum).size(), 3u);
}

TEST(Aggregate, SumPrefixRecurrence) {
  const auto set = random_set(4, 20, 3, 4);
  for (const auto& ep : set.episodes) {
    for (std::size_t t = 2; t <= ep.length; ++t) {
      const auto prev = aggregate_history(set, ep, t - 1, AggregateOp::kSum);
      const auto cur = aggregate_history(set, ep, t, AggregateOp::kSum);
      std::size_t idx = 0;
      for (std::size_t c = 0; c < set.width(); ++c) {
        if (!set.columns[c].aggregate_eligible) continue;
        EXPECT_NEAR(cur[idx], prev[idx] + ep.at(t - 1)[c], 1e-12);
        ++idx;
      }
      for (std::size_t j = 0; j < set.num_actions(); ++j, ++idx) {
        EXPECT_EQ(cur[idx], prev[idx] + (ep.actions[t - 2] == j ? 1.0 : 0.0));
      }
    }
  }
}

TEST(Truncate, PadsWithFirstStageAndDefaultAction) {
  const auto set = numeric_set({{{7.0}, {8.0}, {9.0}}}, {{2, 1, 0}}, {"MTX", "TNF", "JAK"}, 0);
  const auto out = truncate_history(set, set.episodes[0], 1, 2);
  EXPECT_EQ(out, (std::vector<double>{7, 7, 7, 1, 0, 0, 1, 0, 0, 1, 0, 0}));
}

TEST(Truncate, WindowZeroIsCurrentAndPreviousAction) {
  const auto set = numeric_set({{{1.0}, {2.0}, {3.0}, {4.0}, {5.0}}}, {{0, 1, 2, 1, 0}},
                               {"a", "b", "c"});
  EXPECT_EQ(truncate_history(set, set.episodes[0], 5, 0), (std::vector<double>{5, 0, 1, 0}));
  EXPECT_EQ(truncation_feature_names(set, 0), (std::vector<std::string>{"v1", "action:a@lag1",
                                                                        "action:b@lag1",
                                                                        "action:c@lag1"}));
}

TEST(Truncate, IndexArithmetic) {
  const auto set = numeric_set({{{1.0}, {2.0}, {3.0}}}, {{1, 0, 1}}, {"a", "b"});
  // {X_3, X_2, A_2, A_1}
  EXPECT_EQ(truncate_history(set, set.episodes[0], 3, 1), (std::vector<double>{3, 2, 1, 0, 0, 1}));
}

TEST(Assemble, ShapesAndPadding) {
  const auto set = two_by_three();
  const auto cur = assemble_state(set, {.include_current = true});
  EXPECT_EQ(cur.rows, 6u);
  EXPECT_EQ(cur.cols(), 4u);
  const auto prev = assemble_state(set, {.include_prev_action = true});
  EXPECT_EQ(prev.rows, 6u);
  ASSERT_EQ(prev.cols(), 3u);
  for (std::size_t i = 0; i < prev.rows; ++i) {
    double sum = 0.0;
    for (double v : prev.row(i)) sum += v;
    EXPECT_EQ(sum, 1.0);
    if (prev.stage[i] == 1) {
      EXPECT_EQ(prev.at(i, set.default_action), 1.0);
    }
  }
  EXPECT_EQ(prev.at(1, 0), 1.0);
  EXPECT_EQ(prev.at(4, 2), 1.0);
  EXPECT_EQ(prev.labels, (std::vector<std::size_t>{0, 1, 2, 2, 2, 1}));
  EXPECT_EQ(prev.stage, (std::vector<std::size_t>{1, 2, 3, 1, 2, 3}));
  EXPECT_EQ(prev.patient, (std::vector<std::size_t>{0, 0, 0, 1, 1, 1}));
}

TEST(Assemble, EmptySpecIsConfigError) {
  EXPECT_THROW(assemble_state(two_by_three(), StateSpec{}), ConfigError);
  StateSpec negative;
  negative.window_k = -1;
  EXPECT_THROW(negative.validate(), ConfigError);
}

TEST(Assemble, ColumnUnionOfTruncationAndAggregate) {
  const auto set = random_set(9, 15, 3, 3);
  StateSpec spec;
  spec.window_k = 1;
  spec.aggregate = AggregateOp::kSum;
  const auto m = assemble_state(set, spec);
  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < m.cols(); ++c) index[m.feature_names[c]] = c;
  // Ineligible-for-lag columns appear only as current values.
  std::size_t expected = 0;
  const auto tnames = truncation_feature_names(set, 1);
  const auto anames = aggregate_feature_names(set, AggregateOp::kSum);
  expected = tnames.size() + anames.size();
  EXPECT_EQ(m.cols(), expected);
  std::size_t row = 0;
  for (const auto& ep : set.episodes) {
    for (std::size_t t = 1; t <= ep.length; ++t, ++row) {
      const auto tv = truncate_history(set, ep, t, 1);
      const auto av = aggregate_history(set, ep, t, AggregateOp::kSum);
      for (std::size_t i = 0; i < tv.size(); ++i) EXPECT_EQ(m.at(row, index.at(tnames[i])), tv[i]);
      for (std::size_t i = 0; i < av.size(); ++i) EXPECT_EQ(m.at(row, index.at(anames[i])), av[i]);
    }
  }
}

TEST(Assemble, WindowZeroMatchesCurrentPlusPrevious) {
  const auto set = random_set(2, 12, 2, 4);
  const auto a = assemble_state(set, {.include_current = true, .include_prev_action = true});
  const auto b = assemble_state(set, {.window_k = 0});
  EXPECT_EQ(a.feature_names, b.feature_names);
  EXPECT_EQ(a.values, b.values);
}

TEST(Assemble, NoPaddingBeyondWindow) {
  const auto set = random_set(6, 10, 2, 3);
  const int k = 2;
  for (const auto& ep : set.episodes) {
    for (std::size_t t = k + 2; t <= ep.length; ++t) {
      const auto tv = truncate_history(set, ep, t, k);
      // Lag-k context must be X_{t-k}, not the stage-1 pad.
      EXPECT_EQ(tv[k * set.width()], ep.at(t - 1 - k)[0]);
    }
  }
}

TEST(Assemble, AggregateOnlyKeepsIneligibleCurrentValues) {
  auto set = numeric_set({{{1, 50}, {2, 51}}}, {{0, 1}}, {"a", "b"});
  set.columns[1].aggregate_eligible = false;
  const auto m = assemble_state(set, {.aggregate = AggregateOp::kMax});
  EXPECT_EQ(m.feature_names,
            (std::vector<std::string>{"v2", "v1@agg_max", "action:a@agg_max", "action:b@agg_max"}));
  EXPECT_EQ(m.at(1, 0), 51.0);
  EXPECT_EQ(m.at(1, 1), 2.0);
}

TEST(Assemble, FeatureCountConstantAndNamesUnique) {
  const auto set = random_set(1, 25, 3, 5);
  for (const auto& spec : standard_states(AggregateOp::kMean)) {
    const auto m = assemble_state(set, spec);
    EXPECT_EQ(m.values.size(), m.rows * m.cols());
    std::set<std::string> names(m.feature_names.begin(), m.feature_names.end());
    EXPECT_EQ(names.size(), m.cols()) << spec.label();
    for (std::size_t i = 1; i < m.rows; ++i) {
      const bool ordered = m.patient[i] > m.patient[i - 1] ||
                           (m.patient[i] == m.patient[i - 1] && m.stage[i] == m.stage[i - 1] + 1);
      EXPECT_TRUE(ordered);
    }
  }
}

TEST(StandardStates, SevenSpecsInTableOrder) {
  const auto specs = standard_states(AggregateOp::kSum);
  ASSERT_EQ(specs.size(), 7u);
  EXPECT_TRUE(specs[2].include_current && specs[2].include_prev_action);
  EXPECT_EQ(specs[2].window_k, 0);
  EXPECT_EQ(specs[2].aggregate, AggregateOp::kNone);
  std::vector<std::string> labels;
  for (const auto& s : specs) labels.push_back(s.label());
  EXPECT_EQ(labels, (std::vector<std::string>{"X_t", "A_t-1", "H(0)", "Hbar_sum", "H(0)+Hbar_sum",
                                              "H(1)+Hbar_sum", "H(2)+Hbar_sum"}));
  for (const auto& s : standard_states(AggregateOp::kMax)) {
    if (s.aggregate != AggregateOp::kNone) {
      EXPECT_EQ(s.aggregate, AggregateOp::kMax);
    }
  }
  EXPECT_EQ(standard_states(AggregateOp::kMean).size(), 7u);
}

TEST(StateSpec, JsonRoundTrip) {
  for (const auto& s : standard_states(AggregateOp::kMean)) {
    EXPECT_EQ(state_spec_from_json(state_spec_to_json(s)), s);
  }
  EXPECT_THROW(parse_aggregate_op("median"), ConfigError);
}

TEST(StateMatrix, SubsetKeepsTags) {
  const auto m = assemble_state(two_by_three(), {.include_current = true});
  const std::vector<std::size_t> rows = {4, 1};
  const auto s = m.subset(rows);
  EXPECT_EQ(s.rows, 2u);
  EXPECT_EQ(s.at(0, 0), 0.0);
  EXPECT_EQ(s.at(1, 0), 5.0);
  EXPECT_EQ(s.patient, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(s.patient_ids, m.patient_ids);
}

}  // namespace
}  // namespace histpolicy

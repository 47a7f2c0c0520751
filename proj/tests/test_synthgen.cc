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

#include <limits>
#include <sstream>

#include "histpolicy/dataset.h"
#include "histpolicy/errors.h"
#include "histpolicy/metrics.h"
#include "histpolicy/models.h"
#include "histpolicy/staterep.h"
#include "histpolicy/synthgen.h"

namespace histpolicy {
namespace {

GeneratorConfig small_config(std::uint64_t seed) {
  GeneratorConfig cfg;
  cfg.n_patients = 200;
  cfg.num_actions = 4;
  cfg.context_dim = 3;
  cfg.min_stages = 4;
  cfg.max_stages = 9;
  cfg.geometric_p = 0.3;
  cfg.w_x = 0.8;
  cfg.w_a = 1.0;
  cfg.w_agg = -0.3;
  cfg.w_lag = 0.4;
  cfg.seed = seed;
  return cfg;
}

TEST(Generator, SameSeedSameCohort) {
  const auto a = generate_cohort(small_config(3));
  const auto b = generate_cohort(small_config(3));
  const auto c = generate_cohort(small_config(4));
  std::ostringstream sa, sb, sc;
  write_episodes_jsonl(sa, a.episodes, a.schema);
  write_episodes_jsonl(sb, b.episodes, b.schema);
  write_episodes_jsonl(sc, c.episodes, c.schema);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(sa.str(), sc.str());
  EXPECT_EQ(a.oracle.data, b.oracle.data);
}

TEST(Generator, PolicySeedFixesCoefficients) {
  auto a = small_config(1), b = small_config(2);
  a.policy_seed = b.policy_seed = 99;
  const auto pa = policy_parameters(a), pb = policy_parameters(b);
  EXPECT_EQ(pa.context_weights, pb.context_weights);
  EXPECT_EQ(pa.drift, pb.drift);
  EXPECT_NE(policy_parameters(small_config(1)).context_weights,
            policy_parameters(small_config(2)).context_weights);
}

TEST(Generator, PersistentPolicyRepeatsActions) {
  GeneratorConfig cfg;
  cfg.n_patients = 1000;
  cfg.min_stages = cfg.max_stages = 11;
  cfg.w_x = 0.0;
  cfg.w_a = 6.0;
  cfg.seed = 5;
  const auto cohort = generate_cohort(cfg);
  double repeats = 0, pairs = 0;
  for (const auto& ep : cohort.episodes) {
    for (std::size_t t = 1; t < ep.stages.size(); ++t, ++pairs) {
      repeats += ep.stages[t].action == ep.stages[t - 1].action;
    }
  }
  EXPECT_GE(pairs, 10000);
  EXPECT_GT(repeats / pairs, 0.8);
}

TEST(Generator, ZeroWeightsGiveUniformActions) {
  GeneratorConfig cfg;
  cfg.n_patients = 1000;
  cfg.min_stages = cfg.max_stages = 10;
  cfg.w_x = 0.0;
  cfg.seed = 6;
  const auto cohort = generate_cohort(cfg);
  std::vector<double> freq(cfg.num_actions, 0.0);
  for (const auto& ep : cohort.episodes) {
    for (const auto& st : ep.stages) freq[st.action] += 1.0 / 10000.0;
  }
  for (double f : freq) EXPECT_NEAR(f, 1.0 / cfg.num_actions, 0.02);
}

TEST(Generator, OracleMatchesGenerationExactly) {
  const auto cfg = small_config(7);
  const auto cohort = generate_cohort(cfg);
  const auto oracle = oracle_probabilities(cfg, cohort.episodes);
  EXPECT_EQ(oracle.probs.data, cohort.oracle.data);
  EXPECT_EQ(oracle.probs.rows, total_stages(cohort.episodes));
  for (std::size_t i = 0; i < oracle.probs.rows; ++i) {
    double s = 0.0;
    for (double p : oracle.probs.row(i)) {
      EXPECT_GT(p, 0.0);
      s += p;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Generator, DeterministicPolicyLimit) {
  auto cfg = small_config(8);
  cfg.policy_scale = 100.0;
  const auto cohort = generate_cohort(cfg);
  EXPECT_GT(oracle_probabilities(cfg, cohort.episodes).auroc, 0.99);
}

TEST(Generator, EpisodesSatisfyDatasetInvariants) {
  const auto cfg = small_config(9);
  const auto cohort = generate_cohort(cfg);
  cohort.schema.validate();
  for (const auto& ep : cohort.episodes) {
    EXPECT_GE(ep.stages.size(), cfg.min_stages);
    EXPECT_LE(ep.stages.size(), cfg.max_stages);
  }
  std::stringstream buf;
  write_episodes_jsonl(buf, cohort.episodes, cohort.schema);
  const auto back = read_episodes_jsonl(buf, cohort.schema);
  ASSERT_EQ(back.size(), cohort.episodes.size());
  EXPECT_EQ(back[5].stages[2].context, cohort.episodes[5].stages[2].context);
  const auto prep = fit_preprocessor(back, cohort.schema);
  EXPECT_TRUE(prep.warnings().empty());
  EXPECT_EQ(prep.apply(back).total_stages(), total_stages(back));
}

TEST(Generator, OracleBeatsFittedModel) {
  GeneratorConfig cfg;
  cfg.n_patients = 1500;
  cfg.w_x = 0.6;
  cfg.w_a = 1.5;
  cfg.w_agg = -0.3;
  cfg.seed = 10;
  const auto cohort = generate_cohort(cfg);
  const auto split = split_dataset(cohort.episodes, 1);
  const auto prep = fit_preprocessor(split.train, cohort.schema);
  StateSpec spec;
  spec.window_k = 0;
  spec.aggregate = AggregateOp::kSum;
  const auto train = assemble_state(prep.apply(split.train), spec);
  const auto test = assemble_state(prep.apply(split.test), spec);
  const auto model = fit_logreg(train, 10.0);
  const double fitted = auroc_multiclass(model->predict_proba(test), test.labels);
  const double oracle = oracle_probabilities(cfg, split.test).auroc;
  EXPECT_GT(oracle, fitted - 0.01);
}

TEST(Generator, FactoringStateRecoversOracle) {
  GeneratorConfig cfg;
  cfg.n_patients = 2000;
  cfg.w_x = 0.5;
  cfg.w_a = 1.0;
  cfg.w_agg = -0.3;
  cfg.w_lag = 0.5;
  cfg.seed = 11;
  const auto cohort = generate_cohort(cfg);
  const auto split = split_dataset(cohort.episodes, 2);
  const auto prep = fit_preprocessor(split.train, cohort.schema);
  StateSpec spec;
  spec.window_k = 1;
  spec.aggregate = AggregateOp::kSum;
  const auto train = assemble_state(prep.apply(split.train), spec);
  const auto test = assemble_state(prep.apply(split.test), spec);
  const auto model = fit_logreg(train, 100.0);
  const double fitted = auroc_multiclass(model->predict_proba(test), test.labels);
  const double oracle = oracle_probabilities(cfg, split.test).auroc;
  EXPECT_NEAR(fitted, oracle, 0.02);
}

TEST(GeneratorConfigJson, RoundTripAndValidation) {
  auto cfg = small_config(12);
  cfg.policy_seed = 4;
  const auto back = generator_config_from_json(generator_config_to_json(cfg));
  EXPECT_EQ(generator_config_to_json(back).dump(), generator_config_to_json(cfg).dump());
  EXPECT_EQ(*back.policy_seed, 4u);
  EXPECT_THROW(generator_config_from_json({{"n_patient", 4}}), ConfigError);
  auto bad = cfg;
  bad.n_patients = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.w_a = std::numeric_limits<double>::infinity();
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.num_actions = 1;
  EXPECT_THROW(bad.validate(), ConfigError);
  const auto fixed = generator_config_from_json({{"min_stages", 6}});
  EXPECT_EQ(fixed.max_stages, 6u);
}

TEST(Generator, OracleCsvLayout) {
  auto cfg = small_config(13);
  cfg.n_patients = 3;
  const auto cohort = generate_cohort(cfg);
  std::ostringstream out;
  write_oracle_csv(out, cohort);
  std::istringstream in(out.str());
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, "patient_id,t,p_true_1,p_true_2,p_true_3,p_true_4");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, total_stages(cohort.episodes));
}

}  // namespace
}  // namespace histpolicy

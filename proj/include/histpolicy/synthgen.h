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

// Synthetic cohorts drawn from a known behavior policy, with the generating
// probabilities kept alongside the episodes.

#ifndef HISTPOLICY_SYNTHGEN_H_
#define HISTPOLICY_SYNTHGEN_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>

#include <Eigen/Dense>

#include "histpolicy/dataset.h"
#include "histpolicy/matrix.h"
#include "json.hpp"

namespace histpolicy {

struct GeneratorConfig {
  std::size_t n_patients = 1000;
  std::size_t num_actions = 5;
  std::size_t context_dim = 4;

  // Episode length: fixed at min_stages when geometric_p == 0, otherwise
  // min_stages + Geometric(geometric_p) capped at max_stages.
  std::size_t min_stages = 12;
  std::size_t max_stages = 12;
  double geometric_p = 0.0;

  // Block weights of the softmax policy.
  double w_x = 1.0;
  double w_a = 0.0;
  double w_agg = 0.0;
  double w_lag = 0.0;
  // Multiplies every logit; large values approach a deterministic policy.
  double policy_scale = 1.0;

  double ar_coef = 0.7;
  double noise_scale = 0.5;
  double drift_scale = 0.5;

  double severity_base = 5.0;
  double severity_coupling = 1.0;
  double severity_noise = 0.5;

  std::uint64_t seed = 0;
  // Seed of the policy coefficients; defaults to `seed`. Fixing it while
  // varying `seed` draws fresh cohorts from one policy.
  std::optional<std::uint64_t> policy_seed;

  void validate() const;
};

nlohmann::json generator_config_to_json(const GeneratorConfig& cfg);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

// Seed-derived coefficient matrices shared by generation and the oracle.
struct PolicyParameters {
  Eigen::MatrixXd context_weights;  // K x d, multiplies X_t
  Eigen::MatrixXd lag_weights;      // K x d, multiplies X_{t-1}
  Eigen::MatrixXd drift;            // K x d, added to X_{t+1} after action a
  Eigen::VectorXd severity_loadings;  // d
};

PolicyParameters policy_parameters(const GeneratorConfig& cfg);

// Writes p(a | history) for every action into out. counts holds the number of
// times each action was taken at stages 1..t-1; prev is the default action at
// t = 1 and x_lag equals x_t there.
void policy_probabilities(const GeneratorConfig& cfg, const PolicyParameters& params,
                          std::span<const double> x_t, std::span<const double> x_lag,
                          std::size_t prev, std::span<const double> counts,
                          std::span<double> out);

CohortSchema synthetic_schema(const GeneratorConfig& cfg);

struct SyntheticCohort {
  CohortSchema schema;
  EpisodeSet episodes;
  Matrix oracle;  // one row per (patient, stage), in episode order
};

SyntheticCohort generate_cohort(const GeneratorConfig& cfg);

struct OracleResult {
  Matrix probs;
  std::vector<std::size_t> actions;
  double auroc = 0.0;
};

// Recomputes the generating probabilities from stored histories.
OracleResult oracle_probabilities(const GeneratorConfig& cfg, const EpisodeSet& episodes);

void write_oracle_csv(std::ostream& out, const SyntheticCohort& cohort);

}  // namespace histpolicy

#endif  // HISTPOLICY_SYNTHGEN_H_

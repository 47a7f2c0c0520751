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

// State construction S_t = f(H_t): current context, previous action,
// truncated history windows and history aggregates.

#ifndef HISTPOLICY_STATEREP_H_
#define HISTPOLICY_STATEREP_H_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "histpolicy/dataset.h"
#include "json.hpp"

namespace histpolicy {

enum class AggregateOp { kNone, kSum, kMax, kMean };

const char* aggregate_op_name(AggregateOp op);
AggregateOp parse_aggregate_op(const std::string& name);

struct StateSpec {
  bool include_current = false;
  bool include_prev_action = false;
  // Truncation depth. Setting it implies the current context and the previous
  // action; k = 0 is exactly {X_t, A_{t-1}}.
  std::optional<int> window_k;
  AggregateOp aggregate = AggregateOp::kNone;

  // Throws ConfigError when nothing would be included or k < 0.
  void validate() const;
  bool uses_current() const { return include_current || window_k.has_value(); }
  bool uses_prev_action() const {
    return include_prev_action || window_k.has_value();
  }
  // Short identifier such as "X_t", "A_t-1", "H(1)+Hbar_sum".
  std::string label() const;

  bool operator==(const StateSpec&) const = default;
};

nlohmann::json state_spec_to_json(const StateSpec& spec);
StateSpec state_spec_from_json(const nlohmann::json& j);

// The seven hand-crafted representations compared in the experiments, in
// order: X_t, A_{t-1}, H(0), Hbar, {H(0), Hbar}, {H(1), Hbar}, {H(2), Hbar}.
std::vector<StateSpec> standard_states(AggregateOp op);

// History aggregates at 1-based stage t: op over X_1..X_t for every
// aggregate-eligible column, then op over the one-hot actions A_1..A_{t-1}.
// An empty action prefix aggregates to 0 for every operator.
std::vector<double> aggregate_history(const NumericEpisodeSet& set,
                                      const NumericEpisode& episode,
                                      std::size_t t, AggregateOp op);
std::vector<std::string> aggregate_feature_names(const NumericEpisodeSet& set,
                                                 AggregateOp op);

// Lag-eligible contexts at lags 0..k followed by one-hot actions at lags
// 1..k+1. Stages before the first are padded with the stage-1 context and the
// default action.
std::vector<double> truncate_history(const NumericEpisodeSet& set,
                                     const NumericEpisode& episode,
                                     std::size_t t, int k);
std::vector<std::string> truncation_feature_names(const NumericEpisodeSet& set,
                                                  int k);

// Flattened (patient, stage) design matrix.
struct StateMatrix {
  std::vector<std::string> feature_names;
  std::vector<std::string> action_labels;
  std::size_t default_action = 0;

  std::size_t rows = 0;
  std::vector<double> values;  // rows x cols, row-major
  std::vector<std::size_t> labels;
  std::vector<std::size_t> patient;  // index into patient_ids
  std::vector<std::string> patient_ids;
  std::vector<std::size_t> stage;  // 1-based
  std::vector<std::size_t> prev_action;
  std::vector<std::optional<double>> severity;
  std::vector<int> fold;

  std::size_t cols() const { return feature_names.size(); }
  std::size_t num_actions() const { return action_labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * cols(), cols()};
  }
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }

  // Rows in the given order; patient_ids is kept whole.
  StateMatrix subset(std::span<const std::size_t> row_indices) const;
};

StateMatrix assemble_state(const NumericEpisodeSet& set, const StateSpec& spec);

// Header row followed by one row per stage: patient_id, t, action, features.
void write_state_csv(std::ostream& out, const StateMatrix& m);

}  // namespace histpolicy

#endif  // HISTPOLICY_STATEREP_H_

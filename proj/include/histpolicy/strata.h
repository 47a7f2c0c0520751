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

// Stratified evaluation: severity-trajectory subgroups, per-stage metrics,
// switch states and the decision-tree complexity sweep.

#ifndef HISTPOLICY_STRATA_H_
#define HISTPOLICY_STRATA_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "histpolicy/dataset.h"
#include "histpolicy/matrix.h"
#include "histpolicy/models.h"
#include "histpolicy/staterep.h"

namespace histpolicy {

inline constexpr int kSeverityGroups = 6;

// Group 1..6 for an average per-stage change in severity.
int severity_group(double rate);

struct SubgroupAssignment {
  std::map<std::string, int> group;  // patient_id -> 1..6
  std::vector<std::string> excluded;
  std::vector<std::string> warnings;

  std::optional<int> find(const std::string& patient_id) const;
};

SubgroupAssignment assign_severity_groups(const EpisodeSet& episodes);
SubgroupAssignment assign_severity_groups(const NumericEpisodeSet& episodes);

// Metric on a row subset; may throw UndefinedMetricError.
using RowMetric = std::function<double(const Matrix& probs, std::span<const std::size_t> labels)>;

RowMetric auroc_metric();
RowMetric accuracy_metric();

struct StageSeries {
  std::vector<std::optional<double>> value;  // index t-1
  std::vector<std::size_t> count;
};

// Rows are taken from probs and matrix.labels; stages beyond max_stage are
// ignored and undefined stages are left empty.
StageSeries metric_by_stage(const StateMatrix& matrix, const Matrix& probs,
                            const RowMetric& metric, std::size_t max_stage);
StageSeries metric_by_stage(const StateMatrix& matrix, const PolicyModel& model,
                            const RowMetric& metric, std::size_t max_stage);

struct GroupSeries {
  std::vector<std::optional<double>> value;  // index group-1
  std::vector<std::size_t> count;            // rows
  std::vector<std::size_t> patients;
};

GroupSeries metric_by_group(const StateMatrix& matrix, const Matrix& probs,
                            const SubgroupAssignment& groups, const RowMetric& metric);

// Row indices where A_t differs from A_{t-1}; at t = 1 the previous action is
// the default action.
std::vector<std::size_t> switch_rows(const StateMatrix& matrix);
StateMatrix filter_switch_states(const StateMatrix& matrix);

struct SweepOptions {
  std::size_t n_models = 500;
  std::size_t bucket_width = 5;
  std::uint64_t seed = 0;
  DatasetProfile profile = DatasetProfile::kSepsisLike;
  // Overrides the profile's decision-tree space when set.
  std::optional<HyperparamSpace> space;
  std::size_t threads = 0;  // 0 selects the default
};

struct SweepBucket {
  std::size_t min_leaves = 0;
  std::size_t max_leaves = 0;
  std::size_t n_models = 0;
  std::size_t selected_leaves = 0;
  nlohmann::json selected_params;
  double val_auroc = 0.0;
  std::optional<double> test_auroc;  // switch states
  std::optional<double> test_auroc_all;
};

struct SweepResult {
  StateSpec spec;
  std::vector<SweepBucket> buckets;  // ordered, empty buckets omitted
  std::vector<std::size_t> leaf_counts;
  std::size_t failures = 0;
  std::size_t undefined = 0;  // models without a defined validation AUROC
};

std::vector<SweepResult> tree_complexity_sweep(const NumericEpisodeSet& train,
                                               const NumericEpisodeSet& val,
                                               const NumericEpisodeSet& test,
                                               const std::vector<StateSpec>& specs,
                                               const SweepOptions& options = {});

nlohmann::json sweep_result_to_json(const SweepResult& r);
SweepResult sweep_result_from_json(const nlohmann::json& j);

}  // namespace histpolicy

#endif  // HISTPOLICY_STRATA_H_

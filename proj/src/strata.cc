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

#include "histpolicy/strata.h"

#include <cmath>
#include <limits>

#include "histpolicy/errors.h"
#include "histpolicy/metrics.h"
#include "histpolicy/parallel.h"

namespace histpolicy {

namespace {

// Shared by the raw and numeric episode overloads.
void assign_one(const std::string& id, const std::vector<std::optional<double>>& severity,
                SubgroupAssignment& out) {
  if (severity.size() < 2) {
    out.excluded.push_back(id);
    out.warnings.push_back("patient " + id + ": fewer than two stages, excluded from subgroups");
    return;
  }
  for (const auto& s : severity) {
    if (!s || !std::isfinite(*s)) {
      out.excluded.push_back(id);
      out.warnings.push_back("patient " + id + ": missing severity, excluded from subgroups");
      return;
    }
  }
  const double rate =
      (*severity.back() - *severity.front()) / static_cast<double>(severity.size() - 1);
  out.group[id] = severity_group(rate);
}

Matrix take_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::optional<double> metric_on(const Matrix& probs, const std::vector<std::size_t>& labels,
                                std::span<const std::size_t> rows, const RowMetric& metric) {
  if (rows.empty()) return std::nullopt;
  std::vector<std::size_t> sub(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) sub[i] = labels[rows[i]];
  try {
    return metric(take_rows(probs, rows), sub);
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

std::optional<double> switch_auroc(const PolicyModel& model, const StateMatrix& m) {
  if (m.rows == 0) return std::nullopt;
  try {
    return auroc_multiclass(model.predict_proba(m), m.labels);
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

int severity_group(double rate) {
  if (std::isnan(rate)) throw DataError("severity rate is NaN");
  if (rate < -0.4) return 1;
  if (rate < -0.15) return 2;
  if (rate < 0.0) return 3;
  if (rate < 0.15) return 4;
  if (rate < 0.4) return 5;
  return 6;
}

std::optional<int> SubgroupAssignment::find(const std::string& patient_id) const {
  auto it = group.find(patient_id);
  if (it == group.end()) return std::nullopt;
  return it->second;
}

SubgroupAssignment assign_severity_groups(const EpisodeSet& episodes) {
  SubgroupAssignment out;
  std::vector<std::optional<double>> severity;
  for (const auto& ep : episodes) {
    severity.clear();
    for (const auto& st : ep.stages) severity.push_back(st.severity);
    assign_one(ep.patient_id, severity, out);
  }
  return out;
}

SubgroupAssignment assign_severity_groups(const NumericEpisodeSet& episodes) {
  SubgroupAssignment out;
  for (const auto& ep : episodes.episodes) assign_one(ep.patient_id, ep.severity, out);
  return out;
}

RowMetric auroc_metric() {
  return [](const Matrix& probs, std::span<const std::size_t> labels) {
    return auroc_multiclass(probs, labels);
  };
}

RowMetric accuracy_metric() {
  return [](const Matrix& probs, std::span<const std::size_t> labels) {
    return accuracy(probs, labels);
  };
}

StageSeries metric_by_stage(const StateMatrix& matrix, const Matrix& probs,
                            const RowMetric& metric, std::size_t max_stage) {
  if (probs.rows != matrix.rows) throw ContractError("probabilities do not match state rows");
  std::vector<std::vector<std::size_t>> rows(max_stage);
  for (std::size_t i = 0; i < matrix.rows; ++i) {
    const std::size_t t = matrix.stage[i];
    if (t >= 1 && t <= max_stage) rows[t - 1].push_back(i);
  }
  StageSeries out;
  for (std::size_t t = 0; t < max_stage; ++t) {
    out.count.push_back(rows[t].size());
    out.value.push_back(metric_on(probs, matrix.labels, rows[t], metric));
  }
  return out;
}

StageSeries metric_by_stage(const StateMatrix& matrix, const PolicyModel& model,
                            const RowMetric& metric, std::size_t max_stage) {
  return metric_by_stage(matrix, model.predict_proba(matrix), metric, max_stage);
}

GroupSeries metric_by_group(const StateMatrix& matrix, const Matrix& probs,
                            const SubgroupAssignment& groups, const RowMetric& metric) {
  if (probs.rows != matrix.rows) throw ContractError("probabilities do not match state rows");
  std::vector<std::vector<std::size_t>> rows(kSeverityGroups);
  std::vector<std::optional<int>> patient_group(matrix.patient_ids.size());
  GroupSeries out;
  out.patients.assign(kSeverityGroups, 0);
  for (std::size_t p = 0; p < matrix.patient_ids.size(); ++p) {
    patient_group[p] = groups.find(matrix.patient_ids[p]);
    if (patient_group[p]) ++out.patients[*patient_group[p] - 1];
  }
  for (std::size_t i = 0; i < matrix.rows; ++i) {
    if (const auto g = patient_group[matrix.patient[i]]) rows[*g - 1].push_back(i);
  }
  for (int g = 0; g < kSeverityGroups; ++g) {
    out.count.push_back(rows[g].size());
    out.value.push_back(metric_on(probs, matrix.labels, rows[g], metric));
  }
  return out;
}

std::vector<std::size_t> switch_rows(const StateMatrix& matrix) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < matrix.rows; ++i) {
    if (matrix.labels[i] != matrix.prev_action[i]) rows.push_back(i);
  }
  return rows;
}

StateMatrix filter_switch_states(const StateMatrix& matrix) {
  const auto rows = switch_rows(matrix);
  return matrix.subset(rows);
}

std::vector<SweepResult> tree_complexity_sweep(const NumericEpisodeSet& train,
                                               const NumericEpisodeSet& val,
                                               const NumericEpisodeSet& test,
                                               const std::vector<StateSpec>& specs,
                                               const SweepOptions& options) {
  if (options.n_models == 0) throw ConfigError("sweep needs at least one model");
  if (options.bucket_width == 0) throw ConfigError("bucket width must be positive");
  const HyperparamSpace space =
      options.space ? *options.space : HyperparamSpace::for_profile(options.profile);

  std::vector<SweepResult> results;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const StateSpec& spec = specs[s];
    const StateMatrix tr = assemble_state(train, spec);
    const StateMatrix va = filter_switch_states(assemble_state(val, spec));
    const StateMatrix te_all = assemble_state(test, spec);
    const StateMatrix te = filter_switch_states(te_all);

    const auto params = sample_hyperparams(space, ModelKind::kDecisionTree,
                                           options.seed + 7919 * s, options.n_models);
    std::vector<ModelPtr> models(params.size());
    std::vector<std::optional<double>> val_score(params.size());
    parallel_for(params.size(), options.threads, [&](std::size_t i) {
      try {
        models[i] = fit_model(params[i], tr, va, options.seed + i);
      } catch (const std::exception&) {
        models[i] = nullptr;
        return;
      }
      val_score[i] = switch_auroc(*models[i], va);
    });

    SweepResult res;
    res.spec = spec;
    std::map<std::size_t, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!models[i]) {
        ++res.failures;
        continue;
      }
      const auto& tree = static_cast<const DecisionTree&>(*models[i]);
      const std::size_t leaves = tree.leaf_count();
      res.leaf_counts.push_back(leaves);
      if (!val_score[i]) {
        ++res.undefined;
        continue;
      }
      buckets[(leaves - 1) / options.bucket_width].push_back(i);
    }
    for (const auto& [b, members] : buckets) {
      std::size_t best = members.front();
      for (std::size_t i : members) {
        if (*val_score[i] > *val_score[best]) best = i;
      }
      const auto& tree = static_cast<const DecisionTree&>(*models[best]);
      SweepBucket out;
      out.min_leaves = b * options.bucket_width + 1;
      out.max_leaves = (b + 1) * options.bucket_width;
      out.n_models = members.size();
      out.selected_leaves = tree.leaf_count();
      out.selected_params = hyperparams_to_json(params[best]);
      out.val_auroc = *val_score[best];
      out.test_auroc = switch_auroc(tree, te);
      out.test_auroc_all = switch_auroc(tree, te_all);
      res.buckets.push_back(std::move(out));
    }
    results.push_back(std::move(res));
  }
  return results;
}

nlohmann::json sweep_result_to_json(const SweepResult& r) {
  nlohmann::json buckets = nlohmann::json::array();
  for (const auto& b : r.buckets) {
    buckets.push_back({{"min_leaves", b.min_leaves},
                       {"max_leaves", b.max_leaves},
                       {"n_models", b.n_models},
                       {"selected_leaves", b.selected_leaves},
                       {"selected_params", b.selected_params},
                       {"val_auroc", b.val_auroc},
                       {"test_auroc", optional_json(b.test_auroc)},
                       {"test_auroc_all", optional_json(b.test_auroc_all)}});
  }
  return {{"spec", state_spec_to_json(r.spec)},
          {"buckets", buckets},
          {"leaf_counts", r.leaf_counts},
          {"failures", r.failures},
          {"undefined", r.undefined}};
}

SweepResult sweep_result_from_json(const nlohmann::json& j) {
  SweepResult r;
  try {
    r.spec = state_spec_from_json(j.at("spec"));
    for (const auto& b : j.at("buckets")) {
      SweepBucket out;
      out.min_leaves = b.at("min_leaves").get<std::size_t>();
      out.max_leaves = b.at("max_leaves").get<std::size_t>();
      out.n_models = b.at("n_models").get<std::size_t>();
      out.selected_leaves = b.at("selected_leaves").get<std::size_t>();
      out.selected_params = b.at("selected_params");
      out.val_auroc = b.at("val_auroc").get<double>();
      out.test_auroc = optional_from(b.at("test_auroc"));
      out.test_auroc_all = optional_from(b.at("test_auroc_all"));
      r.buckets.push_back(std::move(out));
    }
    r.leaf_counts = j.at("leaf_counts").get<std::vector<std::size_t>>();
    r.failures = j.at("failures").get<std::size_t>();
    r.undefined = j.at("undefined").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed sweep result: ") + e.what());
  }
  return r;
}

}  // namespace histpolicy

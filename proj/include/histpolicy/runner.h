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

// Experiment protocol: repeated splits, random hyperparameter search,
// validation selection, test evaluation and report rendering.

#ifndef HISTPOLICY_RUNNER_H_
#define HISTPOLICY_RUNNER_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "histpolicy/dataset.h"
#include "histpolicy/metrics.h"
#include "histpolicy/models.h"
#include "histpolicy/ope.h"
#include "histpolicy/staterep.h"
#include "histpolicy/strata.h"
#include "histpolicy/synthgen.h"
#include "json.hpp"

namespace histpolicy {

struct ExperimentConfig {
  std::string dataset = "synthetic";

  // Exactly one data source: an episode file with its schema, or a generator.
  std::optional<std::filesystem::path> data_path;
  std::optional<CohortSchema> schema;
  std::optional<GeneratorConfig> generator;

  std::vector<StateSpec> states;  // empty means the seven standard specs
  AggregateOp standard_aggregate = AggregateOp::kSum;
  std::vector<ModelKind> models = {ModelKind::kLogisticRegression, ModelKind::kDecisionTree};

  DatasetProfile profile = DatasetProfile::kSepsisLike;
  std::optional<SelectionMetric> selection;  // defaults to the profile's metric
  std::optional<HyperparamSpace> space;      // defaults to the profile's space

  std::size_t n_candidates = 5;
  std::size_t n_splits = 5;
  std::uint64_t seed = 0;
  double test_frac = 0.2;
  double val_frac = 0.2;

  std::size_t bootstrap_replicates = 1000;
  double confidence_level = 0.95;
  std::size_t calibration_bins = 10;
  std::size_t max_stage = 10;

  // Decision-tree complexity sweep on the first split.
  bool sweep = false;
  std::size_t sweep_models = 500;
  std::size_t sweep_bucket_width = 5;
  std::vector<StateSpec> sweep_states;  // empty means `states`

  // Switch-state confusion between two state specs for one model kind.
  std::optional<std::string> confusion_reference;   // state label
  std::optional<std::string> confusion_comparison;  // state label
  std::optional<ModelKind> confusion_model;

  std::filesystem::path output_dir = "report";
  std::size_t threads = 0;  // 0 reads HISTPOLICY_THREADS

  void validate() const;
  std::vector<StateSpec> resolved_states() const;
  SelectionMetric resolved_selection() const;
  HyperparamSpace resolved_space() const;
};

// Relative paths inside the JSON are resolved against base_dir.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir = {});
nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Replaces the experiment seed and the generator seed.
void override_seed(ExperimentConfig& cfg, std::uint64_t seed);

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

// Index of the best candidate by the validation metric; the lowest index wins
// ties and null candidates are ignored. Throws FitError if all are null.
std::size_t select_best_index(std::span<const ModelPtr> candidates, const StateMatrix& val,
                              SelectionMetric metric);
ModelPtr select_best_candidate(std::span<const ModelPtr> candidates, const StateMatrix& val,
                               SelectionMetric metric);
double validation_score(const PolicyModel& model, const StateMatrix& val,
                        SelectionMetric metric);

struct CellResult {
  StateSpec state;
  ModelKind model = ModelKind::kLogisticRegression;
  std::optional<std::string> skip_reason;
  std::size_t fits_attempted = 0;
  std::size_t fits_failed = 0;
  std::vector<std::string> failures;

  // One entry per split; empty when that split produced no model.
  std::vector<std::optional<double>> split_auroc;
  std::vector<std::optional<double>> split_accuracy;
  std::vector<nlohmann::json> selected;

  // Pooled test rows of all splits, bootstrapped over (split, patient) units.
  MetricEstimate auroc;
  MetricEstimate accuracy;
  MetricEstimate ece;
  MetricEstimate sce;
  std::optional<double> mean_split_auroc;
  std::size_t test_rows = 0;
  std::size_t test_units = 0;

  // First split only.
  StageSeries by_stage;
  std::optional<GroupSeries> by_group;
  std::optional<double> switch_auroc;
  std::size_t switch_rows = 0;
  std::optional<ProductCurve> ope;
};

struct ConfusionResult {
  std::string reference;
  std::string comparison;
  ModelKind model = ModelKind::kLogisticRegression;
  std::size_t rows = 0;
  std::vector<std::vector<std::size_t>> counts;
};

struct RunMetadata {
  std::vector<std::uint64_t> split_seeds;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  double duration_seconds = 0.0;
  std::vector<double> split_seconds;
  std::string version;
};

struct ExperimentReport {
  std::string dataset;
  nlohmann::json config;
  std::vector<std::string> action_labels;
  std::vector<CellResult> cells;  // state-major, model-minor
  std::size_t fits_attempted = 0;
  std::optional<ConfusionResult> confusion;
  std::vector<SweepResult> sweep;
  std::vector<double> oracle_auroc;  // per split, synthetic data only
  bool has_severity = false;
  std::vector<std::string> notes;
  std::vector<std::string> warnings;
  RunMetadata metadata;

  // Selected first-split models with their preprocessing, keyed by
  // "<state>__<model>"; not part of the JSON form.
  std::vector<std::pair<std::string, nlohmann::json>> bundles;

  const CellResult* find(const std::string& state_label, ModelKind model) const;
};

nlohmann::json report_to_json(const ExperimentReport& r);
ExperimentReport report_from_json(const nlohmann::json& j);

// Loads the configured data source.
struct LoadedData {
  CohortSchema schema;
  EpisodeSet episodes;
};
LoadedData load_experiment_data(const ExperimentConfig& cfg);

ExperimentReport run_experiment(const ExperimentConfig& cfg);

// Runs only the complexity sweep on the first split.
std::vector<SweepResult> run_sweep(const ExperimentConfig& cfg);

// A fitted model packaged with everything needed to score raw episodes.
nlohmann::json make_model_bundle(const PolicyModel& model, const Preprocessor& prep,
                                 const StateSpec& spec);
struct ModelBundle {
  ModelPtr model;
  Preprocessor preprocessor;
  StateSpec spec;
};
ModelBundle load_model_bundle(const std::filesystem::path& path);

// Writes results.csv, metrics.csv, calibration.csv, by_group.csv,
// by_stage.csv, switch_confusion.csv, ope_curve.csv/.svg,
// complexity.csv/.svg, run_manifest.json and report.json. Returns the files
// written, relative to outdir.
std::vector<std::string> render_report(const ExperimentReport& report,
                                       const std::filesystem::path& outdir);

void write_complexity_csv(std::ostream& out, const std::vector<SweepResult>& sweep);
std::string complexity_svg(const std::vector<SweepResult>& sweep);

}  // namespace histpolicy

#endif  // HISTPOLICY_RUNNER_H_

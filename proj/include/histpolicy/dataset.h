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

// Episode data: loading, validation, preprocessing and patient-level splits.

#ifndef HISTPOLICY_DATASET_H_
#define HISTPOLICY_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace histpolicy {

// A raw context value: missing, numeric, or a category token.
using Value = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Value& v) {
  return std::holds_alternative<std::monostate>(v);
}

enum class VariableKind { kNumeric, kCategorical };

enum class Transform { kNone, kStandardize, kLogStandardize, kQuintiles };

struct Imputation {
  enum class Kind { kLocfThenMean, kLocfThenMode, kConstant };
  Kind kind = Kind::kLocfThenMean;
  Value constant;  // only used with kConstant
};

struct VariableSpec {
  std::string name;
  VariableKind kind = VariableKind::kNumeric;
  Transform transform = Transform::kStandardize;
  Imputation imputation;
  bool aggregate_eligible = true;
  bool lag_eligible = true;
};

struct CohortSchema {
  std::vector<VariableSpec> variables;
  std::vector<std::string> action_labels;
  std::string default_action;
  std::optional<std::string> severity_column;

  // Throws SchemaError when K < 2, the default action is undeclared, names
  // repeat, or a log transform is attached to a categorical variable.
  void validate() const;

  std::size_t num_actions() const { return action_labels.size(); }
  std::size_t action_index(std::string_view label) const;
  std::size_t default_action_index() const {
    return action_index(default_action);
  }
  std::optional<std::size_t> variable_index(std::string_view name) const;
};

CohortSchema schema_from_json(const nlohmann::json& j);
nlohmann::json schema_to_json(const CohortSchema& schema);
CohortSchema load_schema(const std::filesystem::path& path);

struct Stage {
  std::vector<Value> context;  // aligned with CohortSchema::variables
  std::size_t action = 0;      // index into CohortSchema::action_labels
  std::optional<double> severity;
};

struct Episode {
  std::string patient_id;
  std::vector<Stage> stages;
};

using EpisodeSet = std::vector<Episode>;

// Reads JSONL (one patient per line) or long-format CSV (one row per
// patient-stage). The format is chosen from the extension (.csv vs anything
// else), falling back to sniffing the first non-blank character.
EpisodeSet load_episodes(const std::filesystem::path& path,
                         const CohortSchema& schema);
EpisodeSet read_episodes_jsonl(std::istream& in, const CohortSchema& schema);
EpisodeSet read_episodes_csv(std::istream& in, const CohortSchema& schema);

void write_episodes_jsonl(std::ostream& out, const EpisodeSet& episodes,
                          const CohortSchema& schema);
void write_episodes_csv(std::ostream& out, const EpisodeSet& episodes,
                        const CohortSchema& schema);

std::size_t total_stages(const EpisodeSet& episodes);

// ---------------------------------------------------------------------------
// Numeric (model-ready) episodes.

// One numeric column produced by the preprocessor. Categorical and
// discretized variables expand to several one-hot columns that share the
// source variable's eligibility flags.
struct FeatureColumn {
  std::string name;
  std::size_t variable = 0;
  bool aggregate_eligible = true;
  bool lag_eligible = true;
};

struct NumericEpisode {
  std::string patient_id;
  std::size_t length = 0;
  std::size_t width = 0;
  std::vector<double> context;  // length x width, row-major
  std::vector<std::size_t> actions;
  std::vector<std::optional<double>> severity;

  // Context at 0-based stage index.
  std::span<const double> at(std::size_t stage) const {
    return {context.data() + stage * width, width};
  }
};

struct NumericEpisodeSet {
  std::vector<FeatureColumn> columns;
  std::vector<std::string> action_labels;
  std::size_t default_action = 0;
  std::vector<NumericEpisode> episodes;

  std::size_t width() const { return columns.size(); }
  std::size_t num_actions() const { return action_labels.size(); }
  std::size_t total_stages() const;
};

// Statistics fitted for one schema variable.
struct VariableStats {
  double impute_numeric = 0.0;  // training mean (or mode) used after LOCF
  std::string impute_token;     // training mode for categoricals
  double mean = 0.0;            // in the transformed domain
  double stddev = 1.0;
  bool zero_variance = false;
  std::vector<double> cuts;                // quintile cut points
  std::vector<std::string> vocabulary;     // one-hot vocabulary incl. "other"
};

inline constexpr double kLogEpsilon = 1e-6;
inline constexpr std::string_view kOtherToken = "other";

class Preprocessor {
 public:
  Preprocessor() = default;

  // Fits on training episodes only. Throws DataError when `train` is empty.
  static Preprocessor fit(const EpisodeSet& train, const CohortSchema& schema);

  NumericEpisodeSet apply(const EpisodeSet& episodes) const;

  // Per-patient LOCF followed by the fallback imputation. The result has no
  // missing entries; exposed for tests and the ingestion report.
  std::vector<Value> impute_series(std::size_t variable,
                                   const std::vector<Value>& series) const;

  const CohortSchema& schema() const { return schema_; }
  const std::vector<VariableStats>& stats() const { return stats_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  std::vector<FeatureColumn> columns() const;

  nlohmann::json to_json() const;
  static Preprocessor from_json(const nlohmann::json& j);

  // Stable digest of the fitted state, used for leakage checks.
  std::uint64_t fingerprint() const;

 private:
  void encode(std::size_t variable, const Value& v,
              std::vector<double>& out) const;

  CohortSchema schema_;
  std::vector<VariableStats> stats_;
  std::vector<std::string> warnings_;
};

inline Preprocessor fit_preprocessor(const EpisodeSet& train,
                                     const CohortSchema& schema) {
  return Preprocessor::fit(train, schema);
}

inline NumericEpisodeSet apply_preprocessor(const EpisodeSet& episodes,
                                            const Preprocessor& prep) {
  return prep.apply(episodes);
}

// Percentile with linear interpolation between order statistics
// (position p * (n - 1) in the sorted sample). `sorted` must be ascending.
double interpolated_percentile(std::span<const double> sorted, double p);

struct DatasetSplit {
  EpisodeSet train;
  EpisodeSet val;
  EpisodeSet test;
};

// Patient-level split. The test fold takes round(test_frac * n) patients and
// validation takes round(val_frac * (n - n_test)) of the remainder.
DatasetSplit split_dataset(const EpisodeSet& episodes, std::uint64_t seed,
                           double test_frac = 0.2, double val_frac = 0.2);

}  // namespace histpolicy

#endif  // HISTPOLICY_DATASET_H_

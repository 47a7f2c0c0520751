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

#include "histpolicy/runner.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "histpolicy/csv.h"
#include "histpolicy/errors.h"
#include "histpolicy/parallel.h"
#include "histpolicy/svg.h"
#include "histpolicy/version.h"

namespace histpolicy {

using json = nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// JSON helpers

json opt_json(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json num_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double num_from(const json& j) {
  if (j.is_null()) return kNaN;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return kNaN;
  }
  return j.get<double>();
}

json bound_json(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return num_json(v);
}

json estimate_json(const MetricEstimate& e) {
  return {{"value", num_json(e.value)},     {"ci_low", bound_json(e.ci_low)},
          {"ci_high", bound_json(e.ci_high)}, {"n_bootstrap", e.n_bootstrap},
          {"n_undefined", e.n_undefined},     {"widened", e.widened}};
}

MetricEstimate estimate_from(const json& j) {
  MetricEstimate e;
  e.value = num_from(j.at("value"));
  e.ci_low = num_from(j.at("ci_low"));
  e.ci_high = num_from(j.at("ci_high"));
  e.n_bootstrap = j.at("n_bootstrap").get<std::size_t>();
  e.n_undefined = j.at("n_undefined").get<std::size_t>();
  e.widened = j.at("widened").get<bool>();
  return e;
}

json series_json(const std::vector<std::optional<double>>& v) {
  json out = json::array();
  for (const auto& x : v) out.push_back(opt_json(x));
  return out;
}

std::vector<std::optional<double>> series_from(const json& j) {
  std::vector<std::optional<double>> out;
  for (const auto& x : j) out.push_back(opt_from(x));
  return out;
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw ConfigError("unknown field '" + item.key() + "' in " + where);
    }
  }
}

SplitCriterion parse_criterion(const std::string& s) {
  if (s == "gini") return SplitCriterion::kGini;
  if (s == "entropy") return SplitCriterion::kEntropy;
  throw ConfigError("unknown split criterion '" + s + "'");
}

const char* criterion_name(SplitCriterion c) {
  return c == SplitCriterion::kGini ? "gini" : "entropy";
}

const char* selection_name(SelectionMetric m) {
  return m == SelectionMetric::kAuroc ? "auroc" : "accuracy";
}

SelectionMetric parse_selection(const std::string& s) {
  if (s == "auroc") return SelectionMetric::kAuroc;
  if (s == "accuracy") return SelectionMetric::kAccuracy;
  throw ConfigError("selection metric must be 'auroc' or 'accuracy', got '" + s + "'");
}

void apply_space_overrides(const json& j, HyperparamSpace& s) {
  reject_unknown(j,
                 {"lr_C", "lr_max_iter", "dt_criterion", "dt_min_samples_split", "dt_max_depth",
                  "rs_max_coef", "rs_max_size", "rs_pos_weight", "mlp_hidden",
                  "mlp_learning_rate", "mlp_max_epochs", "mlp_batch_size", "mlp_patience"},
                 "search_space");
  read_opt(j, "lr_C", s.lr_C);
  read_opt(j, "lr_max_iter", s.lr_max_iter);
  if (j.contains("dt_criterion")) {
    s.dt_criterion.clear();
    for (const auto& c : j.at("dt_criterion")) s.dt_criterion.push_back(parse_criterion(c.get<std::string>()));
  }
  read_opt(j, "dt_min_samples_split", s.dt_min_samples_split);
  read_opt(j, "dt_max_depth", s.dt_max_depth);
  read_opt(j, "rs_max_coef", s.rs_max_coef);
  read_opt(j, "rs_max_size", s.rs_max_size);
  read_opt(j, "rs_pos_weight", s.rs_pos_weight);
  read_opt(j, "mlp_hidden", s.mlp_hidden);
  read_opt(j, "mlp_learning_rate", s.mlp_learning_rate);
  read_opt(j, "mlp_max_epochs", s.mlp_max_epochs);
  read_opt(j, "mlp_batch_size", s.mlp_batch_size);
  read_opt(j, "mlp_patience", s.mlp_patience);
}

json space_json(const HyperparamSpace& s) {
  json crit = json::array();
  for (auto c : s.dt_criterion) crit.push_back(criterion_name(c));
  return {{"lr_C", s.lr_C},
          {"lr_max_iter", s.lr_max_iter},
          {"dt_criterion", crit},
          {"dt_min_samples_split", s.dt_min_samples_split},
          {"dt_max_depth", s.dt_max_depth},
          {"rs_max_coef", s.rs_max_coef},
          {"rs_max_size", s.rs_max_size},
          {"rs_pos_weight", s.rs_pos_weight},
          {"mlp_hidden", s.mlp_hidden},
          {"mlp_learning_rate", s.mlp_learning_rate},
          {"mlp_max_epochs", s.mlp_max_epochs},
          {"mlp_batch_size", s.mlp_batch_size},
          {"mlp_patience", s.mlp_patience}};
}

std::vector<StateSpec> parse_states(const json& j) {
  std::vector<StateSpec> out;
  if (j.is_string()) {
    if (j.get<std::string>() != "standard") throw ConfigError("states must be 'standard' or a list");
    return out;
  }
  if (!j.is_array()) throw ConfigError("states must be 'standard' or a list");
  for (const auto& s : j) {
    StateSpec spec = state_spec_from_json(s);
    spec.validate();
    out.push_back(spec);
  }
  return out;
}

json states_json(const std::vector<StateSpec>& states) {
  json out = json::array();
  for (const auto& s : states) out.push_back(state_spec_to_json(s));
  return out;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

std::string cell_key(const StateSpec& s, ModelKind m) {
  return s.label() + "__" + model_kind_name(m);
}

std::string fmt(double v) { return std::isfinite(v) ? csv::fixed(v) : "NA"; }
std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

struct Pool {
  std::vector<double> probs;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> units;
  std::size_t n_units = 0;
};

Matrix take_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::optional<double> safe_auroc(const Matrix& probs, std::span<const std::size_t> labels) {
  if (probs.rows == 0) return std::nullopt;
  try {
    return auroc_multiclass(probs, labels);
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

MetricEstimate estimate_or_nan(std::size_t n_units, const ResampleStatistic& stat,
                               const BootstrapOptions& opts) {
  try {
    return bootstrap_ci(n_units, stat, opts);
  } catch (const UndefinedMetricError&) {
  } catch (const DataError&) {
  }
  MetricEstimate e;
  e.value = e.ci_low = e.ci_high = kNaN;
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  const int sources = (data_path ? 1 : 0) + (generator ? 1 : 0);
  if (sources != 1) throw ConfigError("exactly one of a data file or a generator is required");
  if (data_path && !schema) throw ConfigError("a data file needs a schema");
  if (schema) schema->validate();
  if (generator) generator->validate();
  if (n_candidates < 1) throw ConfigError("n_candidates must be >= 1");
  if (n_splits < 1) throw ConfigError("n_splits must be >= 1");
  if (models.empty()) throw ConfigError("at least one model kind is required");
  if (bootstrap_replicates < 1) throw ConfigError("bootstrap replicates must be >= 1");
  if (!(confidence_level > 0.0 && confidence_level < 1.0)) {
    throw ConfigError("confidence level must lie in (0, 1)");
  }
  if (calibration_bins < 1) throw ConfigError("calibration_bins must be >= 1");
  if (max_stage < 1) throw ConfigError("max_stage must be >= 1");
  if (sweep && (sweep_models < 1 || sweep_bucket_width < 1)) {
    throw ConfigError("sweep needs n_models >= 1 and bucket_width >= 1");
  }
  for (const auto& s : states) s.validate();
  for (const auto& s : sweep_states) s.validate();
  if (!(test_frac > 0.0 && test_frac < 1.0 && val_frac >= 0.0 && val_frac < 1.0)) {
    throw ConfigError("split fractions out of range");
  }
}

std::vector<StateSpec> ExperimentConfig::resolved_states() const {
  return states.empty() ? standard_states(standard_aggregate) : states;
}

SelectionMetric ExperimentConfig::resolved_selection() const {
  return selection.value_or(default_selection_metric(profile));
}

HyperparamSpace ExperimentConfig::resolved_space() const {
  return space.value_or(HyperparamSpace::for_profile(profile));
}

ExperimentConfig experiment_config_from_json(const json& j,
                                             const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  reject_unknown(j,
                 {"dataset", "data", "states", "aggregate", "models", "profile", "selection",
                  "search_space", "n_candidates", "n_splits", "seed", "test_frac", "val_frac",
                  "bootstrap", "level", "calibration_bins", "max_stage", "sweep", "confusion",
                  "output_dir", "threads"},
                 "experiment config");
  ExperimentConfig c;
  try {
    read_opt(j, "dataset", c.dataset);
    if (!j.contains("data")) throw ConfigError("experiment config needs a 'data' section");
    const json& data = j.at("data");
    reject_unknown(data, {"generator", "path", "schema"}, "data");
    if (data.contains("generator")) c.generator = generator_config_from_json(data.at("generator"));
    if (data.contains("path")) {
      std::filesystem::path p = data.at("path").get<std::string>();
      c.data_path = p.is_relative() ? base_dir / p : p;
    }
    if (data.contains("schema")) {
      const json& s = data.at("schema");
      if (s.is_string()) {
        std::filesystem::path p = s.get<std::string>();
        c.schema = load_schema(p.is_relative() ? base_dir / p : p);
      } else {
        c.schema = schema_from_json(s);
      }
    }
    if (j.contains("aggregate")) c.standard_aggregate = parse_aggregate_op(j.at("aggregate").get<std::string>());
    if (j.contains("states")) c.states = parse_states(j.at("states"));
    if (j.contains("models")) {
      c.models.clear();
      for (const auto& m : j.at("models")) c.models.push_back(parse_model_kind(m.get<std::string>()));
    }
    if (j.contains("profile")) c.profile = parse_profile(j.at("profile").get<std::string>());
    if (j.contains("selection")) c.selection = parse_selection(j.at("selection").get<std::string>());
    if (j.contains("search_space")) {
      HyperparamSpace s = HyperparamSpace::for_profile(c.profile);
      apply_space_overrides(j.at("search_space"), s);
      c.space = s;
    }
    read_opt(j, "n_candidates", c.n_candidates);
    read_opt(j, "n_splits", c.n_splits);
    read_opt(j, "seed", c.seed);
    read_opt(j, "test_frac", c.test_frac);
    read_opt(j, "val_frac", c.val_frac);
    read_opt(j, "bootstrap", c.bootstrap_replicates);
    read_opt(j, "level", c.confidence_level);
    read_opt(j, "calibration_bins", c.calibration_bins);
    read_opt(j, "max_stage", c.max_stage);
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      if (s.is_boolean()) {
        c.sweep = s.get<bool>();
      } else {
        reject_unknown(s, {"n_models", "bucket_width", "states"}, "sweep");
        c.sweep = true;
        read_opt(s, "n_models", c.sweep_models);
        read_opt(s, "bucket_width", c.sweep_bucket_width);
        if (s.contains("states")) c.sweep_states = parse_states(s.at("states"));
      }
    }
    if (j.contains("confusion")) {
      const json& s = j.at("confusion");
      reject_unknown(s, {"reference", "comparison", "model"}, "confusion");
      if (s.contains("reference")) c.confusion_reference = s.at("reference").get<std::string>();
      if (s.contains("comparison")) c.confusion_comparison = s.at("comparison").get<std::string>();
      if (s.contains("model")) c.confusion_model = parse_model_kind(s.at("model").get<std::string>());
    }
    if (j.contains("output_dir")) {
      std::filesystem::path p = j.at("output_dir").get<std::string>();
      c.output_dir = p.is_relative() ? base_dir / p : p;
    }
    read_opt(j, "threads", c.threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

json experiment_config_to_json(const ExperimentConfig& c) {
  json data = json::object();
  if (c.generator) data["generator"] = generator_config_to_json(*c.generator);
  if (c.data_path) data["path"] = c.data_path->string();
  if (c.schema) data["schema"] = schema_to_json(*c.schema);
  json models = json::array();
  for (auto m : c.models) models.push_back(model_kind_name(m));
  json out = {{"dataset", c.dataset},
              {"data", data},
              {"states", states_json(c.resolved_states())},
              {"aggregate", aggregate_op_name(c.standard_aggregate)},
              {"models", models},
              {"profile", profile_name(c.profile)},
              {"selection", selection_name(c.resolved_selection())},
              {"search_space", space_json(c.resolved_space())},
              {"n_candidates", c.n_candidates},
              {"n_splits", c.n_splits},
              {"seed", c.seed},
              {"test_frac", c.test_frac},
              {"val_frac", c.val_frac},
              {"bootstrap", c.bootstrap_replicates},
              {"level", c.confidence_level},
              {"calibration_bins", c.calibration_bins},
              {"max_stage", c.max_stage},
              {"output_dir", c.output_dir.string()},
              {"threads", c.threads}};
  if (c.sweep) {
    out["sweep"] = {{"n_models", c.sweep_models},
                    {"bucket_width", c.sweep_bucket_width},
                    {"states", states_json(c.sweep_states.empty() ? c.resolved_states()
                                                                  : c.sweep_states)}};
  }
  json conf = json::object();
  if (c.confusion_reference) conf["reference"] = *c.confusion_reference;
  if (c.confusion_comparison) conf["comparison"] = *c.confusion_comparison;
  if (c.confusion_model) conf["model"] = model_kind_name(*c.confusion_model);
  if (!conf.empty()) out["confusion"] = conf;
  return out;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return experiment_config_from_json(j, path.parent_path());
}

void override_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  if (cfg.generator) cfg.generator->seed = seed;
}

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  // splitmix64 over the sequence
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t p : parts) {
    h += p + 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    h = z ^ (z >> 31);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Selection

double validation_score(const PolicyModel& model, const StateMatrix& val,
                        SelectionMetric metric) {
  if (val.rows == 0) return -std::numeric_limits<double>::infinity();
  const Matrix probs = model.predict_proba(val);
  if (metric == SelectionMetric::kAccuracy) return accuracy(probs, val.labels);
  return safe_auroc(probs, val.labels).value_or(-std::numeric_limits<double>::infinity());
}

std::size_t select_best_index(std::span<const ModelPtr> candidates, const StateMatrix& val,
                              SelectionMetric metric) {
  if (candidates.empty()) throw ContractError("no candidates to select from");
  std::optional<std::size_t> best;
  double best_score = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!candidates[i]) continue;
    const double s = validation_score(*candidates[i], val, metric);
    if (!best || s > best_score) {
      best = i;
      best_score = s;
    }
  }
  if (!best) throw FitError("every candidate failed to fit");
  return *best;
}

ModelPtr select_best_candidate(std::span<const ModelPtr> candidates, const StateMatrix& val,
                               SelectionMetric metric) {
  return candidates[select_best_index(candidates, val, metric)];
}

// ---------------------------------------------------------------------------
// Data and bundles

LoadedData load_experiment_data(const ExperimentConfig& cfg) {
  if (cfg.generator) {
    auto cohort = generate_cohort(*cfg.generator);
    return {std::move(cohort.schema), std::move(cohort.episodes)};
  }
  if (!cfg.data_path || !cfg.schema) throw ConfigError("no data source configured");
  return {*cfg.schema, load_episodes(*cfg.data_path, *cfg.schema)};
}

json make_model_bundle(const PolicyModel& model, const Preprocessor& prep, const StateSpec& spec) {
  return {{"format_version", kModelFormatVersion},
          {"model", model.to_json()},
          {"preprocessor", prep.to_json()},
          {"spec", state_spec_to_json(spec)}};
}

ModelBundle load_model_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what(), 1);
  }
  ModelBundle b;
  try {
    b.model = model_from_json(j.at("model"));
    b.preprocessor = Preprocessor::from_json(j.at("preprocessor"));
    b.spec = state_spec_from_json(j.at("spec"));
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed model bundle: ") + e.what());
  }
  return b;
}

// ---------------------------------------------------------------------------
// Report lookup and serialization

const CellResult* ExperimentReport::find(const std::string& state_label, ModelKind model) const {
  for (const auto& c : cells) {
    if (c.state.label() == state_label && c.model == model) return &c;
  }
  return nullptr;
}

json report_to_json(const ExperimentReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    json cell = {{"state", state_spec_to_json(c.state)},
                 {"model", model_kind_name(c.model)},
                 {"skip_reason", c.skip_reason ? json(*c.skip_reason) : json(nullptr)},
                 {"fits_attempted", c.fits_attempted},
                 {"fits_failed", c.fits_failed},
                 {"failures", c.failures},
                 {"split_auroc", series_json(c.split_auroc)},
                 {"split_accuracy", series_json(c.split_accuracy)},
                 {"selected", c.selected},
                 {"auroc", estimate_json(c.auroc)},
                 {"accuracy", estimate_json(c.accuracy)},
                 {"ece", estimate_json(c.ece)},
                 {"sce", estimate_json(c.sce)},
                 {"mean_split_auroc", opt_json(c.mean_split_auroc)},
                 {"test_rows", c.test_rows},
                 {"test_units", c.test_units},
                 {"by_stage", {{"value", series_json(c.by_stage.value)},
                               {"count", c.by_stage.count}}},
                 {"switch_auroc", opt_json(c.switch_auroc)},
                 {"switch_rows", c.switch_rows}};
    cell["by_group"] = c.by_group ? json{{"value", series_json(c.by_group->value)},
                                         {"count", c.by_group->count},
                                         {"patients", c.by_group->patients}}
                                  : json(nullptr);
    cell["ope"] = c.ope ? product_curve_to_json(*c.ope) : json(nullptr);
    cells.push_back(std::move(cell));
  }
  json sweep = json::array();
  for (const auto& s : r.sweep) sweep.push_back(sweep_result_to_json(s));
  json out = {{"dataset", r.dataset},
              {"config", r.config},
              {"action_labels", r.action_labels},
              {"cells", cells},
              {"fits_attempted", r.fits_attempted},
              {"sweep", sweep},
              {"oracle_auroc", r.oracle_auroc},
              {"has_severity", r.has_severity},
              {"notes", r.notes},
              {"warnings", r.warnings},
              {"metadata", {{"split_seeds", r.metadata.split_seeds},
                            {"seed", r.metadata.seed},
                            {"threads", r.metadata.threads},
                            {"duration_seconds", r.metadata.duration_seconds},
                            {"split_seconds", r.metadata.split_seconds},
                            {"version", r.metadata.version}}}};
  if (r.confusion) {
    out["confusion"] = {{"reference", r.confusion->reference},
                        {"comparison", r.confusion->comparison},
                        {"model", model_kind_name(r.confusion->model)},
                        {"rows", r.confusion->rows},
                        {"counts", r.confusion->counts}};
  } else {
    out["confusion"] = nullptr;
  }
  return out;
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  try {
    r.dataset = j.at("dataset").get<std::string>();
    r.config = j.at("config");
    r.action_labels = j.at("action_labels").get<std::vector<std::string>>();
    for (const auto& cj : j.at("cells")) {
      CellResult c;
      c.state = state_spec_from_json(cj.at("state"));
      c.model = parse_model_kind(cj.at("model").get<std::string>());
      if (!cj.at("skip_reason").is_null()) c.skip_reason = cj.at("skip_reason").get<std::string>();
      c.fits_attempted = cj.at("fits_attempted").get<std::size_t>();
      c.fits_failed = cj.at("fits_failed").get<std::size_t>();
      c.failures = cj.at("failures").get<std::vector<std::string>>();
      c.split_auroc = series_from(cj.at("split_auroc"));
      c.split_accuracy = series_from(cj.at("split_accuracy"));
      c.selected = cj.at("selected").get<std::vector<json>>();
      c.auroc = estimate_from(cj.at("auroc"));
      c.accuracy = estimate_from(cj.at("accuracy"));
      c.ece = estimate_from(cj.at("ece"));
      c.sce = estimate_from(cj.at("sce"));
      c.mean_split_auroc = opt_from(cj.at("mean_split_auroc"));
      c.test_rows = cj.at("test_rows").get<std::size_t>();
      c.test_units = cj.at("test_units").get<std::size_t>();
      c.by_stage.value = series_from(cj.at("by_stage").at("value"));
      c.by_stage.count = cj.at("by_stage").at("count").get<std::vector<std::size_t>>();
      c.switch_auroc = opt_from(cj.at("switch_auroc"));
      c.switch_rows = cj.at("switch_rows").get<std::size_t>();
      if (!cj.at("by_group").is_null()) {
        GroupSeries g;
        g.value = series_from(cj.at("by_group").at("value"));
        g.count = cj.at("by_group").at("count").get<std::vector<std::size_t>>();
        g.patients = cj.at("by_group").at("patients").get<std::vector<std::size_t>>();
        c.by_group = g;
      }
      if (!cj.at("ope").is_null()) c.ope = product_curve_from_json(cj.at("ope"));
      r.cells.push_back(std::move(c));
    }
    r.fits_attempted = j.at("fits_attempted").get<std::size_t>();
    for (const auto& s : j.at("sweep")) r.sweep.push_back(sweep_result_from_json(s));
    r.oracle_auroc = j.at("oracle_auroc").get<std::vector<double>>();
    r.has_severity = j.at("has_severity").get<bool>();
    r.notes = j.at("notes").get<std::vector<std::string>>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    const json& m = j.at("metadata");
    r.metadata.split_seeds = m.at("split_seeds").get<std::vector<std::uint64_t>>();
    r.metadata.seed = m.at("seed").get<std::uint64_t>();
    r.metadata.threads = m.at("threads").get<std::size_t>();
    r.metadata.duration_seconds = m.at("duration_seconds").get<double>();
    r.metadata.split_seconds = m.at("split_seconds").get<std::vector<double>>();
    r.metadata.version = m.at("version").get<std::string>();
    if (!j.at("confusion").is_null()) {
      const json& c = j.at("confusion");
      ConfusionResult cr;
      cr.reference = c.at("reference").get<std::string>();
      cr.comparison = c.at("comparison").get<std::string>();
      cr.model = parse_model_kind(c.at("model").get<std::string>());
      cr.rows = c.at("rows").get<std::size_t>();
      cr.counts = c.at("counts").get<std::vector<std::vector<std::size_t>>>();
      r.confusion = cr;
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Protocol

namespace {

struct FitTask {
  std::size_t cell;
  std::size_t state;
  Hyperparams params;
  std::uint64_t seed;
};

struct FitOutcome {
  ModelPtr model;
  double score = -std::numeric_limits<double>::infinity();
  std::string error;
};

struct SplitData {
  EpisodeSet test_raw;
  Preprocessor prep;
  NumericEpisodeSet train, val, test;
};

SplitData prepare_split(const LoadedData& data, const ExperimentConfig& cfg, std::uint64_t seed) {
  SplitData s;
  DatasetSplit sp = split_dataset(data.episodes, seed, cfg.test_frac, cfg.val_frac);
  s.prep = Preprocessor::fit(sp.train, data.schema);
  s.train = s.prep.apply(sp.train);
  s.val = s.prep.apply(sp.val);
  s.test = s.prep.apply(sp.test);
  s.test_raw = std::move(sp.test);
  return s;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const LoadedData data = load_experiment_data(cfg);
  const auto states = cfg.resolved_states();
  const auto space = cfg.resolved_space();
  const auto selection = cfg.resolved_selection();
  const std::size_t threads = cfg.threads ? cfg.threads : default_thread_count();
  const std::size_t k = data.schema.num_actions();

  ExperimentReport rep;
  rep.dataset = cfg.dataset;
  rep.config = experiment_config_to_json(cfg);
  rep.action_labels = data.schema.action_labels;
  rep.has_severity = data.schema.severity_column.has_value();
  rep.metadata.seed = cfg.seed;
  rep.metadata.threads = threads;
  rep.metadata.version = kVersion;

  for (const auto& s : states) {
    for (auto m : cfg.models) {
      CellResult c;
      c.state = s;
      c.model = m;
      if (m == ModelKind::kRiskScore && k > 2) c.skip_reason = "unsupported: multiclass";
      rep.cells.push_back(std::move(c));
    }
  }
  const std::size_t n_models = cfg.models.size();
  std::vector<Pool> pools(rep.cells.size());

  // Confusion cells: reference/comparison states for one model kind.
  const std::string ref_label = cfg.confusion_reference.value_or(states.back().label());
  const std::string cmp_label = cfg.confusion_comparison.value_or(states.front().label());
  std::optional<ModelKind> conf_model = cfg.confusion_model;
  if (!conf_model) {
    for (auto m : cfg.models) {
      if (!(m == ModelKind::kRiskScore && k > 2)) {
        conf_model = m;
        break;
      }
    }
  }
  std::map<std::string, std::vector<std::size_t>> conf_predictions;
  std::vector<std::size_t> conf_rows;

  for (std::size_t split = 0; split < cfg.n_splits; ++split) {
    const auto split_started = std::chrono::steady_clock::now();
    const std::uint64_t split_seed = derive_seed({cfg.seed, 1, split});
    rep.metadata.split_seeds.push_back(split_seed);
    const SplitData sd = prepare_split(data, cfg, split_seed);
    if (split == 0) {
      for (const auto& w : sd.prep.warnings()) rep.warnings.push_back(w);
    }
    if (cfg.generator) {
      try {
        rep.oracle_auroc.push_back(oracle_probabilities(*cfg.generator, sd.test_raw).auroc);
      } catch (const UndefinedMetricError&) {
      }
    }

    struct Mats {
      StateMatrix train, val, test;
    };
    std::vector<Mats> mats(states.size());
    parallel_for(states.size(), threads, [&](std::size_t s) {
      mats[s].train = assemble_state(sd.train, states[s]);
      mats[s].val = assemble_state(sd.val, states[s]);
      mats[s].test = assemble_state(sd.test, states[s]);
    });

    std::vector<FitTask> tasks;
    for (std::size_t s = 0; s < states.size(); ++s) {
      for (std::size_t m = 0; m < n_models; ++m) {
        const std::size_t cell = s * n_models + m;
        if (rep.cells[cell].skip_reason) continue;
        const auto params = sample_hyperparams(space, cfg.models[m],
                                               derive_seed({cfg.seed, 2, split, s, m}),
                                               cfg.n_candidates);
        for (std::size_t c = 0; c < params.size(); ++c) {
          tasks.push_back({cell, s, params[c], derive_seed({cfg.seed, 3, split, cell, c})});
        }
      }
    }
    std::vector<FitOutcome> outcomes(tasks.size());
    parallel_for(tasks.size(), threads, [&](std::size_t i) {
      const FitTask& t = tasks[i];
      try {
        auto model = fit_model(t.params, mats[t.state].train, mats[t.state].val, t.seed);
        outcomes[i].score = validation_score(*model, mats[t.state].val, selection);
        outcomes[i].model = std::move(model);
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    });

    SubgroupAssignment groups;
    if (split == 0 && rep.has_severity) {
      groups = assign_severity_groups(sd.test_raw);
      for (const auto& w : groups.warnings) rep.warnings.push_back(w);
    }

    std::size_t i = 0;
    while (i < tasks.size()) {
      const std::size_t cell = tasks[i].cell;
      const std::size_t s = tasks[i].state;
      CellResult& cr = rep.cells[cell];
      std::optional<std::size_t> best;
      for (; i < tasks.size() && tasks[i].cell == cell; ++i) {
        ++cr.fits_attempted;
        if (!outcomes[i].model) {
          ++cr.fits_failed;
          if (cr.failures.size() < 10) cr.failures.push_back(outcomes[i].error);
          continue;
        }
        if (!best || outcomes[i].score > outcomes[*best].score) best = i;
      }
      if (!best) {
        cr.split_auroc.push_back(std::nullopt);
        cr.split_accuracy.push_back(std::nullopt);
        cr.selected.push_back(nullptr);
        continue;
      }
      const PolicyModel& model = *outcomes[*best].model;
      const StateMatrix& te = mats[s].test;
      const Matrix probs = model.predict_proba(te);
      cr.split_auroc.push_back(safe_auroc(probs, te.labels));
      cr.split_accuracy.push_back(te.rows ? std::optional(accuracy(probs, te.labels)) : std::nullopt);
      cr.selected.push_back(hyperparams_to_json(tasks[*best].params));

      Pool& pool = pools[cell];
      pool.probs.insert(pool.probs.end(), probs.data.begin(), probs.data.end());
      pool.labels.insert(pool.labels.end(), te.labels.begin(), te.labels.end());
      for (std::size_t r = 0; r < te.rows; ++r) pool.units.push_back(pool.n_units + te.patient[r]);
      pool.n_units += te.patient_ids.size();

      if (split == 0) {
        cr.by_stage = metric_by_stage(te, probs, auroc_metric(), cfg.max_stage);
        if (rep.has_severity) cr.by_group = metric_by_group(te, probs, groups, auroc_metric());
        const auto rows = switch_rows(te);
        cr.switch_rows = rows.size();
        std::vector<std::size_t> sub_labels;
        for (auto r : rows) sub_labels.push_back(te.labels[r]);
        const Matrix sub = take_rows(probs, rows);
        cr.switch_auroc = safe_auroc(sub, sub_labels);
        cr.ope = median_product_curve(inverse_probability_products(te, probs), cfg.max_stage);
        rep.bundles.emplace_back(cell_key(cr.state, cr.model),
                                 make_model_bundle(model, sd.prep, cr.state));
        if (conf_model && cr.model == *conf_model) {
          const std::string label = cr.state.label();
          if (label == ref_label || label == cmp_label) {
            conf_rows = rows;
            conf_predictions[label] = argmax_rows(sub);
          }
        }
      }
    }

    if (split == 0 && cfg.sweep) {
      SweepOptions so;
      so.n_models = cfg.sweep_models;
      so.bucket_width = cfg.sweep_bucket_width;
      so.seed = derive_seed({cfg.seed, 4});
      so.profile = cfg.profile;
      so.space = space;
      so.threads = threads;
      rep.sweep = tree_complexity_sweep(sd.train, sd.val, sd.test,
                                        cfg.sweep_states.empty() ? states : cfg.sweep_states, so);
    }
    rep.metadata.split_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - split_started).count());
  }

  for (std::size_t c = 0; c < rep.cells.size(); ++c) {
    CellResult& cr = rep.cells[c];
    rep.fits_attempted += cr.fits_attempted;
    if (cr.skip_reason) continue;
    const Pool& pool = pools[c];
    if (pool.labels.empty()) {
      cr.skip_reason = "all fits failed" + (cr.failures.empty() ? std::string()
                                                               : ": " + cr.failures.front());
      continue;
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : cr.split_auroc) {
      if (v) {
        sum += *v;
        ++n;
      }
    }
    if (n) cr.mean_split_auroc = sum / static_cast<double>(n);

    Matrix probs(pool.labels.size(), k);
    probs.data = pool.probs;
    cr.test_rows = pool.labels.size();
    cr.test_units = pool.n_units;
    BootstrapOptions bo;
    bo.replicates = cfg.bootstrap_replicates;
    bo.level = cfg.confidence_level;
    bo.seed = derive_seed({cfg.seed, 5, c});
    try {
      const PatientAuroc pa(probs, pool.labels, pool.units, pool.n_units);
      cr.auroc = estimate_or_nan(
          pool.n_units, [&pa](std::span<const double> w) { return pa(w); }, bo);
    } catch (const UndefinedMetricError&) {
      cr.auroc = estimate_or_nan(0, {}, bo);
    }
    const std::size_t bins = cfg.calibration_bins;
    cr.accuracy = estimate_or_nan(
        pool.n_units, patient_resample(probs, pool.labels, pool.units, pool.n_units,
                                       [](const Matrix& p, std::span<const std::size_t> y) {
                                         return accuracy(p, y);
                                       }),
        bo);
    cr.ece = estimate_or_nan(
        pool.n_units, patient_resample(probs, pool.labels, pool.units, pool.n_units,
                                       [bins](const Matrix& p, std::span<const std::size_t> y) {
                                         return expected_calibration_error(p, y, bins);
                                       }),
        bo);
    cr.sce = estimate_or_nan(
        pool.n_units, patient_resample(probs, pool.labels, pool.units, pool.n_units,
                                       [bins](const Matrix& p, std::span<const std::size_t> y) {
                                         return static_calibration_error(p, y, bins);
                                       }),
        bo);
  }

  if (conf_model && conf_predictions.count(ref_label) && conf_predictions.count(cmp_label)) {
    ConfusionResult cr;
    cr.reference = ref_label;
    cr.comparison = cmp_label;
    cr.model = *conf_model;
    cr.rows = conf_rows.size();
    cr.counts = confusion_matrix(conf_predictions[ref_label], conf_predictions[cmp_label], k);
    rep.confusion = cr;
  } else {
    rep.notes.push_back("switch_confusion.csv omitted: configured states or model not available");
  }
  if (!rep.has_severity) rep.notes.push_back("by_group.csv omitted: no severity column");
  if (!cfg.sweep) rep.notes.push_back("complexity.csv omitted: sweep disabled");
  rep.notes.push_back("bootstrap resamples (split, patient) units of pooled test rows");
  rep.metadata.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rep;
}

std::vector<SweepResult> run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const LoadedData data = load_experiment_data(cfg);
  const SplitData sd = prepare_split(data, cfg, derive_seed({cfg.seed, 1, 0}));
  SweepOptions so;
  so.n_models = cfg.sweep_models;
  so.bucket_width = cfg.sweep_bucket_width;
  so.seed = derive_seed({cfg.seed, 4});
  so.profile = cfg.profile;
  so.space = cfg.resolved_space();
  so.threads = cfg.threads;
  return tree_complexity_sweep(sd.train, sd.val, sd.test,
                               cfg.sweep_states.empty() ? cfg.resolved_states() : cfg.sweep_states,
                               so);
}

// ---------------------------------------------------------------------------
// Rendering

void write_complexity_csv(std::ostream& out, const std::vector<SweepResult>& sweep) {
  out << csv::join({"state", "min_leaves", "max_leaves", "n_models", "selected_leaves",
                    "val_auroc", "test_auroc", "test_auroc_all"})
      << '\n';
  for (const auto& r : sweep) {
    for (const auto& b : r.buckets) {
      out << csv::join({r.spec.label(), std::to_string(b.min_leaves), std::to_string(b.max_leaves),
                        std::to_string(b.n_models), std::to_string(b.selected_leaves),
                        fmt(b.val_auroc), fmt(b.test_auroc), fmt(b.test_auroc_all)})
          << '\n';
    }
  }
}

std::string complexity_svg(const std::vector<SweepResult>& sweep) {
  std::vector<svg::Series> series;
  for (const auto& r : sweep) {
    svg::Series s{r.spec.label(), {}};
    for (const auto& b : r.buckets) {
      if (b.test_auroc) s.points.emplace_back(static_cast<double>(b.max_leaves), *b.test_auroc);
    }
    series.push_back(std::move(s));
  }
  svg::ChartOptions o;
  o.title = "Switch-state AUROC by tree size";
  o.x_label = "leaves (bucket upper bound)";
  o.y_label = "test AUROC";
  return svg::line_chart(series, o);
}

std::vector<std::string> render_report(const ExperimentReport& r,
                                       const std::filesystem::path& outdir) {
  std::filesystem::create_directories(outdir);
  std::vector<std::string> files;
  std::vector<std::string> notes = r.notes;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text(outdir / name, text);
    files.push_back(name);
  };

  std::vector<ModelKind> models;
  std::vector<StateSpec> states;
  for (const auto& c : r.cells) {
    if (std::find(models.begin(), models.end(), c.model) == models.end()) models.push_back(c.model);
    if (std::find(states.begin(), states.end(), c.state) == states.end()) states.push_back(c.state);
  }

  {  // Mean test AUROC (percent) per state and model.
    std::ostringstream out;
    std::vector<std::string> header = {"state"};
    for (auto m : models) header.emplace_back(model_kind_name(m));
    out << csv::join(header) << '\n';
    for (const auto& s : states) {
      std::vector<std::string> row = {s.label()};
      for (auto m : models) {
        const CellResult* c = r.find(s.label(), m);
        row.push_back(c && !c->skip_reason && c->mean_split_auroc
                          ? csv::fixed(100.0 * *c->mean_split_auroc)
                          : "NA");
      }
      out << csv::join(row) << '\n';
    }
    emit("results.csv", out.str());
  }

  const std::vector<std::string> long_header = {"dataset", "state", "model", "metric",
                                                "value",   "ci_low", "ci_high", "n"};
  auto estimate_row = [&](const CellResult& c, const char* metric, const MetricEstimate& e,
                          std::size_t n) {
    return csv::join({r.dataset, c.state.label(), model_kind_name(c.model), metric, fmt(e.value),
                      fmt(e.ci_low), fmt(e.ci_high), std::to_string(n)});
  };
  {
    std::ostringstream out, cal, skips;
    out << csv::join(long_header) << '\n';
    cal << csv::join(long_header) << '\n';
    skips << csv::join({"state", "model", "reason"}) << '\n';
    for (const auto& c : r.cells) {
      if (c.skip_reason) {
        skips << csv::join({c.state.label(), model_kind_name(c.model), *c.skip_reason}) << '\n';
        continue;
      }
      out << estimate_row(c, "auroc", c.auroc, c.test_rows) << '\n';
      out << csv::join({r.dataset, c.state.label(), model_kind_name(c.model), "auroc_split_mean",
                        fmt(c.mean_split_auroc), "NA", "NA", std::to_string(c.split_auroc.size())})
          << '\n';
      out << estimate_row(c, "accuracy", c.accuracy, c.test_rows) << '\n';
      out << estimate_row(c, "ece", c.ece, c.test_rows) << '\n';
      out << estimate_row(c, "sce", c.sce, c.test_rows) << '\n';
      out << csv::join({r.dataset, c.state.label(), model_kind_name(c.model), "switch_auroc",
                        fmt(c.switch_auroc), "NA", "NA", std::to_string(c.switch_rows)})
          << '\n';
      cal << estimate_row(c, "ece", c.ece, c.test_rows) << '\n';
      cal << estimate_row(c, "sce", c.sce, c.test_rows) << '\n';
    }
    if (!r.oracle_auroc.empty()) {
      double sum = 0.0;
      for (double v : r.oracle_auroc) sum += v;
      out << csv::join({r.dataset, "oracle", "bayes", "auroc_split_mean",
                        fmt(sum / static_cast<double>(r.oracle_auroc.size())), "NA", "NA",
                        std::to_string(r.oracle_auroc.size())})
          << '\n';
    }
    emit("metrics.csv", out.str());
    emit("calibration.csv", cal.str());
    emit("skipped.csv", skips.str());
  }

  {
    std::ostringstream out;
    out << csv::join({"state", "model", "stage", "auroc", "n"}) << '\n';
    for (const auto& c : r.cells) {
      if (c.skip_reason) continue;
      for (std::size_t t = 0; t < c.by_stage.value.size(); ++t) {
        out << csv::join({c.state.label(), model_kind_name(c.model), std::to_string(t + 1),
                          fmt(c.by_stage.value[t]), std::to_string(c.by_stage.count[t])})
            << '\n';
      }
    }
    emit("by_stage.csv", out.str());
  }

  if (r.has_severity) {
    std::ostringstream out;
    out << csv::join({"state", "model", "group", "auroc", "n_rows", "n_patients"}) << '\n';
    for (const auto& c : r.cells) {
      if (c.skip_reason || !c.by_group) continue;
      for (std::size_t g = 0; g < c.by_group->value.size(); ++g) {
        out << csv::join({c.state.label(), model_kind_name(c.model), std::to_string(g + 1),
                          fmt(c.by_group->value[g]), std::to_string(c.by_group->count[g]),
                          std::to_string(c.by_group->patients[g])})
            << '\n';
      }
    }
    emit("by_group.csv", out.str());
  }

  if (r.confusion) {
    std::ostringstream out;
    std::vector<std::string> header = {"reference\\comparison"};
    for (const auto& a : r.action_labels) header.push_back(a);
    out << csv::join(header) << '\n';
    for (std::size_t i = 0; i < r.confusion->counts.size(); ++i) {
      std::vector<std::string> row = {r.action_labels[i]};
      for (auto v : r.confusion->counts[i]) row.push_back(std::to_string(v));
      out << csv::join(row) << '\n';
    }
    emit("switch_confusion.csv", out.str());
  }

  {
    std::ostringstream out;
    out << csv::join({"state", "model", "stage", "median", "n", "floored_events"}) << '\n';
    std::vector<std::pair<std::string, ProductCurve>> curves;
    for (const auto& c : r.cells) {
      if (c.skip_reason || !c.ope) continue;
      for (std::size_t t = 0; t < c.ope->center.size(); ++t) {
        out << csv::join({c.state.label(), model_kind_name(c.model), std::to_string(t + 1),
                          fmt(c.ope->center[t]), std::to_string(c.ope->count[t]),
                          std::to_string(c.ope->floored_events[t])})
            << '\n';
      }
      if (c.model == models.front()) curves.emplace_back(c.state.label(), *c.ope);
    }
    emit("ope_curve.csv", out.str());
    emit("ope_curve.svg", curve_svg(curves));
  }

  if (!r.sweep.empty()) {
    std::ostringstream out;
    write_complexity_csv(out, r.sweep);
    emit("complexity.csv", out.str());
    emit("complexity.svg", complexity_svg(r.sweep));
  }

  if (!r.bundles.empty()) {
    std::filesystem::create_directories(outdir / "models");
    for (const auto& [key, bundle] : r.bundles) {
      const std::string name = "models/" + sanitize(key) + ".json";
      write_text(outdir / name, bundle.dump(2) + "\n");
      files.push_back(name);
    }
  }

  emit("report.json", report_to_json(r).dump(2) + "\n");

  json skipped = json::array();
  for (const auto& c : r.cells) {
    if (c.skip_reason) {
      skipped.push_back({{"state", c.state.label()},
                         {"model", model_kind_name(c.model)},
                         {"reason", *c.skip_reason}});
    }
  }
  files.push_back("run_manifest.json");
  json manifest = {{"dataset", r.dataset},
                   {"version", r.metadata.version},
                   {"seed", r.metadata.seed},
                   {"split_seeds", r.metadata.split_seeds},
                   {"threads", r.metadata.threads},
                   {"duration_seconds", r.metadata.duration_seconds},
                   {"split_seconds", r.metadata.split_seconds},
                   {"fits_attempted", r.fits_attempted},
                   {"cells", r.cells.size()},
                   {"skipped", skipped},
                   {"notes", notes},
                   {"warnings", r.warnings},
                   {"files", files},
                   {"config", r.config}};
  if (r.confusion) {
    manifest["switch_confusion"] = {{"reference", r.confusion->reference},
                                    {"comparison", r.confusion->comparison},
                                    {"model", model_kind_name(r.confusion->model)},
                                    {"rows", r.confusion->rows}};
  }
  write_text(outdir / "run_manifest.json", manifest.dump(2) + "\n");
  return files;
}

}  // namespace histpolicy

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

#include <random>

#include "histpolicy/errors.h"
#include "histpolicy/models.h"

namespace histpolicy {

const char* profile_name(DatasetProfile p) {
  switch (p) {
    case DatasetProfile::kAdniLike: return "adni-like";
    case DatasetProfile::kRaLike: return "ra-like";
    case DatasetProfile::kSepsisLike: return "sepsis-like";
    case DatasetProfile::kCopdLike: return "copd-like";
  }
  return "?";
}

DatasetProfile parse_profile(const std::string& name) {
  if (name == "adni-like") return DatasetProfile::kAdniLike;
  if (name == "ra-like") return DatasetProfile::kRaLike;
  if (name == "sepsis-like") return DatasetProfile::kSepsisLike;
  if (name == "copd-like") return DatasetProfile::kCopdLike;
  throw ConfigError("unknown dataset profile '" + name + "'");
}

SelectionMetric default_selection_metric(DatasetProfile p) {
  return p == DatasetProfile::kAdniLike || p == DatasetProfile::kRaLike
             ? SelectionMetric::kAuroc
             : SelectionMetric::kAccuracy;
}

HyperparamSpace HyperparamSpace::for_profile(DatasetProfile p) {
  HyperparamSpace s;
  s.lr_C = {1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3};
  s.lr_max_iter = {2000};
  s.dt_criterion = {SplitCriterion::kGini, SplitCriterion::kEntropy};
  s.dt_min_samples_split = {2, 4, 8, 16, 32, 64, 128};
  s.rs_max_coef = {3, 4, 5, 6, 7, 8};
  s.rs_max_size = {3, 4, 5, 6, 7};
  s.rs_pos_weight = {1, 2, 3, 4, 5};
  s.mlp_hidden = {{16}, {32}, {64}, {16, 16}, {32, 32}, {64, 64}};
  switch (p) {
    case DatasetProfile::kAdniLike:
      s.dt_max_depth = {3, 5, 7, 9, 11, 13, 15};
      s.mlp_learning_rate = {1e-3, 1e-2};
      s.mlp_max_epochs = {20};
      s.mlp_batch_size = {16, 32, 64};
      s.mlp_patience = 5;
      break;
    case DatasetProfile::kRaLike:
      s.dt_max_depth = {2, 3, 4, 5, 6, 7, 8};
      s.mlp_learning_rate = {1e-3, 1e-2};
      s.mlp_max_epochs = {50};
      s.mlp_batch_size = {128, 256};
      s.mlp_patience = 5;
      break;
    case DatasetProfile::kSepsisLike:
    case DatasetProfile::kCopdLike:
      s.dt_max_depth = {3, 5, 7, 9, 11, 13, 15};
      s.mlp_learning_rate = {1e-4, 1e-3, 1e-2};
      s.mlp_max_epochs = {500};
      s.mlp_batch_size = {256, 512, 1024};
      s.mlp_patience = 25;
      break;
  }
  return s;
}

namespace {

template <typename T>
const T& pick(const std::vector<T>& values, std::mt19937_64& rng, const char* what) {
  if (values.empty()) throw ConfigError(std::string("empty search set for ") + what);
  std::uniform_int_distribution<std::size_t> u(0, values.size() - 1);
  return values[u(rng)];
}

}  // namespace

std::vector<Hyperparams> sample_hyperparams(const HyperparamSpace& space, ModelKind kind,
                                            std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::vector<Hyperparams> out;
  for (std::size_t i = 0; i < n; ++i) {
    switch (kind) {
      case ModelKind::kLogisticRegression:
        out.emplace_back(LogRegParams{pick(space.lr_C, rng, "C"),
                                      pick(space.lr_max_iter, rng, "max_iter")});
        break;
      case ModelKind::kDecisionTree: {
        TreeParams t;
        t.criterion = pick(space.dt_criterion, rng, "criterion");
        t.max_depth = pick(space.dt_max_depth, rng, "max_depth");
        t.min_samples_split = pick(space.dt_min_samples_split, rng, "min_samples_split");
        out.emplace_back(t);
        break;
      }
      case ModelKind::kRiskScore: {
        RiskScoreParams r;
        r.max_coef = pick(space.rs_max_coef, rng, "max_coef");
        r.max_size = pick(space.rs_max_size, rng, "max_size");
        r.pos_weight = pick(space.rs_pos_weight, rng, "pos_weight");
        out.emplace_back(r);
        break;
      }
      case ModelKind::kMlp: {
        MlpParams m;
        m.hidden = pick(space.mlp_hidden, rng, "hidden");
        m.learning_rate = pick(space.mlp_learning_rate, rng, "learning_rate");
        m.max_epochs = pick(space.mlp_max_epochs, rng, "max_epochs");
        m.batch_size = pick(space.mlp_batch_size, rng, "batch_size");
        m.patience = space.mlp_patience;
        out.emplace_back(m);
        break;
      }
    }
  }
  return out;
}

ModelKind hyperparams_kind(const Hyperparams& h) {
  struct V {
    ModelKind operator()(const LogRegParams&) const { return ModelKind::kLogisticRegression; }
    ModelKind operator()(const TreeParams&) const { return ModelKind::kDecisionTree; }
    ModelKind operator()(const RiskScoreParams&) const { return ModelKind::kRiskScore; }
    ModelKind operator()(const MlpParams&) const { return ModelKind::kMlp; }
  };
  return std::visit(V{}, h);
}

nlohmann::json hyperparams_to_json(const Hyperparams& h) {
  struct V {
    nlohmann::json operator()(const LogRegParams& p) const {
      return {{"C", p.C}, {"max_iter", p.max_iter}};
    }
    nlohmann::json operator()(const TreeParams& p) const {
      return {{"criterion", p.criterion == SplitCriterion::kGini ? "gini" : "entropy"},
              {"max_depth", p.max_depth},
              {"min_samples_split", p.min_samples_split}};
    }
    nlohmann::json operator()(const RiskScoreParams& p) const {
      return {{"max_coef", p.max_coef}, {"max_size", p.max_size}, {"pos_weight", p.pos_weight}};
    }
    nlohmann::json operator()(const MlpParams& p) const {
      return {{"hidden", p.hidden},
              {"learning_rate", p.learning_rate},
              {"max_epochs", p.max_epochs},
              {"batch_size", p.batch_size},
              {"patience", p.patience}};
    }
  };
  auto j = std::visit(V{}, h);
  j["kind"] = model_kind_name(hyperparams_kind(h));
  return j;
}

ModelPtr fit_model(const Hyperparams& h, const StateMatrix& train, const StateMatrix& val,
                   std::uint64_t seed) {
  struct V {
    const StateMatrix& train;
    const StateMatrix& val;
    std::uint64_t seed;
    ModelPtr operator()(const LogRegParams& p) const {
      return fit_logreg(train, p.C, p.max_iter);
    }
    ModelPtr operator()(const TreeParams& p) const {
      return fit_tree(train, p.criterion, p.max_depth, p.min_samples_split);
    }
    ModelPtr operator()(const RiskScoreParams& p) const {
      return fit_riskscore(train, p.max_coef, p.max_size, p.pos_weight);
    }
    ModelPtr operator()(const MlpParams& p) const {
      MlpOptions o;
      o.hidden = p.hidden;
      o.learning_rate = p.learning_rate;
      o.batch_size = p.batch_size;
      o.max_epochs = p.max_epochs;
      o.patience = p.patience;
      o.seed = seed;
      return fit_mlp(train, val, o);
    }
  };
  return std::visit(V{train, val, seed}, h);
}

}  // namespace histpolicy

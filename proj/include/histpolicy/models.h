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

// Non-sequential policy models behind one probabilistic-classifier contract:
// multinomial logistic regression, CART decision trees, integer risk scores
// and a feedforward network.

#ifndef HISTPOLICY_MODELS_H_
#define HISTPOLICY_MODELS_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "histpolicy/matrix.h"
#include "histpolicy/staterep.h"
#include "json.hpp"

namespace histpolicy {

enum class ModelKind { kLogisticRegression, kDecisionTree, kRiskScore, kMlp };

// "lr", "dt", "rs", "mlp".
const char* model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

inline constexpr int kModelFormatVersion = 1;

class PolicyModel {
 public:
  PolicyModel(std::vector<std::string> feature_names,
              std::vector<std::string> class_labels)
      : features_(std::move(feature_names)), classes_(std::move(class_labels)) {}
  virtual ~PolicyModel() = default;

  virtual ModelKind kind() const = 0;

  const std::vector<std::string>& feature_names() const { return features_; }
  const std::vector<std::string>& class_labels() const { return classes_; }
  std::size_t num_classes() const { return classes_.size(); }

  // Probability vector over all K classes for one state. `x` is in the
  // training feature order.
  std::vector<double> predict_proba(std::span<const double> x) const;

  // Row-wise probabilities. Throws ContractError unless `m` carries exactly
  // the training feature names and class labels.
  Matrix predict_proba(const StateMatrix& m) const;

  // Versioned document: kind, feature names, class labels, parameters.
  nlohmann::json to_json() const;

 protected:
  virtual void predict_into(std::span<const double> x, std::span<double> out) const = 0;
  virtual nlohmann::json parameters() const = 0;

 private:
  std::vector<std::string> features_;
  std::vector<std::string> classes_;
};

using ModelPtr = std::shared_ptr<const PolicyModel>;

ModelPtr model_from_json(const nlohmann::json& j);

// Argmax per row, lowest index on ties.
std::vector<std::size_t> argmax_rows(const Matrix& probs);

// ---------------------------------------------------------------------------
// Logistic regression

struct LogRegFitInfo {
  int iterations = 0;
  double grad_inf_norm = 0.0;
  bool converged = false;
  double objective = 0.0;
};

class LogisticRegression final : public PolicyModel {
 public:
  // `classes` lists the class indices seen in training; weights has one row
  // per entry. Classes outside that list receive probability 0.
  LogisticRegression(std::vector<std::string> features, std::vector<std::string> labels,
                     std::vector<std::size_t> classes, Eigen::MatrixXd weights,
                     Eigen::VectorXd intercepts, LogRegFitInfo info = {});

  ModelKind kind() const override { return ModelKind::kLogisticRegression; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& intercepts() const { return intercepts_; }
  const std::vector<std::size_t>& fitted_classes() const { return classes_; }
  const LogRegFitInfo& fit_info() const { return info_; }

 protected:
  void predict_into(std::span<const double> x, std::span<double> out) const override;
  nlohmann::json parameters() const override;

 private:
  std::vector<std::size_t> classes_;
  Eigen::MatrixXd weights_;     // classes x features
  Eigen::VectorXd intercepts_;  // classes
  LogRegFitInfo info_;
};

// Minimizes mean cross-entropy + ||W||^2 / (2 C N) with unpenalized
// intercepts, to gradient infinity-norm <= grad_tol or max_iter iterations.
// Throws FitError when fewer than two classes are present.
std::shared_ptr<LogisticRegression> fit_logreg(const StateMatrix& train, double C,
                                               int max_iter = 2000,
                                               double grad_tol = 1e-6);

// Value and gradient of the penalized objective, laid out as
// [W row-major | intercepts]. Shared by the optimizer and by tests that check
// first-order conditions.
double logreg_objective(const StateMatrix& train, std::span<const std::size_t> classes,
                        double C, const std::vector<double>& params,
                        std::vector<double>& grad);

// ---------------------------------------------------------------------------
// Decision tree

enum class SplitCriterion { kGini, kEntropy };

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  int depth = 0;
  std::vector<std::size_t> counts;  // training rows per class
  std::size_t samples = 0;
  bool is_leaf() const { return feature < 0; }
};

class DecisionTree final : public PolicyModel {
 public:
  DecisionTree(std::vector<std::string> features, std::vector<std::string> labels,
               std::vector<TreeNode> nodes);

  ModelKind kind() const override { return ModelKind::kDecisionTree; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t leaf_count() const;
  int depth() const;
  std::size_t leaf_index(std::span<const double> x) const;
  std::string to_dot() const;

 protected:
  void predict_into(std::span<const double> x, std::span<double> out) const override;
  nlohmann::json parameters() const override;

 private:
  std::vector<TreeNode> nodes_;
};

// Greedy CART. Thresholds are midpoints between consecutive distinct values;
// equal-gain splits resolve to the lowest feature index, then the lowest
// threshold. A node splits only if it has >= min_samples_split rows, lies
// above max_depth and the best split strictly lowers impurity.
std::shared_ptr<DecisionTree> fit_tree(const StateMatrix& train, SplitCriterion criterion,
                                       int max_depth, int min_samples_split);

// ---------------------------------------------------------------------------
// Risk score

class RiskScore final : public PolicyModel {
 public:
  RiskScore(std::vector<std::string> features, std::vector<std::string> labels,
            std::vector<int> weights, double intercept);

  ModelKind kind() const override { return ModelKind::kRiskScore; }
  const std::vector<int>& weights() const { return weights_; }
  double intercept() const { return intercept_; }
  double score(std::span<const double> x) const;

 protected:
  void predict_into(std::span<const double> x, std::span<double> out) const override;
  nlohmann::json parameters() const override;

 private:
  std::vector<int> weights_;
  double intercept_;
};

// Class-weighted logistic loss of a linear score, averaged with weights
// pos_weight (label 1) and 1 (label 0).
double weighted_log_loss(std::span<const double> margins,
                         std::span<const std::size_t> labels, double pos_weight);

// Binary only (class index 1 is positive). L1-path support selection,
// scaled rounding, then +-1 coordinate moves to a local optimum with the
// intercept re-fitted after every move. Throws UnsupportedModelError for
// K > 2.
std::shared_ptr<RiskScore> fit_riskscore(const StateMatrix& train, int max_coef,
                                         int max_size, double pos_weight);

// ---------------------------------------------------------------------------
// Multilayer perceptron

// Feedforward ReLU network with a softmax head. Parameters are exposed so
// tests can run finite-difference checks.
struct MlpNetwork {
  std::vector<Eigen::MatrixXd> weights;  // out x in
  std::vector<Eigen::VectorXd> biases;

  // Glorot-uniform weights, zero biases.
  static MlpNetwork init(std::size_t inputs, const std::vector<int>& hidden,
                         std::size_t outputs, std::uint64_t seed);

  // Class probabilities for each row of `x` (rows x inputs).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

  // Mean cross-entropy of the batch; fills gradients shaped like the
  // parameters when `grad` is non-null.
  double loss(const Eigen::MatrixXd& x, std::span<const std::size_t> targets,
              MlpNetwork* grad = nullptr) const;

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void assign(const std::vector<double>& flat);
};

// Patience counter for early stopping on validation loss. Only strict
// improvements reset it.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  // Records one epoch's validation loss; returns true when training should
  // stop.
  bool update(double val_loss);
  bool last_improved() const { return last_improved_; }
  int best_epoch() const { return best_epoch_; }  // 1-based, 0 before any
  double best_loss() const { return best_; }
  int epochs() const { return epochs_; }

 private:
  int patience_;
  int epochs_ = 0;
  int best_epoch_ = 0;
  int stale_ = 0;
  bool last_improved_ = false;
  double best_ = 0.0;
};

struct MlpOptions {
  std::vector<int> hidden = {16};
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  int max_epochs = 20;
  int patience = 5;
  std::uint64_t seed = 0;
};

class Mlp final : public PolicyModel {
 public:
  Mlp(std::vector<std::string> features, std::vector<std::string> labels,
      std::vector<std::size_t> classes, MlpNetwork net, int epochs_run = 0,
      int best_epoch = 0);

  ModelKind kind() const override { return ModelKind::kMlp; }
  const MlpNetwork& network() const { return net_; }
  int epochs_run() const { return epochs_run_; }
  int best_epoch() const { return best_epoch_; }

 protected:
  void predict_into(std::span<const double> x, std::span<double> out) const override;
  nlohmann::json parameters() const override;

 private:
  std::vector<std::size_t> classes_;
  MlpNetwork net_;
  int epochs_run_;
  int best_epoch_;
};

// Adam (0.9, 0.999, 1e-8) on seeded shuffled mini-batches, early stopping on
// validation cross-entropy; returns the best-validation snapshot. Throws
// DivergenceError on a non-finite loss.
std::shared_ptr<Mlp> fit_mlp(const StateMatrix& train, const StateMatrix& val,
                             const MlpOptions& options);

// ---------------------------------------------------------------------------
// Hyperparameter search

enum class DatasetProfile { kAdniLike, kRaLike, kSepsisLike, kCopdLike };

const char* profile_name(DatasetProfile p);
DatasetProfile parse_profile(const std::string& name);

enum class SelectionMetric { kAuroc, kAccuracy };

// AUROC for ADNI/RA-like data, accuracy for Sepsis/COPD-like data.
SelectionMetric default_selection_metric(DatasetProfile p);

struct LogRegParams {
  double C = 1.0;
  int max_iter = 2000;
};
struct TreeParams {
  SplitCriterion criterion = SplitCriterion::kGini;
  int max_depth = 5;
  int min_samples_split = 2;
};
struct RiskScoreParams {
  int max_coef = 5;
  int max_size = 5;
  double pos_weight = 1.0;
};
struct MlpParams {
  std::vector<int> hidden = {16};
  double learning_rate = 1e-3;
  int max_epochs = 20;
  std::size_t batch_size = 32;
  int patience = 5;
};

using Hyperparams = std::variant<LogRegParams, TreeParams, RiskScoreParams, MlpParams>;

nlohmann::json hyperparams_to_json(const Hyperparams& h);
ModelKind hyperparams_kind(const Hyperparams& h);

struct HyperparamSpace {
  std::vector<double> lr_C;
  std::vector<int> lr_max_iter;
  std::vector<SplitCriterion> dt_criterion;
  std::vector<int> dt_min_samples_split;
  std::vector<int> dt_max_depth;
  std::vector<int> rs_max_coef;
  std::vector<int> rs_max_size;
  std::vector<double> rs_pos_weight;
  std::vector<std::vector<int>> mlp_hidden;
  std::vector<double> mlp_learning_rate;
  std::vector<int> mlp_max_epochs;
  std::vector<std::size_t> mlp_batch_size;
  int mlp_patience = 5;

  static HyperparamSpace for_profile(DatasetProfile p);
};

// n i.i.d. uniform draws over the declared sets, reproducible by seed.
std::vector<Hyperparams> sample_hyperparams(const HyperparamSpace& space, ModelKind kind,
                                            std::uint64_t seed, std::size_t n = 5);

// Dispatches to the matching fit_* function. `val` is used by the MLP for
// early stopping only.
ModelPtr fit_model(const Hyperparams& h, const StateMatrix& train, const StateMatrix& val,
                   std::uint64_t seed);

}  // namespace histpolicy

#endif  // HISTPOLICY_MODELS_H_

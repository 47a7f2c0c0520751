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

#include <cmath>

#include "histpolicy/errors.h"
#include "histpolicy/models.h"
#include "histpolicy/optim.h"
#include "model_internal.h"

namespace histpolicy {

LogisticRegression::LogisticRegression(std::vector<std::string> features,
                                       std::vector<std::string> labels,
                                       std::vector<std::size_t> classes,
                                       Eigen::MatrixXd weights,
                                       Eigen::VectorXd intercepts, LogRegFitInfo info)
    : PolicyModel(std::move(features), std::move(labels)),
      classes_(std::move(classes)),
      weights_(std::move(weights)),
      intercepts_(std::move(intercepts)),
      info_(info) {
  if (weights_.rows() != static_cast<Eigen::Index>(classes_.size()) ||
      intercepts_.size() != weights_.rows() ||
      weights_.cols() != static_cast<Eigen::Index>(feature_names().size())) {
    throw ContractError("logistic regression parameter shapes do not agree");
  }
}

void LogisticRegression::predict_into(std::span<const double> x,
                                      std::span<double> out) const {
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd z = weights_ * xv + intercepts_;
  const double zmax = z.maxCoeff();
  z = (z.array() - zmax).exp();
  const double s = z.sum();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t c = 0; c < classes_.size(); ++c) out[classes_[c]] = z(c) / s;
}

nlohmann::json LogisticRegression::parameters() const {
  return {{"classes", classes_},
          {"weights", eigen_to_json(weights_)},
          {"intercepts", eigen_to_json(intercepts_)},
          {"iterations", info_.iterations},
          {"converged", info_.converged}};
}

double logreg_objective(const StateMatrix& train, std::span<const std::size_t> classes,
                        double C, const std::vector<double>& params,
                        std::vector<double>& grad) {
  const auto X = features_of(train);
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const Eigen::Index k = static_cast<Eigen::Index>(classes.size());
  const Eigen::Map<const RowMatrix> W(params.data(), k, d);
  const Eigen::Map<const Eigen::VectorXd> b(params.data() + k * d, k);

  std::vector<Eigen::Index> slot(train.num_actions(), -1);
  for (Eigen::Index c = 0; c < k; ++c) slot[classes[c]] = c;

  RowMatrix Z = X * W.transpose();
  Z.rowwise() += b.transpose();
  double nll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double zmax = Z.row(i).maxCoeff();
    Z.row(i).array() = (Z.row(i).array() - zmax).exp();
    const double s = Z.row(i).sum();
    Z.row(i) /= s;
    const Eigen::Index y = slot[train.labels[i]];
    nll -= std::log(std::max(Z(i, y), 1e-300));
    Z(i, y) -= 1.0;  // Z now holds P - Y
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const double reg = 1.0 / (C * static_cast<double>(n));

  grad.assign(params.size(), 0.0);
  Eigen::Map<RowMatrix> gW(grad.data(), k, d);
  Eigen::Map<Eigen::VectorXd> gb(grad.data() + k * d, k);
  gW.noalias() = inv_n * (Z.transpose() * X);
  gW += reg * W;
  gb = inv_n * Z.colwise().sum().transpose();
  return nll * inv_n + 0.5 * reg * W.squaredNorm();
}

std::shared_ptr<LogisticRegression> fit_logreg(const StateMatrix& train, double C,
                                               int max_iter, double grad_tol) {
  if (!(C > 0.0)) throw ConfigError("C must be positive");
  const auto classes = present_classes(train);
  if (classes.size() < 2) {
    throw FitError("logistic regression needs at least two classes in training data");
  }
  const std::size_t k = classes.size();
  const std::size_t d = train.cols();
  std::vector<double> params(k * d + k, 0.0);
  // Start intercepts at the log class priors.
  std::vector<double> counts(train.num_actions(), 0.0);
  for (auto y : train.labels) counts[y] += 1.0;
  for (std::size_t c = 0; c < k; ++c) params[k * d + c] = std::log(counts[classes[c]]);

  const Objective f = [&](const std::vector<double>& x, std::vector<double>& g) {
    return logreg_objective(train, classes, C, x, g);
  };
  LbfgsOptions opts;
  opts.max_iter = max_iter;
  opts.grad_tol = grad_tol;
  const auto res = minimize_lbfgs(f, params, opts);
  if (!std::isfinite(res.value)) throw DivergenceError("logistic regression diverged");

  Eigen::MatrixXd W(k, d);
  Eigen::VectorXd b(k);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < d; ++j) W(c, j) = params[c * d + j];
    b(c) = params[k * d + c];
  }
  LogRegFitInfo info{res.iterations, res.grad_inf_norm, res.converged, res.value};
  return std::make_shared<LogisticRegression>(train.feature_names, train.action_labels,
                                              classes, std::move(W), std::move(b), info);
}

}  // namespace histpolicy

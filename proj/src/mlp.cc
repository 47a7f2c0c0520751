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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "histpolicy/errors.h"
#include "histpolicy/models.h"
#include "model_internal.h"

namespace histpolicy {

MlpNetwork MlpNetwork::init(std::size_t inputs, const std::vector<int>& hidden,
                            std::size_t outputs, std::uint64_t seed) {
  std::vector<std::size_t> dims = {inputs};
  for (int h : hidden) {
    if (h <= 0) throw ConfigError("hidden layer sizes must be positive");
    dims.push_back(static_cast<std::size_t>(h));
  }
  dims.push_back(outputs);
  std::mt19937_64 rng(seed);
  MlpNetwork net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double a = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    std::uniform_real_distribution<double> u(-a, a);
    Eigen::MatrixXd w(dims[l + 1], dims[l]);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = u(rng);
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims[l + 1])));
  }
  return net;
}

namespace {

void softmax_rows(Eigen::MatrixXd& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - m).exp();
    z.row(i) /= z.row(i).sum();
  }
}

}  // namespace

Eigen::MatrixXd MlpNetwork::forward(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Eigen::MatrixXd z = h * weights[l].transpose();
    z.rowwise() += biases[l].transpose();
    if (l + 1 < weights.size()) {
      h = z.cwiseMax(0.0);
    } else {
      softmax_rows(z);
      return z;
    }
  }
  return h;
}

double MlpNetwork::loss(const Eigen::MatrixXd& x, std::span<const std::size_t> targets,
                        MlpNetwork* grad) const {
  const std::size_t layers = weights.size();
  std::vector<Eigen::MatrixXd> acts;  // inputs to each layer
  std::vector<Eigen::MatrixXd> pre;   // pre-activations of hidden layers
  acts.push_back(x);
  Eigen::MatrixXd z;
  for (std::size_t l = 0; l < layers; ++l) {
    z = acts.back() * weights[l].transpose();
    z.rowwise() += biases[l].transpose();
    if (l + 1 < layers) {
      pre.push_back(z);
      acts.push_back(z.cwiseMax(0.0));
    }
  }
  softmax_rows(z);
  const double n = static_cast<double>(x.rows());
  double nll = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    nll -= std::log(std::max(z(i, static_cast<Eigen::Index>(targets[i])), 1e-300));
  }
  if (grad) {
    grad->weights.resize(layers);
    grad->biases.resize(layers);
    Eigen::MatrixXd delta = z;
    for (Eigen::Index i = 0; i < delta.rows(); ++i) {
      delta(i, static_cast<Eigen::Index>(targets[i])) -= 1.0;
    }
    delta /= n;
    for (std::size_t l = layers; l-- > 0;) {
      grad->weights[l] = delta.transpose() * acts[l];
      grad->biases[l] = delta.colwise().sum().transpose();
      if (l > 0) {
        Eigen::MatrixXd back = delta * weights[l];
        delta = back.array() * (pre[l - 1].array() > 0.0).cast<double>();
      }
    }
  }
  return nll / n;
}

std::size_t MlpNetwork::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  }
  return n;
}

std::vector<double> MlpNetwork::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.insert(out.end(), weights[l].data(), weights[l].data() + weights[l].size());
    out.insert(out.end(), biases[l].data(), biases[l].data() + biases[l].size());
  }
  return out;
}

void MlpNetwork::assign(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) throw ContractError("parameter count mismatch");
  std::size_t pos = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    std::copy_n(flat.data() + pos, weights[l].size(), weights[l].data());
    pos += static_cast<std::size_t>(weights[l].size());
    std::copy_n(flat.data() + pos, biases[l].size(), biases[l].data());
    pos += static_cast<std::size_t>(biases[l].size());
  }
}

bool EarlyStopping::update(double val_loss) {
  ++epochs_;
  if (epochs_ == 1 || val_loss < best_) {
    best_ = val_loss;
    best_epoch_ = epochs_;
    stale_ = 0;
    last_improved_ = true;
  } else {
    ++stale_;
    last_improved_ = false;
  }
  return stale_ >= patience_;
}

Mlp::Mlp(std::vector<std::string> features, std::vector<std::string> labels,
         std::vector<std::size_t> classes, MlpNetwork net, int epochs_run, int best_epoch)
    : PolicyModel(std::move(features), std::move(labels)),
      classes_(std::move(classes)),
      net_(std::move(net)),
      epochs_run_(epochs_run),
      best_epoch_(best_epoch) {
  if (net_.weights.empty() ||
      net_.weights.front().cols() != static_cast<Eigen::Index>(feature_names().size()) ||
      net_.weights.back().rows() != static_cast<Eigen::Index>(classes_.size())) {
    throw ContractError("network shape does not match features and classes");
  }
}

void Mlp::predict_into(std::span<const double> x, std::span<double> out) const {
  const Eigen::Map<const Eigen::RowVectorXd> row(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::MatrixXd p = net_.forward(row);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t c = 0; c < classes_.size(); ++c) out[classes_[c]] = p(0, c);
}

nlohmann::json Mlp::parameters() const {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < net_.weights.size(); ++l) {
    layers.push_back({{"weights", eigen_to_json(net_.weights[l])},
                      {"biases", eigen_to_json(net_.biases[l])}});
  }
  return {{"classes", classes_},
          {"layers", std::move(layers)},
          {"epochs_run", epochs_run_},
          {"best_epoch", best_epoch_}};
}

namespace {

Eigen::MatrixXd to_eigen(const StateMatrix& m) { return features_of(m); }

// Cross-entropy against slot targets; labels the network never saw are
// scored at a fixed floor probability.
double validation_loss(const MlpNetwork& net, const Eigen::MatrixXd& x,
                       const std::vector<long long>& slots) {
  const Eigen::MatrixXd p = net.forward(x);
  double nll = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double q = slots[i] < 0 ? 0.0 : p(i, slots[i]);
    nll -= std::log(std::max(q, 1e-12));
  }
  return nll / static_cast<double>(std::max<Eigen::Index>(p.rows(), 1));
}

}  // namespace

std::shared_ptr<Mlp> fit_mlp(const StateMatrix& train, const StateMatrix& val,
                             const MlpOptions& options) {
  const auto classes = present_classes(train);
  if (classes.size() < 2) throw FitError("MLP needs at least two classes in training data");
  if (val.rows > 0 && val.feature_names != train.feature_names) {
    throw ContractError("validation features do not match training features");
  }
  if (options.batch_size == 0 || options.max_epochs < 1) {
    throw ConfigError("MLP needs batch_size >= 1 and max_epochs >= 1");
  }
  std::vector<long long> slot(train.num_actions(), -1);
  for (std::size_t c = 0; c < classes.size(); ++c) slot[classes[c]] = static_cast<long long>(c);

  const Eigen::MatrixXd x_train = to_eigen(train);
  std::vector<std::size_t> y_train(train.rows);
  for (std::size_t i = 0; i < train.rows; ++i) y_train[i] = static_cast<std::size_t>(slot[train.labels[i]]);
  const StateMatrix& vset = val.rows > 0 ? val : train;
  const Eigen::MatrixXd x_val = to_eigen(vset);
  std::vector<long long> y_val(vset.rows);
  for (std::size_t i = 0; i < vset.rows; ++i) y_val[i] = slot[vset.labels[i]];

  MlpNetwork net = MlpNetwork::init(train.cols(), options.hidden, classes.size(), options.seed);
  MlpNetwork best = net;
  const std::size_t n_params = net.parameter_count();
  std::vector<double> m1(n_params, 0.0), m2(n_params, 0.0);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  long long step = 0;

  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(train.rows);
  std::iota(order.begin(), order.end(), 0);
  EarlyStopping stopper(options.patience);
  MlpNetwork grad;
  std::vector<std::size_t> batch_targets;

  for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      Eigen::MatrixXd xb(static_cast<Eigen::Index>(end - start), x_train.cols());
      batch_targets.resize(end - start);
      for (std::size_t i = start; i < end; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = x_train.row(static_cast<Eigen::Index>(order[i]));
        batch_targets[i - start] = y_train[order[i]];
      }
      const double loss = net.loss(xb, batch_targets, &grad);
      if (!std::isfinite(loss)) throw DivergenceError("MLP training loss is not finite");
      ++step;
      auto theta = net.flatten();
      const auto g = grad.flatten();
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (std::size_t k = 0; k < n_params; ++k) {
        m1[k] = kBeta1 * m1[k] + (1.0 - kBeta1) * g[k];
        m2[k] = kBeta2 * m2[k] + (1.0 - kBeta2) * g[k] * g[k];
        theta[k] -= options.learning_rate * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + kEps);
      }
      net.assign(theta);
    }
    const double vloss = validation_loss(net, x_val, y_val);
    if (!std::isfinite(vloss)) throw DivergenceError("MLP validation loss is not finite");
    const bool stop = stopper.update(vloss);
    if (stopper.last_improved()) best = net;
    if (stop) break;
  }
  return std::make_shared<Mlp>(train.feature_names, train.action_labels, classes,
                               std::move(best), stopper.epochs(), stopper.best_epoch());
}

}  // namespace histpolicy

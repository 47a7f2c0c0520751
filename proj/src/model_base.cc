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

#include "histpolicy/errors.h"
#include "histpolicy/models.h"

namespace histpolicy {

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLogisticRegression: return "lr";
    case ModelKind::kDecisionTree: return "dt";
    case ModelKind::kRiskScore: return "rs";
    case ModelKind::kMlp: return "mlp";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "lr") return ModelKind::kLogisticRegression;
  if (name == "dt") return ModelKind::kDecisionTree;
  if (name == "rs") return ModelKind::kRiskScore;
  if (name == "mlp") return ModelKind::kMlp;
  throw ConfigError("unknown model kind '" + name + "'");
}

std::vector<double> PolicyModel::predict_proba(std::span<const double> x) const {
  if (x.size() != features_.size()) {
    throw ContractError("expected " + std::to_string(features_.size()) +
                        " features, got " + std::to_string(x.size()));
  }
  std::vector<double> out(classes_.size(), 0.0);
  predict_into(x, out);
  return out;
}

Matrix PolicyModel::predict_proba(const StateMatrix& m) const {
  if (m.feature_names != features_) {
    throw ContractError("state features do not match the features the " +
                        std::string(model_kind_name(kind())) + " model was fitted on");
  }
  if (m.action_labels != classes_) {
    throw ContractError("state action labels do not match the model's classes");
  }
  Matrix out(m.rows, classes_.size());
  for (std::size_t i = 0; i < m.rows; ++i) predict_into(m.row(i), out.row(i));
  return out;
}

nlohmann::json PolicyModel::to_json() const {
  return {{"format_version", kModelFormatVersion},
          {"kind", model_kind_name(kind())},
          {"feature_names", features_},
          {"class_labels", classes_},
          {"parameters", parameters()}};
}

std::vector<std::size_t> argmax_rows(const Matrix& probs) {
  std::vector<std::size_t> out(probs.rows);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    const auto r = probs.row(i);
    out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

namespace {

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const std::size_t rows = j.size();
  const std::size_t cols = rows ? j.at(0).size() : 0;
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

}  // namespace

nlohmann::json eigen_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json eigen_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

ModelPtr model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw ConfigError("unsupported model format version");
    }
    const auto kind = parse_model_kind(j.at("kind").get<std::string>());
    auto features = j.at("feature_names").get<std::vector<std::string>>();
    auto labels = j.at("class_labels").get<std::vector<std::string>>();
    const auto& p = j.at("parameters");
    switch (kind) {
      case ModelKind::kLogisticRegression:
        return std::make_shared<LogisticRegression>(
            std::move(features), std::move(labels),
            p.at("classes").get<std::vector<std::size_t>>(),
            matrix_from_json(p.at("weights")), vector_from_json(p.at("intercepts")));
      case ModelKind::kDecisionTree: {
        std::vector<TreeNode> nodes;
        for (const auto& jn : p.at("nodes")) {
          TreeNode n;
          n.feature = jn.at("feature").get<int>();
          n.threshold = jn.at("threshold").get<double>();
          n.left = jn.at("left").get<int>();
          n.right = jn.at("right").get<int>();
          n.depth = jn.at("depth").get<int>();
          n.counts = jn.at("counts").get<std::vector<std::size_t>>();
          n.samples = jn.at("samples").get<std::size_t>();
          nodes.push_back(std::move(n));
        }
        return std::make_shared<DecisionTree>(std::move(features), std::move(labels),
                                              std::move(nodes));
      }
      case ModelKind::kRiskScore:
        return std::make_shared<RiskScore>(std::move(features), std::move(labels),
                                           p.at("weights").get<std::vector<int>>(),
                                           p.at("intercept").get<double>());
      case ModelKind::kMlp: {
        MlpNetwork net;
        for (const auto& jl : p.at("layers")) {
          net.weights.push_back(matrix_from_json(jl.at("weights")));
          net.biases.push_back(vector_from_json(jl.at("biases")));
        }
        return std::make_shared<Mlp>(std::move(features), std::move(labels),
                                     p.at("classes").get<std::vector<std::size_t>>(),
                                     std::move(net), p.value("epochs_run", 0),
                                     p.value("best_epoch", 0));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model document: ") + e.what());
  }
  throw ConfigError("invalid model document");
}

}  // namespace histpolicy

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

// Helpers shared by the model translation units.

#ifndef HISTPOLICY_SRC_MODEL_INTERNAL_H_
#define HISTPOLICY_SRC_MODEL_INTERNAL_H_

#include <vector>

#include <Eigen/Dense>

#include "histpolicy/staterep.h"
#include "json.hpp"

namespace histpolicy {

nlohmann::json eigen_to_json(const Eigen::MatrixXd& m);
nlohmann::json eigen_to_json(const Eigen::VectorXd& v);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMatrix> features_of(const StateMatrix& m) {
  return {m.values.data(), static_cast<Eigen::Index>(m.rows),
          static_cast<Eigen::Index>(m.cols())};
}

// Sorted class indices that occur in the labels.
inline std::vector<std::size_t> present_classes(const StateMatrix& m) {
  std::vector<bool> seen(m.num_actions(), false);
  for (auto y : m.labels) seen[y] = true;
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < seen.size(); ++k) {
    if (seen[k]) out.push_back(k);
  }
  return out;
}

}  // namespace histpolicy

#endif  // HISTPOLICY_SRC_MODEL_INTERNAL_H_

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
#include <sstream>

#include "histpolicy/errors.h"
#include "histpolicy/models.h"

namespace histpolicy {

DecisionTree::DecisionTree(std::vector<std::string> features,
                           std::vector<std::string> labels, std::vector<TreeNode> nodes)
    : PolicyModel(std::move(features), std::move(labels)), nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw ContractError("a tree needs at least a root");
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int DecisionTree::depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

std::size_t DecisionTree::leaf_index(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& n = nodes_[i];
    i = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
  }
  return i;
}

void DecisionTree::predict_into(std::span<const double> x, std::span<double> out) const {
  const auto& leaf = nodes_[leaf_index(x)];
  const double n = static_cast<double>(leaf.samples);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = static_cast<double>(leaf.counts[k]) / n;
  }
}

nlohmann::json DecisionTree::parameters() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : nodes_) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"depth", n.depth},
                     {"counts", n.counts},
                     {"samples", n.samples}});
  }
  return {{"nodes", std::move(nodes)}, {"leaves", leaf_count()}, {"depth", depth()}};
}

std::string DecisionTree::to_dot() const {
  std::ostringstream os;
  os << "digraph Tree {\n  node [shape=box, fontname=\"helvetica\"];\n";
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    os << "  " << i << " [label=\"";
    if (n.is_leaf()) {
      os << "samples = " << n.samples << "\\nvalue = [";
      for (std::size_t k = 0; k < n.counts.size(); ++k) {
        os << (k ? ", " : "") << n.counts[k];
      }
      os << "]";
    } else {
      os << feature_names()[n.feature] << " <= " << n.threshold
         << "\\nsamples = " << n.samples;
    }
    os << "\"];\n";
    if (!n.is_leaf()) {
      os << "  " << i << " -> " << n.left << " [label=\"yes\"];\n";
      os << "  " << i << " -> " << n.right << " [label=\"no\"];\n";
    }
  }
  os << "}\n";
  return os.str();
}

namespace {

double impurity(SplitCriterion c, std::span<const std::size_t> counts, std::size_t n) {
  if (n == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(n);
  double acc = 0.0;
  if (c == SplitCriterion::kGini) {
    for (auto k : counts) {
      const double p = static_cast<double>(k) * inv;
      acc += p * p;
    }
    return 1.0 - acc;
  }
  for (auto k : counts) {
    if (k == 0) continue;
    const double p = static_cast<double>(k) * inv;
    acc -= p * std::log2(p);
  }
  return acc;
}

class TreeBuilder {
 public:
  TreeBuilder(const StateMatrix& m, SplitCriterion c, int max_depth, int min_split)
      : m_(m), criterion_(c), max_depth_(max_depth), min_split_(min_split) {}

  std::vector<TreeNode> build() {
    std::vector<std::size_t> rows(m_.rows);
    std::iota(rows.begin(), rows.end(), 0);
    grow(rows, 0);
    return std::move(nodes_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int grow(const std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    TreeNode node;
    node.depth = depth;
    node.samples = rows.size();
    node.counts.assign(m_.num_actions(), 0);
    for (auto r : rows) ++node.counts[m_.labels[r]];

    const double parent = impurity(criterion_, node.counts, rows.size());
    Split best;
    if (depth < max_depth_ && static_cast<int>(rows.size()) >= min_split_ && parent > 0.0) {
      best = find_split(rows, node.counts, parent);
    }
    if (best.feature < 0) {
      nodes_[id] = std::move(node);
      return id;
    }
    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (m_.at(r, best.feature) <= best.threshold ? left : right).push_back(r);
    }
    node.feature = best.feature;
    node.threshold = best.threshold;
    nodes_[id] = node;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  Split find_split(const std::vector<std::size_t>& rows,
                   const std::vector<std::size_t>& total, double parent) const {
    const std::size_t n = rows.size();
    const double nd = static_cast<double>(n);
    Split best;
    std::vector<std::pair<double, std::size_t>> col(n);
    std::vector<std::size_t> left(total.size()), right(total.size());
    for (std::size_t f = 0; f < m_.cols(); ++f) {
      for (std::size_t i = 0; i < n; ++i) col[i] = {m_.at(rows[i], f), m_.labels[rows[i]]};
      std::sort(col.begin(), col.end());
      if (col.front().first == col.back().first) continue;
      std::fill(left.begin(), left.end(), 0);
      right = total;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        ++left[col[i].second];
        --right[col[i].second];
        if (col[i].first == col[i + 1].first) continue;
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        const double gain = parent -
                            (static_cast<double>(nl) / nd) * impurity(criterion_, left, nl) -
                            (static_cast<double>(nr) / nd) * impurity(criterion_, right, nr);
        // Strictly better by a margin, so earlier features win near-ties.
        if (gain > best.gain + 1e-12) {
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (col[i].first + col[i + 1].first);
          best.gain = gain;
        }
      }
    }
    return best;
  }

  const StateMatrix& m_;
  SplitCriterion criterion_;
  int max_depth_;
  int min_split_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

std::shared_ptr<DecisionTree> fit_tree(const StateMatrix& train, SplitCriterion criterion,
                                       int max_depth, int min_samples_split) {
  if (train.rows == 0) throw FitError("cannot fit a tree on no rows");
  if (max_depth < 0) throw ConfigError("max_depth must be >= 0");
  TreeBuilder builder(train, criterion, max_depth, min_samples_split);
  return std::make_shared<DecisionTree>(train.feature_names, train.action_labels,
                                        builder.build());
}

}  // namespace histpolicy

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

#include "histpolicy/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "histpolicy/dataset.h"
#include "histpolicy/errors.h"

namespace histpolicy {
namespace {

// Weighted Mann-Whitney over rows already sorted by ascending score, with
// tie groups ending at group_end. Returns nullopt when a class is empty.
template <typename LabelFn, typename WeightFn>
std::optional<double> sorted_auroc(std::span<const std::size_t> order,
                                   std::span<const std::size_t> group_end,
                                   LabelFn is_pos, WeightFn weight) {
  double neg_below = 0.0, pos_total = 0.0, concordant = 0.0;
  std::size_t begin = 0;
  for (std::size_t end : group_end) {
    double wp = 0.0, wn = 0.0;
    for (std::size_t r = begin; r < end; ++r) {
      const std::size_t row = order[r];
      const double w = weight(row);
      if (is_pos(row)) {
        wp += w;
      } else {
        wn += w;
      }
    }
    concordant += wp * neg_below + 0.5 * wp * wn;
    neg_below += wn;
    pos_total += wp;
    begin = end;
  }
  if (pos_total <= 0.0 || neg_below <= 0.0) return std::nullopt;
  return concordant / (pos_total * neg_below);
}

void sort_with_groups(std::span<const double> scores, std::vector<std::size_t>& order,
                      std::vector<std::size_t>& group_end) {
  order.resize(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  group_end.clear();
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (r + 1 == order.size() || scores[order[r + 1]] != scores[order[r]]) {
      group_end.push_back(r + 1);
    }
  }
}

void check_probs(const Matrix& probs, std::span<const std::size_t> labels) {
  if (probs.rows != labels.size()) {
    throw ContractError("probability rows and labels differ in length");
  }
  for (auto y : labels) {
    if (y >= probs.cols) throw ContractError("label outside the probability columns");
  }
}

}  // namespace

std::optional<double> auroc_binary_weighted(std::span<const double> scores,
                                            std::span<const int> labels,
                                            std::span<const double> weights) {
  if (scores.size() != labels.size() || scores.size() != weights.size()) {
    throw ContractError("scores, labels and weights differ in length");
  }
  std::vector<std::size_t> order, group_end;
  sort_with_groups(scores, order, group_end);
  return sorted_auroc(
      order, group_end, [&](std::size_t r) { return labels[r] != 0; },
      [&](std::size_t r) { return weights[r]; });
}

double auroc_binary(std::span<const double> scores, std::span<const int> labels) {
  const std::vector<double> ones(scores.size(), 1.0);
  const auto v = auroc_binary_weighted(scores, labels, ones);
  if (!v) throw UndefinedMetricError("AUROC needs both positive and negative labels");
  return *v;
}

double auroc_multiclass(const Matrix& probs, std::span<const std::size_t> labels,
                        AurocAverage average) {
  check_probs(probs, labels);
  std::vector<std::size_t> counts(probs.cols, 0);
  for (auto y : labels) ++counts[y];
  std::size_t present = 0;
  for (auto c : counts) present += c > 0 ? 1 : 0;
  if (present < 2) throw UndefinedMetricError("AUROC needs at least two classes");
  std::vector<int> bin(labels.size());
  double acc = 0.0, wsum = 0.0;
  for (std::size_t k = 0; k < probs.cols; ++k) {
    if (counts[k] == 0) continue;
    for (std::size_t i = 0; i < labels.size(); ++i) bin[i] = labels[i] == k ? 1 : 0;
    const auto col = probs.column(k);
    const double w = average == AurocAverage::kMacro ? 1.0 : static_cast<double>(counts[k]);
    acc += w * auroc_binary(col, bin);
    wsum += w;
  }
  return acc / wsum;
}

double accuracy(const Matrix& probs, std::span<const std::size_t> labels) {
  check_probs(probs, labels);
  if (labels.empty()) throw UndefinedMetricError("accuracy of no rows");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < probs.rows; ++i) {
    const auto r = probs.row(i);
    const auto pred = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
    hits += pred == labels[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::size_t calibration_bin(double confidence, std::size_t bins) {
  const double pos = std::ceil(confidence * static_cast<double>(bins));
  if (pos <= 1.0) return 0;
  return std::min(static_cast<std::size_t>(pos) - 1, bins - 1);
}

double expected_calibration_error(const Matrix& probs, std::span<const std::size_t> labels,
                                  std::size_t bins) {
  check_probs(probs, labels);
  if (labels.empty()) throw UndefinedMetricError("calibration error of no rows");
  std::vector<double> n(bins, 0.0), correct(bins, 0.0), conf(bins, 0.0);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    const auto r = probs.row(i);
    const auto it = std::max_element(r.begin(), r.end());
    const auto pred = static_cast<std::size_t>(it - r.begin());
    const std::size_t b = calibration_bin(*it, bins);
    n[b] += 1.0;
    correct[b] += pred == labels[i] ? 1.0 : 0.0;
    conf[b] += *it;
  }
  const double total = static_cast<double>(labels.size());
  double ece = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (n[b] > 0.0) ece += (n[b] / total) * std::abs(correct[b] / n[b] - conf[b] / n[b]);
  }
  return ece;
}

double static_calibration_error(const Matrix& probs, std::span<const std::size_t> labels,
                                std::size_t bins) {
  check_probs(probs, labels);
  if (labels.empty()) throw UndefinedMetricError("calibration error of no rows");
  const double total = static_cast<double>(labels.size());
  double sce = 0.0;
  std::vector<double> n(bins), hit(bins), conf(bins);
  for (std::size_t k = 0; k < probs.cols; ++k) {
    std::fill(n.begin(), n.end(), 0.0);
    std::fill(hit.begin(), hit.end(), 0.0);
    std::fill(conf.begin(), conf.end(), 0.0);
    for (std::size_t i = 0; i < probs.rows; ++i) {
      const double p = probs(i, k);
      const std::size_t b = calibration_bin(p, bins);
      n[b] += 1.0;
      hit[b] += labels[i] == k ? 1.0 : 0.0;
      conf[b] += p;
    }
    for (std::size_t b = 0; b < bins; ++b) {
      if (n[b] > 0.0) sce += (n[b] / total) * std::abs(hit[b] / n[b] - conf[b] / n[b]);
    }
  }
  return sce / static_cast<double>(probs.cols);
}

std::vector<std::vector<std::size_t>> confusion_matrix(
    std::span<const std::size_t> reference, std::span<const std::size_t> comparison,
    std::size_t num_classes) {
  if (reference.size() != comparison.size()) {
    throw ContractError("prediction vectors differ in length");
  }
  std::vector<std::vector<std::size_t>> m(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (reference[i] >= num_classes || comparison[i] >= num_classes) {
      throw ContractError("prediction outside the class range");
    }
    ++m[reference[i]][comparison[i]];
  }
  return m;
}

// ---------------------------------------------------------------------------
// Bootstrap

MetricEstimate bootstrap_ci(std::size_t n_units, const ResampleStatistic& statistic,
                            const BootstrapOptions& options) {
  if (n_units < 2) throw DataError("bootstrap needs at least two units");
  if (!(options.level > 0.0 && options.level < 1.0) || options.replicates == 0) {
    throw ConfigError("bootstrap needs replicates >= 1 and level in (0,1)");
  }
  MetricEstimate est;
  const std::vector<double> ones(n_units, 1.0);
  const auto point = statistic(ones);
  if (!point) throw UndefinedMetricError("statistic undefined on the full sample");
  est.value = *point;

  std::vector<double> values;
  values.reserve(options.replicates);
  std::vector<double> weights(n_units);
  for (std::size_t b = 0; b < options.replicates; ++b) {
    std::mt19937_64 rng(options.seed + b);
    std::uniform_int_distribution<std::size_t> pick(0, n_units - 1);
    std::fill(weights.begin(), weights.end(), 0.0);
    for (std::size_t i = 0; i < n_units; ++i) weights[pick(rng)] += 1.0;
    if (const auto v = statistic(weights)) {
      values.push_back(*v);
    } else {
      ++est.n_undefined;
    }
  }
  est.n_bootstrap = values.size();
  est.widened = est.n_undefined * 5 > options.replicates;
  if (values.empty()) {
    est.ci_low = -std::numeric_limits<double>::infinity();
    est.ci_high = std::numeric_limits<double>::infinity();
    return est;
  }
  std::sort(values.begin(), values.end());
  const double alpha = 1.0 - options.level;
  est.ci_low = interpolated_percentile(values, alpha / 2.0);
  est.ci_high = interpolated_percentile(values, 1.0 - alpha / 2.0);
  return est;
}

MetricEstimate bootstrap_mean(std::span<const double> values,
                              const BootstrapOptions& options) {
  const ResampleStatistic mean = [values](std::span<const double> w) -> std::optional<double> {
    double s = 0.0, n = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      s += w[i] * values[i];
      n += w[i];
    }
    return s / n;
  };
  return bootstrap_ci(values.size(), mean, options);
}

PatientAuroc::PatientAuroc(const Matrix& probs, std::span<const std::size_t> labels,
                           std::span<const std::size_t> patient, std::size_t n_patients,
                           AurocAverage average)
    : n_patients_(n_patients),
      k_(probs.cols),
      average_(average),
      labels_(labels.begin(), labels.end()),
      patient_(patient.begin(), patient.end()),
      order_(probs.cols),
      group_end_(probs.cols) {
  check_probs(probs, labels);
  if (patient.size() != labels.size()) throw ContractError("patient tags differ in length");
  for (auto p : patient_) {
    if (p >= n_patients) throw ContractError("patient index out of range");
  }
  for (std::size_t k = 0; k < k_; ++k) {
    const auto col = probs.column(k);
    sort_with_groups(col, order_[k], group_end_[k]);
  }
}

std::optional<double> PatientAuroc::operator()(std::span<const double> patient_weights) const {
  std::vector<double> class_weight(k_, 0.0);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    class_weight[labels_[i]] += patient_weights[patient_[i]];
  }
  std::size_t present = 0;
  for (double w : class_weight) present += w > 0.0 ? 1 : 0;
  if (present < 2) return std::nullopt;
  double acc = 0.0, wsum = 0.0;
  for (std::size_t k = 0; k < k_; ++k) {
    if (class_weight[k] <= 0.0) continue;
    const auto v = sorted_auroc(
        order_[k], group_end_[k], [&](std::size_t r) { return labels_[r] == k; },
        [&](std::size_t r) { return patient_weights[patient_[r]]; });
    if (!v) continue;
    const double w = average_ == AurocAverage::kMacro ? 1.0 : class_weight[k];
    acc += w * *v;
    wsum += w;
  }
  if (wsum <= 0.0) return std::nullopt;
  return acc / wsum;
}

ResampleStatistic patient_resample(
    const Matrix& probs, std::span<const std::size_t> labels,
    std::span<const std::size_t> patient, std::size_t n_patients,
    std::function<double(const Matrix&, std::span<const std::size_t>)> metric) {
  check_probs(probs, labels);
  // Rows grouped per patient so a resample expands patient blocks.
  std::vector<std::vector<std::size_t>> rows_of(n_patients);
  for (std::size_t i = 0; i < patient.size(); ++i) rows_of.at(patient[i]).push_back(i);
  return [probs, labels = std::vector<std::size_t>(labels.begin(), labels.end()),
          rows_of = std::move(rows_of),
          metric = std::move(metric)](std::span<const double> w) -> std::optional<double> {
    Matrix sub;
    sub.cols = probs.cols;
    std::vector<std::size_t> sub_labels;
    for (std::size_t p = 0; p < rows_of.size(); ++p) {
      const auto copies = static_cast<std::size_t>(w[p]);
      for (std::size_t c = 0; c < copies; ++c) {
        for (auto r : rows_of[p]) {
          const auto row = probs.row(r);
          sub.data.insert(sub.data.end(), row.begin(), row.end());
          sub_labels.push_back(labels[r]);
        }
      }
    }
    sub.rows = sub_labels.size();
    if (sub.rows == 0) return std::nullopt;
    try {
      return metric(sub, sub_labels);
    } catch (const UndefinedMetricError&) {
      return std::nullopt;
    }
  };
}

}  // namespace histpolicy

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

// Discrimination and calibration metrics with patient-level bootstrap
// confidence intervals.

#ifndef HISTPOLICY_METRICS_H_
#define HISTPOLICY_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "histpolicy/matrix.h"

namespace histpolicy {

// Probability that a random positive outranks a random negative, ties
// counted 1/2. Throws UndefinedMetricError unless both classes are present.
double auroc_binary(std::span<const double> scores, std::span<const int> labels);

// Same with non-negative row weights (a row with weight 2 counts twice).
// Returns nullopt when either class has zero total weight.
std::optional<double> auroc_binary_weighted(std::span<const double> scores,
                                            std::span<const int> labels,
                                            std::span<const double> weights);

enum class AurocAverage {
  kMacro,     // unweighted mean over classes present in the labels
  kWeighted,  // weighted by class prevalence
};

// One-vs-rest AUROC over the columns of `probs`, skipping classes absent
// from `labels`. Throws UndefinedMetricError with fewer than two classes.
double auroc_multiclass(const Matrix& probs, std::span<const std::size_t> labels,
                        AurocAverage average = AurocAverage::kMacro);

double accuracy(const Matrix& probs, std::span<const std::size_t> labels);

// Equal-width bins over (0, 1], half-open on the left (bin b holds
// confidences in (b/B, (b+1)/B]; zero goes to the first bin).
std::size_t calibration_bin(double confidence, std::size_t bins);

// Bins rows by max-probability confidence; sum over bins of
// (n_b / N) * |accuracy_b - confidence_b|.
double expected_calibration_error(const Matrix& probs, std::span<const std::size_t> labels,
                                  std::size_t bins = 10);

// Per-class variant: bins every column separately and averages the
// per-class calibration gaps over K columns.
double static_calibration_error(const Matrix& probs, std::span<const std::size_t> labels,
                                std::size_t bins = 10);

// K x K counts; entry (i, j) counts rows where the reference predicted i and
// the comparison predicted j.
std::vector<std::vector<std::size_t>> confusion_matrix(
    std::span<const std::size_t> reference, std::span<const std::size_t> comparison,
    std::size_t num_classes);

struct MetricEstimate {
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_bootstrap = 0;
  std::size_t n_undefined = 0;
  // More than 20% of replicates had an undefined statistic.
  bool widened = false;

  bool contains_point() const { return ci_low <= value && value <= ci_high; }
};

struct BootstrapOptions {
  std::size_t replicates = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

// Statistic of a resample described by a multiplicity per unit (patient).
// Returns nullopt when the statistic is undefined on that resample.
using ResampleStatistic =
    std::function<std::optional<double>(std::span<const double> unit_weights)>;

// Percentile bootstrap over units drawn with replacement. Replicate b uses
// its own generator seeded with seed + b. The point estimate is the
// statistic with every weight 1.
MetricEstimate bootstrap_ci(std::size_t n_units, const ResampleStatistic& statistic,
                            const BootstrapOptions& options = {});

// Bootstrap of the plain mean of per-unit values.
MetricEstimate bootstrap_mean(std::span<const double> values,
                              const BootstrapOptions& options = {});

// Patient-resampled multiclass AUROC. Column orderings are computed once so
// every replicate costs O(N K).
class PatientAuroc {
 public:
  PatientAuroc(const Matrix& probs, std::span<const std::size_t> labels,
               std::span<const std::size_t> patient, std::size_t n_patients,
               AurocAverage average = AurocAverage::kMacro);

  std::optional<double> operator()(std::span<const double> patient_weights) const;
  std::size_t n_patients() const { return n_patients_; }

 private:
  std::size_t n_patients_;
  std::size_t k_;
  AurocAverage average_;
  std::vector<std::size_t> labels_;
  std::vector<std::size_t> patient_;
  std::vector<std::vector<std::size_t>> order_;       // per class, ascending score
  std::vector<std::vector<std::size_t>> group_end_;   // tie-group ends into order_
};

// Resample statistic that recomputes a row-level metric on the expanded
// resample; general but O(N log N) per replicate.
ResampleStatistic patient_resample(
    const Matrix& probs, std::span<const std::size_t> labels,
    std::span<const std::size_t> patient, std::size_t n_patients,
    std::function<double(const Matrix&, std::span<const std::size_t>)> metric);

}  // namespace histpolicy

#endif  // HISTPOLICY_METRICS_H_

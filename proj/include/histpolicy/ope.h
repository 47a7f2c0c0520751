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

// Off-policy evaluation diagnostics: cumulative inverse-probability products
// and importance ratios.

#ifndef HISTPOLICY_OPE_H_
#define HISTPOLICY_OPE_H_

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "histpolicy/matrix.h"
#include "histpolicy/models.h"
#include "histpolicy/staterep.h"

namespace histpolicy {

// Estimated probabilities are clipped here before inversion.
inline constexpr double kProbabilityFloor = 1e-6;
// Rows with p_pi > 0 and an estimated probability below this are flagged.
inline constexpr double kOverlapThreshold = 1e-3;

struct ProductSeries {
  std::string patient_id;
  std::vector<double> cumulative;  // index t'-1
  std::vector<bool> floored;       // stage factor was clipped
  std::size_t floored_events() const;
};

ProductSeries cumulative_products(std::span<const double> action_probs,
                                  std::string patient_id = {});

// One series per patient, rows grouped by patient and ordered by stage.
std::vector<ProductSeries> inverse_probability_products(const StateMatrix& states,
                                                        const Matrix& probs);
std::vector<ProductSeries> inverse_probability_products(const NumericEpisodeSet& episodes,
                                                        const PolicyModel& model,
                                                        const StateSpec& spec);

struct ProductCurve {
  std::vector<double> center;  // median (or mean) over patients still active
  std::vector<std::size_t> count;
  std::vector<std::size_t> floored_events;
  bool mean = false;
};

// Stops at the last stage reached by any patient when that is below max_stage.
ProductCurve median_product_curve(const std::vector<ProductSeries>& products,
                                  std::size_t max_stage = 10, bool use_mean = false);

struct ImportanceRatios {
  std::vector<double> rho;
  std::vector<bool> overlap_violation;
  std::size_t floored = 0;
  std::size_t violations() const;
};

ImportanceRatios importance_ratios(const StateMatrix& states, const Matrix& behavior,
                                   const Matrix& target);
ImportanceRatios importance_ratios(const StateMatrix& states, const PolicyModel& behavior,
                                   const Matrix& target);
ImportanceRatios importance_ratios(const StateMatrix& states, const PolicyModel& behavior,
                                   const PolicyModel& target);

void write_curve_csv(std::ostream& out, const ProductCurve& curve);

nlohmann::json product_curve_to_json(const ProductCurve& c);
ProductCurve product_curve_from_json(const nlohmann::json& j);

// Line chart of several curves on a log10 ordinate.
std::string curve_svg(const std::vector<std::pair<std::string, ProductCurve>>& curves);

}  // namespace histpolicy

#endif  // HISTPOLICY_OPE_H_

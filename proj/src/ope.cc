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

#include "histpolicy/ope.h"

#include <algorithm>
#include <map>
#include <numeric>
#include <ostream>

#include "histpolicy/csv.h"
#include "histpolicy/errors.h"
#include "histpolicy/svg.h"

namespace histpolicy {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void check_shape(const StateMatrix& states, const Matrix& probs) {
  if (probs.rows != states.rows || probs.cols != states.num_actions()) {
    throw ContractError("probability table does not match state matrix");
  }
}

}  // namespace

std::size_t ProductSeries::floored_events() const {
  return static_cast<std::size_t>(std::count(floored.begin(), floored.end(), true));
}

std::size_t ImportanceRatios::violations() const {
  return static_cast<std::size_t>(
      std::count(overlap_violation.begin(), overlap_violation.end(), true));
}

ProductSeries cumulative_products(std::span<const double> action_probs, std::string patient_id) {
  ProductSeries s;
  s.patient_id = std::move(patient_id);
  double running = 1.0;
  for (double p : action_probs) {
    const bool clipped = !(p >= kProbabilityFloor);
    // Factors are kept >= 1 so series stay monotone under rounding noise.
    const double q = std::min(1.0, clipped ? kProbabilityFloor : p);
    running *= 1.0 / q;
    s.cumulative.push_back(running);
    s.floored.push_back(clipped);
  }
  return s;
}

std::vector<ProductSeries> inverse_probability_products(const StateMatrix& states,
                                                        const Matrix& probs) {
  check_shape(states, probs);
  std::vector<std::vector<std::size_t>> rows(states.patient_ids.size());
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < states.rows; ++i) {
    if (rows[states.patient[i]].empty()) order.push_back(states.patient[i]);
    rows[states.patient[i]].push_back(i);
  }
  std::vector<ProductSeries> out;
  out.reserve(order.size());
  std::vector<double> p;
  for (std::size_t patient : order) {
    auto& r = rows[patient];
    std::stable_sort(r.begin(), r.end(),
                     [&](std::size_t a, std::size_t b) { return states.stage[a] < states.stage[b]; });
    p.clear();
    for (std::size_t i : r) p.push_back(probs(i, states.labels[i]));
    out.push_back(cumulative_products(p, states.patient_ids[patient]));
  }
  return out;
}

std::vector<ProductSeries> inverse_probability_products(const NumericEpisodeSet& episodes,
                                                        const PolicyModel& model,
                                                        const StateSpec& spec) {
  const StateMatrix states = assemble_state(episodes, spec);
  return inverse_probability_products(states, model.predict_proba(states));
}

ProductCurve median_product_curve(const std::vector<ProductSeries>& products,
                                  std::size_t max_stage, bool use_mean) {
  ProductCurve curve;
  curve.mean = use_mean;
  std::vector<double> values;
  for (std::size_t t = 0; t < max_stage; ++t) {
    values.clear();
    std::size_t floored = 0;
    for (const auto& s : products) {
      if (s.cumulative.size() <= t) continue;
      values.push_back(s.cumulative[t]);
      if (s.floored[t]) ++floored;
    }
    if (values.empty()) break;
    const double center =
        use_mean ? std::accumulate(values.begin(), values.end(), 0.0) /
                       static_cast<double>(values.size())
                 : median_of(values);
    curve.center.push_back(center);
    curve.count.push_back(values.size());
    curve.floored_events.push_back(floored);
  }
  return curve;
}

ImportanceRatios importance_ratios(const StateMatrix& states, const Matrix& behavior,
                                   const Matrix& target) {
  check_shape(states, behavior);
  check_shape(states, target);
  ImportanceRatios out;
  out.rho.reserve(states.rows);
  for (std::size_t i = 0; i < states.rows; ++i) {
    const std::size_t a = states.labels[i];
    const double mu = behavior(i, a);
    const double pi = target(i, a);
    if (!(mu >= kProbabilityFloor)) ++out.floored;
    out.rho.push_back(pi / std::max(mu, kProbabilityFloor));
    out.overlap_violation.push_back(pi > 0.0 && mu < kOverlapThreshold);
  }
  return out;
}

ImportanceRatios importance_ratios(const StateMatrix& states, const PolicyModel& behavior,
                                   const Matrix& target) {
  return importance_ratios(states, behavior.predict_proba(states), target);
}

ImportanceRatios importance_ratios(const StateMatrix& states, const PolicyModel& behavior,
                                   const PolicyModel& target) {
  return importance_ratios(states, behavior.predict_proba(states), target.predict_proba(states));
}

void write_curve_csv(std::ostream& out, const ProductCurve& curve) {
  out << csv::join({"stage", curve.mean ? "mean" : "median", "n", "floored_events"}) << '\n';
  for (std::size_t t = 0; t < curve.center.size(); ++t) {
    out << csv::join({std::to_string(t + 1), csv::fixed(curve.center[t]),
                      std::to_string(curve.count[t]), std::to_string(curve.floored_events[t])})
        << '\n';
  }
}

nlohmann::json product_curve_to_json(const ProductCurve& c) {
  return {{"center", c.center},
          {"count", c.count},
          {"floored_events", c.floored_events},
          {"mean", c.mean}};
}

ProductCurve product_curve_from_json(const nlohmann::json& j) {
  ProductCurve c;
  try {
    c.center = j.at("center").get<std::vector<double>>();
    c.count = j.at("count").get<std::vector<std::size_t>>();
    c.floored_events = j.at("floored_events").get<std::vector<std::size_t>>();
    c.mean = j.at("mean").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed product curve: ") + e.what());
  }
  return c;
}

std::string curve_svg(const std::vector<std::pair<std::string, ProductCurve>>& curves) {
  std::vector<svg::Series> series;
  bool mean = false;
  for (const auto& [label, c] : curves) {
    svg::Series s{label, {}};
    for (std::size_t t = 0; t < c.center.size(); ++t) {
      s.points.emplace_back(static_cast<double>(t + 1), c.center[t]);
    }
    mean = mean || c.mean;
    series.push_back(std::move(s));
  }
  svg::ChartOptions o;
  o.title = mean ? "Mean inverse probability product" : "Median inverse probability product";
  o.x_label = "stage t'";
  o.y_label = "product";
  o.log_y = true;
  return svg::line_chart(series, o);
}

}  // namespace histpolicy

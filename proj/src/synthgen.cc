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

#include "histpolicy/synthgen.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <string>

#include "histpolicy/csv.h"
#include "histpolicy/errors.h"
#include "histpolicy/metrics.h"

namespace histpolicy {

namespace {

constexpr std::uint64_t kParameterStream = 0x9e3779b97f4a7c15ULL;

std::mt19937_64 patient_rng(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
  return std::mt19937_64(seq);
}

bool finite(double v) { return std::isfinite(v); }

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("generator field '") + key + "': " + e.what());
  }
}

std::string patient_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%06zu", i + 1);
  return buf;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (n_patients == 0) throw ConfigError("n_patients must be positive");
  if (num_actions < 2) throw ConfigError("num_actions must be >= 2");
  if (context_dim == 0) throw ConfigError("context_dim must be positive");
  if (min_stages == 0 || max_stages < min_stages) {
    throw ConfigError("stage bounds must satisfy 1 <= min_stages <= max_stages");
  }
  if (!(geometric_p >= 0.0 && geometric_p < 1.0)) {
    throw ConfigError("geometric_p must lie in [0, 1)");
  }
  for (double v : {w_x, w_a, w_agg, w_lag, policy_scale, ar_coef, noise_scale, drift_scale,
                   severity_base, severity_coupling, severity_noise}) {
    if (!finite(v)) throw ConfigError("generator weights must be finite");
  }
  if (noise_scale < 0.0 || drift_scale < 0.0 || severity_noise < 0.0) {
    throw ConfigError("noise scales must be non-negative");
  }
}

nlohmann::json generator_config_to_json(const GeneratorConfig& c) {
  return {{"n_patients", c.n_patients},
          {"num_actions", c.num_actions},
          {"context_dim", c.context_dim},
          {"min_stages", c.min_stages},
          {"max_stages", c.max_stages},
          {"geometric_p", c.geometric_p},
          {"w_x", c.w_x},
          {"w_a", c.w_a},
          {"w_agg", c.w_agg},
          {"w_lag", c.w_lag},
          {"policy_scale", c.policy_scale},
          {"ar_coef", c.ar_coef},
          {"noise_scale", c.noise_scale},
          {"drift_scale", c.drift_scale},
          {"severity_base", c.severity_base},
          {"severity_coupling", c.severity_coupling},
          {"severity_noise", c.severity_noise},
          {"seed", c.seed},
          {"policy_seed", c.policy_seed ? nlohmann::json(*c.policy_seed) : nlohmann::json(nullptr)}};
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("generator config must be a JSON object");
  static const std::set<std::string> known = {
      "n_patients", "num_actions", "context_dim", "min_stages", "max_stages",
      "geometric_p", "w_x", "w_a", "w_agg", "w_lag", "policy_scale", "ar_coef",
      "noise_scale", "drift_scale", "severity_base", "severity_coupling",
      "severity_noise", "seed", "policy_seed"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw ConfigError("unknown generator field '" + item.key() + "'");
    }
  }
  GeneratorConfig c;
  read_field(j, "n_patients", c.n_patients);
  read_field(j, "num_actions", c.num_actions);
  read_field(j, "context_dim", c.context_dim);
  read_field(j, "min_stages", c.min_stages);
  read_field(j, "max_stages", c.max_stages);
  if (j.contains("min_stages") && !j.contains("max_stages")) c.max_stages = c.min_stages;
  read_field(j, "geometric_p", c.geometric_p);
  read_field(j, "w_x", c.w_x);
  read_field(j, "w_a", c.w_a);
  read_field(j, "w_agg", c.w_agg);
  read_field(j, "w_lag", c.w_lag);
  read_field(j, "policy_scale", c.policy_scale);
  read_field(j, "ar_coef", c.ar_coef);
  read_field(j, "noise_scale", c.noise_scale);
  read_field(j, "drift_scale", c.drift_scale);
  read_field(j, "severity_base", c.severity_base);
  read_field(j, "severity_coupling", c.severity_coupling);
  read_field(j, "severity_noise", c.severity_noise);
  read_field(j, "seed", c.seed);
  if (j.contains("policy_seed") && !j.at("policy_seed").is_null()) {
    std::uint64_t ps = 0;
    read_field(j, "policy_seed", ps);
    c.policy_seed = ps;
  }
  c.validate();
  return c;
}

PolicyParameters policy_parameters(const GeneratorConfig& cfg) {
  std::mt19937_64 rng(cfg.policy_seed.value_or(cfg.seed) ^ kParameterStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto k = static_cast<Eigen::Index>(cfg.num_actions);
  const auto d = static_cast<Eigen::Index>(cfg.context_dim);
  PolicyParameters p;
  p.context_weights.resize(k, d);
  p.lag_weights.resize(k, d);
  p.drift.resize(k, d);
  p.severity_loadings.resize(d);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index i = 0; i < d; ++i) p.context_weights(a, i) = normal(rng);
  }
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index i = 0; i < d; ++i) p.lag_weights(a, i) = normal(rng);
  }
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index i = 0; i < d; ++i) p.drift(a, i) = cfg.drift_scale * normal(rng);
  }
  for (Eigen::Index i = 0; i < d; ++i) p.severity_loadings(i) = normal(rng);
  return p;
}

void policy_probabilities(const GeneratorConfig& cfg, const PolicyParameters& params,
                          std::span<const double> x_t, std::span<const double> x_lag,
                          std::size_t prev, std::span<const double> counts,
                          std::span<double> out) {
  const std::size_t k = cfg.num_actions;
  const std::size_t d = cfg.context_dim;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < k; ++a) {
    double cur = 0.0;
    double lag = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      cur += params.context_weights(a, i) * x_t[i];
      lag += params.lag_weights(a, i) * x_lag[i];
    }
    const double logit = cfg.policy_scale *
                         (cfg.w_x * cur + cfg.w_a * (prev == a ? 1.0 : 0.0) +
                          cfg.w_agg * counts[a] + cfg.w_lag * lag);
    out[a] = logit;
    top = std::max(top, logit);
  }
  double total = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    out[a] = std::exp(out[a] - top);
    total += out[a];
  }
  for (std::size_t a = 0; a < k; ++a) out[a] /= total;
}

CohortSchema synthetic_schema(const GeneratorConfig& cfg) {
  CohortSchema s;
  for (std::size_t i = 0; i < cfg.context_dim; ++i) {
    VariableSpec v;
    v.name = "x" + std::to_string(i + 1);
    v.kind = VariableKind::kNumeric;
    v.transform = Transform::kStandardize;
    s.variables.push_back(v);
  }
  for (std::size_t a = 0; a < cfg.num_actions; ++a) {
    s.action_labels.push_back("a" + std::to_string(a + 1));
  }
  s.default_action = s.action_labels.front();
  s.severity_column = "severity";
  return s;
}

SyntheticCohort generate_cohort(const GeneratorConfig& cfg) {
  cfg.validate();
  const PolicyParameters params = policy_parameters(cfg);
  const std::size_t k = cfg.num_actions;
  const std::size_t d = cfg.context_dim;

  SyntheticCohort cohort;
  cohort.schema = synthetic_schema(cfg);
  cohort.episodes.reserve(cfg.n_patients);
  std::vector<std::vector<double>> oracle_rows;

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (std::size_t n = 0; n < cfg.n_patients; ++n) {
    auto rng = patient_rng(cfg.seed, n);
    std::size_t length = cfg.min_stages;
    if (cfg.geometric_p > 0.0) {
      std::geometric_distribution<std::size_t> geo(cfg.geometric_p);
      length = std::min(cfg.max_stages, cfg.min_stages + geo(rng));
    }

    Episode ep;
    ep.patient_id = patient_name(n);
    std::vector<double> x(d), x_prev(d), x_next(d), counts(k, 0.0), probs(k);
    for (double& v : x) v = normal(rng);
    x_prev = x;
    std::size_t prev = 0;  // default action pads A_0
    for (std::size_t t = 0; t < length; ++t) {
      policy_probabilities(cfg, params, x, x_prev, prev, counts, probs);
      const double u = uniform(rng);
      std::size_t action = k - 1;
      double cum = 0.0;
      for (std::size_t a = 0; a < k; ++a) {
        cum += probs[a];
        if (u < cum) {
          action = a;
          break;
        }
      }
      double severity = cfg.severity_base;
      for (std::size_t i = 0; i < d; ++i) {
        severity += cfg.severity_coupling * params.severity_loadings(static_cast<Eigen::Index>(i)) * x[i];
      }
      severity += cfg.severity_noise * normal(rng);

      Stage st;
      st.context.assign(x.begin(), x.end());
      st.action = action;
      st.severity = severity;
      ep.stages.push_back(std::move(st));
      oracle_rows.push_back(probs);

      for (std::size_t i = 0; i < d; ++i) {
        x_next[i] = cfg.ar_coef * x[i] + params.drift(static_cast<Eigen::Index>(action), static_cast<Eigen::Index>(i)) +
                    cfg.noise_scale * normal(rng);
      }
      counts[action] += 1.0;
      prev = action;
      x_prev = x;
      x = x_next;
    }
    cohort.episodes.push_back(std::move(ep));
  }

  cohort.oracle = Matrix(oracle_rows.size(), k);
  for (std::size_t r = 0; r < oracle_rows.size(); ++r) {
    std::copy(oracle_rows[r].begin(), oracle_rows[r].end(), cohort.oracle.row(r).begin());
  }
  return cohort;
}

OracleResult oracle_probabilities(const GeneratorConfig& cfg, const EpisodeSet& episodes) {
  cfg.validate();
  const PolicyParameters params = policy_parameters(cfg);
  const std::size_t k = cfg.num_actions;
  const std::size_t d = cfg.context_dim;
  OracleResult res;
  res.probs = Matrix(total_stages(episodes), k);
  std::size_t row = 0;
  std::vector<double> x(d), x_prev(d), counts(k);
  for (const auto& ep : episodes) {
    std::fill(counts.begin(), counts.end(), 0.0);
    std::size_t prev = 0;
    for (std::size_t t = 0; t < ep.stages.size(); ++t) {
      const auto& st = ep.stages[t];
      if (st.context.size() != d) throw DataError("episode context width does not match generator");
      for (std::size_t i = 0; i < d; ++i) {
        const double* v = std::get_if<double>(&st.context[i]);
        if (!v) throw DataError("synthetic contexts must be numeric and complete");
        x[i] = *v;
      }
      if (t == 0) x_prev = x;
      if (st.action >= k) throw DataError("action outside generator action set");
      policy_probabilities(cfg, params, x, x_prev, prev, counts, res.probs.row(row));
      res.actions.push_back(st.action);
      ++row;
      counts[st.action] += 1.0;
      prev = st.action;
      x_prev = x;
    }
  }
  res.auroc = auroc_multiclass(res.probs, res.actions);
  return res;
}

void write_oracle_csv(std::ostream& out, const SyntheticCohort& cohort) {
  std::vector<std::string> header = {"patient_id", "t"};
  for (std::size_t a = 0; a < cohort.oracle.cols; ++a) {
    header.push_back("p_true_" + std::to_string(a + 1));
  }
  out << csv::join(header) << '\n';
  std::size_t row = 0;
  for (const auto& ep : cohort.episodes) {
    for (std::size_t t = 0; t < ep.stages.size(); ++t, ++row) {
      std::vector<std::string> cells = {ep.patient_id, std::to_string(t + 1)};
      for (double p : cohort.oracle.row(row)) cells.push_back(csv::fixed(p, 12));
      out << csv::join(cells) << '\n';
    }
  }
}

}  // namespace histpolicy

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

#include "histpolicy/staterep.h"

#include <algorithm>
#include <ostream>

#include "histpolicy/csv.h"
#include "histpolicy/errors.h"

namespace histpolicy {

const char* aggregate_op_name(AggregateOp op) {
  switch (op) {
    case AggregateOp::kNone: return "none";
    case AggregateOp::kSum: return "sum";
    case AggregateOp::kMax: return "max";
    case AggregateOp::kMean: return "mean";
  }
  return "none";
}

AggregateOp parse_aggregate_op(const std::string& name) {
  if (name == "none") return AggregateOp::kNone;
  if (name == "sum") return AggregateOp::kSum;
  if (name == "max") return AggregateOp::kMax;
  if (name == "mean") return AggregateOp::kMean;
  throw ConfigError("unknown aggregation operator '" + name + "'");
}

void StateSpec::validate() const {
  if (window_k && *window_k < 0) throw ConfigError("window_k must be >= 0");
  if (!include_current && !include_prev_action && !window_k &&
      aggregate == AggregateOp::kNone) {
    throw ConfigError("state spec includes nothing");
  }
}

std::string StateSpec::label() const {
  std::vector<std::string> parts;
  if (window_k) {
    parts.push_back("H(" + std::to_string(*window_k) + ")");
  } else {
    if (include_current) parts.emplace_back("X_t");
    if (include_prev_action) parts.emplace_back("A_t-1");
  }
  if (aggregate != AggregateOp::kNone) {
    parts.push_back(std::string("Hbar_") + aggregate_op_name(aggregate));
  }
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : "+") + p;
  return out;
}

nlohmann::json state_spec_to_json(const StateSpec& spec) {
  return {{"current", spec.include_current},
          {"prev_action", spec.include_prev_action},
          {"window_k", spec.window_k ? nlohmann::json(*spec.window_k)
                                     : nlohmann::json(nullptr)},
          {"agg", aggregate_op_name(spec.aggregate)}};
}

StateSpec state_spec_from_json(const nlohmann::json& j) {
  StateSpec s;
  try {
    s.include_current = j.value("current", false);
    s.include_prev_action = j.value("prev_action", false);
    if (j.contains("window_k") && !j.at("window_k").is_null()) {
      s.window_k = j.at("window_k").get<int>();
    }
    s.aggregate = parse_aggregate_op(j.value("agg", std::string("none")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid state spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<StateSpec> standard_states(AggregateOp op) {
  return {
      {.include_current = true},
      {.include_prev_action = true},
      {.include_current = true, .include_prev_action = true, .window_k = 0},
      {.aggregate = op},
      {.include_current = true, .include_prev_action = true, .window_k = 0,
       .aggregate = op},
      {.include_current = true, .include_prev_action = true, .window_k = 1,
       .aggregate = op},
      {.include_current = true, .include_prev_action = true, .window_k = 2,
       .aggregate = op},
  };
}

namespace {

std::string agg_suffix(AggregateOp op) {
  return std::string("@agg_") + aggregate_op_name(op);
}

std::string lag_suffix(int lag) { return "@lag" + std::to_string(lag); }

void combine(AggregateOp op, double& acc, double x) {
  switch (op) {
    case AggregateOp::kSum:
    case AggregateOp::kMean: acc += x; break;
    case AggregateOp::kMax: acc = std::max(acc, x); break;
    case AggregateOp::kNone: break;
  }
}

// Running aggregates for one episode, advanced one stage at a time so that a
// full episode costs O(T) instead of O(T^2).
class AggregateAccumulator {
 public:
  AggregateAccumulator(const NumericEpisodeSet& set, AggregateOp op) : op_(op) {
    for (std::size_t c = 0; c < set.width(); ++c) {
      if (set.columns[c].aggregate_eligible) eligible_.push_back(c);
    }
    ctx_.assign(eligible_.size(), 0.0);
    act_.assign(set.num_actions(), 0.0);
  }

  // Folds in context X_t and, for t > 1, action A_{t-1}.
  void advance(const NumericEpisode& ep, std::size_t t) {
    const auto x = ep.at(t - 1);
    for (std::size_t i = 0; i < eligible_.size(); ++i) {
      const double v = x[eligible_[i]];
      if (t == 1) {
        ctx_[i] = v;
      } else {
        combine(op_, ctx_[i], v);
      }
    }
    if (t > 1) {
      const std::size_t a = ep.actions[t - 2];
      for (std::size_t j = 0; j < act_.size(); ++j) {
        combine(op_, act_[j], j == a ? 1.0 : 0.0);
      }
    }
    t_ = t;
  }

  void emit(std::vector<double>& out) const {
    const double n_ctx = static_cast<double>(t_);
    const double n_act = static_cast<double>(t_ - 1);
    for (double v : ctx_) out.push_back(op_ == AggregateOp::kMean ? v / n_ctx : v);
    for (double v : act_) {
      out.push_back(op_ == AggregateOp::kMean ? (t_ > 1 ? v / n_act : 0.0) : v);
    }
  }

 private:
  AggregateOp op_;
  std::vector<std::size_t> eligible_;
  std::vector<double> ctx_;
  std::vector<double> act_;
  std::size_t t_ = 0;
};

void check_stage(const NumericEpisode& ep, std::size_t t) {
  if (t < 1 || t > ep.length) {
    throw ContractError("stage " + std::to_string(t) + " outside 1.." +
                        std::to_string(ep.length));
  }
}

}  // namespace

std::vector<std::string> aggregate_feature_names(const NumericEpisodeSet& set,
                                                 AggregateOp op) {
  std::vector<std::string> names;
  if (op == AggregateOp::kNone) return names;
  for (const auto& c : set.columns) {
    if (c.aggregate_eligible) names.push_back(c.name + agg_suffix(op));
  }
  for (const auto& a : set.action_labels) {
    names.push_back("action:" + a + agg_suffix(op));
  }
  return names;
}

std::vector<double> aggregate_history(const NumericEpisodeSet& set,
                                      const NumericEpisode& episode,
                                      std::size_t t, AggregateOp op) {
  check_stage(episode, t);
  std::vector<double> out;
  if (op == AggregateOp::kNone) return out;
  // Direct evaluation over the prefix; assemble_state uses the incremental
  // accumulator instead.
  for (std::size_t c = 0; c < set.width(); ++c) {
    if (!set.columns[c].aggregate_eligible) continue;
    double acc = episode.at(0)[c];
    for (std::size_t s = 1; s < t; ++s) combine(op, acc, episode.at(s)[c]);
    out.push_back(op == AggregateOp::kMean ? acc / static_cast<double>(t) : acc);
  }
  for (std::size_t j = 0; j < set.num_actions(); ++j) {
    double acc = 0.0;
    for (std::size_t s = 0; s + 1 < t; ++s) {
      combine(op, acc, episode.actions[s] == j ? 1.0 : 0.0);
    }
    if (op == AggregateOp::kMean && t > 1) acc /= static_cast<double>(t - 1);
    out.push_back(acc);
  }
  return out;
}

std::vector<std::string> truncation_feature_names(const NumericEpisodeSet& set,
                                                  int k) {
  std::vector<std::string> names;
  for (int lag = 0; lag <= k; ++lag) {
    for (const auto& c : set.columns) {
      if (c.lag_eligible) names.push_back(lag == 0 ? c.name : c.name + lag_suffix(lag));
    }
  }
  for (int lag = 1; lag <= k + 1; ++lag) {
    for (const auto& a : set.action_labels) {
      names.push_back("action:" + a + lag_suffix(lag));
    }
  }
  return names;
}

namespace {

void push_lagged_context(const NumericEpisodeSet& set, const NumericEpisode& ep,
                         std::size_t t, int lag, bool eligible_only,
                         std::vector<double>& out) {
  const long long s = static_cast<long long>(t) - lag;
  const auto x = ep.at(s >= 1 ? static_cast<std::size_t>(s - 1) : 0);
  for (std::size_t c = 0; c < set.width(); ++c) {
    if (!eligible_only || set.columns[c].lag_eligible) out.push_back(x[c]);
  }
}

void push_lagged_action(const NumericEpisodeSet& set, const NumericEpisode& ep,
                        std::size_t t, int lag, std::vector<double>& out) {
  const long long s = static_cast<long long>(t) - lag;
  const std::size_t a =
      s >= 1 ? ep.actions[static_cast<std::size_t>(s - 1)] : set.default_action;
  for (std::size_t j = 0; j < set.num_actions(); ++j) {
    out.push_back(j == a ? 1.0 : 0.0);
  }
}

}  // namespace

std::vector<double> truncate_history(const NumericEpisodeSet& set,
                                     const NumericEpisode& episode,
                                     std::size_t t, int k) {
  check_stage(episode, t);
  if (k < 0) throw ContractError("window must be >= 0");
  std::vector<double> out;
  for (int lag = 0; lag <= k; ++lag) push_lagged_context(set, episode, t, lag, true, out);
  for (int lag = 1; lag <= k + 1; ++lag) push_lagged_action(set, episode, t, lag, out);
  return out;
}

StateMatrix StateMatrix::subset(std::span<const std::size_t> row_indices) const {
  StateMatrix m;
  m.feature_names = feature_names;
  m.action_labels = action_labels;
  m.default_action = default_action;
  m.patient_ids = patient_ids;
  m.rows = row_indices.size();
  m.values.reserve(m.rows * cols());
  for (std::size_t i : row_indices) {
    const auto r = row(i);
    m.values.insert(m.values.end(), r.begin(), r.end());
    m.labels.push_back(labels[i]);
    m.patient.push_back(patient[i]);
    m.stage.push_back(stage[i]);
    m.prev_action.push_back(prev_action[i]);
    m.severity.push_back(severity[i]);
    m.fold.push_back(fold[i]);
  }
  return m;
}

StateMatrix assemble_state(const NumericEpisodeSet& set, const StateSpec& spec) {
  spec.validate();
  const bool current = spec.uses_current();
  const bool prev = spec.uses_prev_action();
  const int k = spec.window_k.value_or(0);
  const bool aggregate = spec.aggregate != AggregateOp::kNone;
  // Without the current context, the aggregate block still carries the
  // current value of variables that are never aggregated.
  const bool ineligible_current = !current && aggregate;

  StateMatrix m;
  m.action_labels = set.action_labels;
  m.default_action = set.default_action;
  for (const auto& c : set.columns) {
    if (current || (ineligible_current && !c.aggregate_eligible)) {
      m.feature_names.push_back(c.name);
    }
  }
  for (int lag = 1; lag <= k; ++lag) {
    for (const auto& c : set.columns) {
      if (c.lag_eligible) m.feature_names.push_back(c.name + lag_suffix(lag));
    }
  }
  for (int lag = 2; lag <= k + 1 && spec.window_k; ++lag) {
    for (const auto& a : set.action_labels) {
      m.feature_names.push_back("action:" + a + lag_suffix(lag));
    }
  }
  if (prev) {
    for (const auto& a : set.action_labels) {
      m.feature_names.push_back("action:" + a + lag_suffix(1));
    }
  }
  const auto agg_names = aggregate_feature_names(set, spec.aggregate);
  m.feature_names.insert(m.feature_names.end(), agg_names.begin(), agg_names.end());

  const std::size_t n = set.total_stages();
  m.rows = n;
  m.values.reserve(n * m.cols());
  for (std::size_t p = 0; p < set.episodes.size(); ++p) {
    const auto& ep = set.episodes[p];
    m.patient_ids.push_back(ep.patient_id);
    AggregateAccumulator acc(set, spec.aggregate);
    for (std::size_t t = 1; t <= ep.length; ++t) {
      const auto x = ep.at(t - 1);
      for (std::size_t c = 0; c < set.width(); ++c) {
        if (current || (ineligible_current && !set.columns[c].aggregate_eligible)) {
          m.values.push_back(x[c]);
        }
      }
      for (int lag = 1; lag <= k; ++lag) push_lagged_context(set, ep, t, lag, true, m.values);
      for (int lag = 2; lag <= k + 1 && spec.window_k; ++lag) {
        push_lagged_action(set, ep, t, lag, m.values);
      }
      if (prev) push_lagged_action(set, ep, t, 1, m.values);
      if (aggregate) {
        acc.advance(ep, t);
        acc.emit(m.values);
      }
      m.labels.push_back(ep.actions[t - 1]);
      m.patient.push_back(p);
      m.stage.push_back(t);
      m.prev_action.push_back(t > 1 ? ep.actions[t - 2] : set.default_action);
      m.severity.push_back(ep.severity[t - 1]);
      m.fold.push_back(0);
    }
  }
  return m;
}

void write_state_csv(std::ostream& out, const StateMatrix& m) {
  std::vector<std::string> header = {"patient_id", "t", "action"};
  header.insert(header.end(), m.feature_names.begin(), m.feature_names.end());
  out << csv::join(header) << '\n';
  for (std::size_t i = 0; i < m.rows; ++i) {
    std::vector<std::string> row = {m.patient_ids[m.patient[i]],
                                    std::to_string(m.stage[i]),
                                    m.action_labels[m.labels[i]]};
    for (double v : m.row(i)) row.push_back(csv::fixed(v));
    out << csv::join(row) << '\n';
  }
}

}  // namespace histpolicy

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

#include "histpolicy/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "histpolicy/csv.h"
#include "histpolicy/errors.h"

namespace histpolicy {
namespace {

using nlohmann::json;

const char* transform_name(Transform t) {
  switch (t) {
    case Transform::kNone: return "none";
    case Transform::kStandardize: return "standardize";
    case Transform::kLogStandardize: return "log-standardize";
    case Transform::kQuintiles: return "discretize-quintiles";
  }
  return "none";
}

Transform parse_transform(const std::string& s) {
  if (s == "none") return Transform::kNone;
  if (s == "standardize") return Transform::kStandardize;
  if (s == "log-standardize") return Transform::kLogStandardize;
  if (s == "discretize-quintiles") return Transform::kQuintiles;
  throw SchemaError("unknown transform '" + s + "'");
}

json value_to_json(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return nullptr;
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::string buf(s);
  char* end = nullptr;
  const double d = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size()) return std::nullopt;
  return d;
}

bool is_missing_token(std::string_view s) {
  return s.empty() || s == "NA" || s == "nan" || s == "NaN";
}

// Converts a JSON scalar to a Value for the given variable kind.
Value json_to_value(const json& j, const VariableSpec& var, std::size_t line) {
  if (j.is_null()) return std::monostate{};
  if (var.kind == VariableKind::kNumeric) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
      const auto s = j.get<std::string>();
      if (is_missing_token(s)) return std::monostate{};
      if (auto d = parse_double(s)) return *d;
    }
    throw ParseError("non-numeric value for variable '" + var.name + "'", line);
  }
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number() || j.is_boolean()) return j.dump();
  throw ParseError("invalid category for variable '" + var.name + "'", line);
}

Value cell_to_value(const std::string& cell, const VariableSpec& var,
                    std::size_t line) {
  if (is_missing_token(cell)) return std::monostate{};
  if (var.kind == VariableKind::kNumeric) {
    if (auto d = parse_double(cell)) return *d;
    throw ParseError("non-numeric value '" + cell + "' for variable '" +
                         var.name + "'",
                     line);
  }
  return cell;
}

void check_contiguous(const Episode& ep, const std::vector<long long>& ts) {
  if (ts.empty()) {
    throw SchemaError("patient '" + ep.patient_id + "' has no stages");
  }
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i] != static_cast<long long>(i + 1)) {
      throw SchemaError("non-contiguous stages for patient '" +
                        ep.patient_id + "'");
    }
  }
}

double mode_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double best = values.front();
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < values.size();) {
    std::size_t j = i;
    while (j < values.size() && values[j] == values[i]) ++j;
    if (j - i > best_count) {
      best_count = j - i;
      best = values[i];
    }
    i = j;
  }
  return best;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// CohortSchema

void CohortSchema::validate() const {
  if (action_labels.size() < 2) {
    throw SchemaError("schema needs at least two actions");
  }
  std::set<std::string> seen(action_labels.begin(), action_labels.end());
  if (seen.size() != action_labels.size()) {
    throw SchemaError("duplicate action label");
  }
  if (!seen.count(default_action)) {
    throw SchemaError("default action '" + default_action +
                      "' is not a declared action");
  }
  std::set<std::string> names;
  for (const auto& v : variables) {
    if (!names.insert(v.name).second) {
      throw SchemaError("duplicate variable '" + v.name + "'");
    }
    if (v.kind == VariableKind::kCategorical && v.transform != Transform::kNone) {
      throw SchemaError("categorical variable '" + v.name +
                        "' only supports transform 'none'");
    }
    if (v.imputation.kind == Imputation::Kind::kConstant) {
      const bool numeric_const = std::holds_alternative<double>(v.imputation.constant);
      if ((v.kind == VariableKind::kNumeric) != numeric_const) {
        throw SchemaError("constant imputation for '" + v.name +
                          "' does not match the variable kind");
      }
    }
  }
}

std::size_t CohortSchema::action_index(std::string_view label) const {
  for (std::size_t i = 0; i < action_labels.size(); ++i) {
    if (action_labels[i] == label) return i;
  }
  throw SchemaError("unknown action label '" + std::string(label) + "'");
}

std::optional<std::size_t> CohortSchema::variable_index(
    std::string_view name) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i].name == name) return i;
  }
  return std::nullopt;
}

CohortSchema schema_from_json(const json& j) {
  CohortSchema s;
  try {
    for (const auto& jv : j.at("variables")) {
      VariableSpec v;
      v.name = jv.at("name").get<std::string>();
      const auto kind = jv.value("kind", std::string("numeric"));
      if (kind == "numeric") {
        v.kind = VariableKind::kNumeric;
      } else if (kind == "categorical") {
        v.kind = VariableKind::kCategorical;
      } else {
        throw SchemaError("unknown variable kind '" + kind + "'");
      }
      const bool numeric = v.kind == VariableKind::kNumeric;
      v.transform = parse_transform(
          jv.value("transform", std::string(numeric ? "standardize" : "none")));
      v.imputation.kind = numeric ? Imputation::Kind::kLocfThenMean
                                  : Imputation::Kind::kLocfThenMode;
      if (jv.contains("imputation")) {
        const auto& ji = jv.at("imputation");
        if (ji.is_object()) {
          v.imputation.kind = Imputation::Kind::kConstant;
          const auto& c = ji.at("constant");
          if (c.is_number()) {
            v.imputation.constant = c.get<double>();
          } else {
            v.imputation.constant = c.is_string() ? c.get<std::string>() : c.dump();
          }
        } else {
          const auto name = ji.get<std::string>();
          if (name == "locf-then-mean") {
            v.imputation.kind = Imputation::Kind::kLocfThenMean;
          } else if (name == "locf-then-mode") {
            v.imputation.kind = Imputation::Kind::kLocfThenMode;
          } else {
            throw SchemaError("unknown imputation '" + name + "'");
          }
        }
      }
      v.aggregate_eligible = jv.value("aggregate", true);
      v.lag_eligible = jv.value("lag", true);
      s.variables.push_back(std::move(v));
    }
    s.action_labels = j.at("actions").get<std::vector<std::string>>();
    s.default_action = j.value("default_action",
                               s.action_labels.empty() ? std::string()
                                                       : s.action_labels[0]);
    if (j.contains("severity_column") && !j.at("severity_column").is_null()) {
      s.severity_column = j.at("severity_column").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("invalid schema: ") + e.what());
  }
  s.validate();
  return s;
}

json schema_to_json(const CohortSchema& s) {
  json vars = json::array();
  for (const auto& v : s.variables) {
    json jv = {{"name", v.name},
               {"kind", v.kind == VariableKind::kNumeric ? "numeric" : "categorical"},
               {"transform", transform_name(v.transform)},
               {"aggregate", v.aggregate_eligible},
               {"lag", v.lag_eligible}};
    switch (v.imputation.kind) {
      case Imputation::Kind::kLocfThenMean: jv["imputation"] = "locf-then-mean"; break;
      case Imputation::Kind::kLocfThenMode: jv["imputation"] = "locf-then-mode"; break;
      case Imputation::Kind::kConstant:
        jv["imputation"] = {{"constant", value_to_json(v.imputation.constant)}};
        break;
    }
    vars.push_back(std::move(jv));
  }
  return {{"variables", vars},
          {"actions", s.action_labels},
          {"default_action", s.default_action},
          {"severity_column",
           s.severity_column ? json(*s.severity_column) : json(nullptr)}};
}

CohortSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("schema file " + path.string() + ": " + e.what());
  }
  return schema_from_json(j);
}

// ---------------------------------------------------------------------------
// Loading

EpisodeSet read_episodes_jsonl(std::istream& in, const CohortSchema& schema) {
  EpisodeSet out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    if (!rec.is_object() || !rec.contains("patient_id") ||
        !rec.contains("stages") || !rec.at("stages").is_array()) {
      throw ParseError("record needs 'patient_id' and a 'stages' array", lineno);
    }
    Episode ep;
    const auto& pid = rec.at("patient_id");
    ep.patient_id = pid.is_string() ? pid.get<std::string>() : pid.dump();
    if (!ids.insert(ep.patient_id).second) {
      throw SchemaError("duplicate patient '" + ep.patient_id + "' (line " +
                        std::to_string(lineno) + ")");
    }
    std::vector<std::pair<long long, Stage>> staged;
    for (const auto& js : rec.at("stages")) {
      if (!js.is_object() || !js.contains("t") || !js.at("t").is_number_integer() ||
          !js.contains("action")) {
        throw ParseError("stage needs integer 't' and 'action'", lineno);
      }
      Stage st;
      st.context.assign(schema.variables.size(), std::monostate{});
      if (js.contains("context")) {
        const auto& ctx = js.at("context");
        if (!ctx.is_object()) throw ParseError("'context' must be an object", lineno);
        for (const auto& [name, val] : ctx.items()) {
          const auto idx = schema.variable_index(name);
          if (!idx) {
            throw SchemaError("unknown variable '" + name + "' (line " +
                              std::to_string(lineno) + ")");
          }
          st.context[*idx] = json_to_value(val, schema.variables[*idx], lineno);
        }
      }
      const auto& ja = js.at("action");
      st.action = schema.action_index(ja.is_string() ? ja.get<std::string>() : ja.dump());
      if (js.contains("severity") && !js.at("severity").is_null()) {
        if (!js.at("severity").is_number()) {
          throw ParseError("'severity' must be a number or null", lineno);
        }
        st.severity = js.at("severity").get<double>();
      }
      staged.emplace_back(js.at("t").get<long long>(), std::move(st));
    }
    std::stable_sort(staged.begin(), staged.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<long long> ts;
    for (auto& [t, st] : staged) {
      ts.push_back(t);
      ep.stages.push_back(std::move(st));
    }
    check_contiguous(ep, ts);
    out.push_back(std::move(ep));
  }
  if (out.empty()) throw DataError("no episodes");
  return out;
}

EpisodeSet read_episodes_csv(std::istream& in, const CohortSchema& schema) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    header = csv::split_line(line);
    break;
  }
  if (header.empty()) throw DataError("no episodes");

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::size_t col_pid = kNone, col_t = kNone, col_action = kNone, col_sev = kNone;
  std::vector<std::pair<std::size_t, std::size_t>> var_cols;  // (column, variable)
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h == "patient_id") {
      col_pid = c;
    } else if (h == "t") {
      col_t = c;
    } else if (h == "action") {
      col_action = c;
    } else if (h == "severity" || (schema.severity_column && h == *schema.severity_column)) {
      col_sev = c;
    } else if (auto idx = schema.variable_index(h)) {
      var_cols.emplace_back(c, *idx);
    } else {
      throw SchemaError("unknown column '" + h + "'");
    }
  }
  if (col_pid == kNone || col_t == kNone || col_action == kNone) {
    throw SchemaError("CSV needs columns patient_id, t and action");
  }

  EpisodeSet out;
  std::unordered_set<std::string> finished;
  std::vector<long long> ts;
  auto close_episode = [&]() {
    if (out.empty()) return;
    check_contiguous(out.back(), ts);
    finished.insert(out.back().patient_id);
    ts.clear();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = csv::split_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) +
                           " fields, got " + std::to_string(cells.size()),
                       lineno);
    }
    const auto& pid = cells[col_pid];
    if (out.empty() || out.back().patient_id != pid) {
      close_episode();
      if (finished.count(pid)) {
        throw SchemaError("rows for patient '" + pid +
                          "' are not contiguous (line " + std::to_string(lineno) + ")");
      }
      out.push_back(Episode{pid, {}});
    }
    long long t = 0;
    const auto& ct = cells[col_t];
    const auto res = std::from_chars(ct.data(), ct.data() + ct.size(), t);
    if (res.ec != std::errc() || res.ptr != ct.data() + ct.size()) {
      throw ParseError("invalid stage index '" + ct + "'", lineno);
    }
    ts.push_back(t);
    Stage st;
    st.context.assign(schema.variables.size(), std::monostate{});
    for (const auto& [c, v] : var_cols) {
      st.context[v] = cell_to_value(cells[c], schema.variables[v], lineno);
    }
    st.action = schema.action_index(cells[col_action]);
    if (col_sev != kNone && !is_missing_token(cells[col_sev])) {
      auto d = parse_double(cells[col_sev]);
      if (!d) throw ParseError("invalid severity '" + cells[col_sev] + "'", lineno);
      st.severity = *d;
    }
    out.back().stages.push_back(std::move(st));
  }
  close_episode();
  if (out.empty()) throw DataError("no episodes");
  return out;
}

EpisodeSet load_episodes(const std::filesystem::path& path,
                         const CohortSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  bool is_csv = path.extension() == ".csv";
  if (path.extension() != ".csv" && path.extension() != ".jsonl" &&
      path.extension() != ".json") {
    const int c = (in >> std::ws).peek();
    is_csv = c != '{' && c != std::char_traits<char>::eof();
  }
  return is_csv ? read_episodes_csv(in, schema) : read_episodes_jsonl(in, schema);
}

void write_episodes_jsonl(std::ostream& out, const EpisodeSet& episodes,
                          const CohortSchema& schema) {
  for (const auto& ep : episodes) {
    json stages = json::array();
    for (std::size_t t = 0; t < ep.stages.size(); ++t) {
      const auto& st = ep.stages[t];
      json ctx = json::object();
      for (std::size_t v = 0; v < schema.variables.size(); ++v) {
        ctx[schema.variables[v].name] = value_to_json(st.context[v]);
      }
      stages.push_back({{"t", t + 1},
                        {"context", std::move(ctx)},
                        {"action", schema.action_labels.at(st.action)},
                        {"severity", st.severity ? json(*st.severity) : json(nullptr)}});
    }
    out << json{{"patient_id", ep.patient_id}, {"stages", std::move(stages)}}.dump()
        << '\n';
  }
}

void write_episodes_csv(std::ostream& out, const EpisodeSet& episodes,
                        const CohortSchema& schema) {
  std::vector<std::string> header = {"patient_id", "t", "action", "severity"};
  for (const auto& v : schema.variables) header.push_back(v.name);
  out << csv::join(header) << '\n';
  for (const auto& ep : episodes) {
    for (std::size_t t = 0; t < ep.stages.size(); ++t) {
      const auto& st = ep.stages[t];
      std::vector<std::string> row = {ep.patient_id, std::to_string(t + 1),
                                      schema.action_labels.at(st.action),
                                      st.severity ? json(*st.severity).dump() : ""};
      for (const auto& v : st.context) {
        if (const auto* d = std::get_if<double>(&v)) {
          row.push_back(json(*d).dump());
        } else if (const auto* s = std::get_if<std::string>(&v)) {
          row.push_back(*s);
        } else {
          row.emplace_back();
        }
      }
      out << csv::join(row) << '\n';
    }
  }
}

std::size_t total_stages(const EpisodeSet& episodes) {
  std::size_t n = 0;
  for (const auto& ep : episodes) n += ep.stages.size();
  return n;
}

std::size_t NumericEpisodeSet::total_stages() const {
  std::size_t n = 0;
  for (const auto& ep : episodes) n += ep.length;
  return n;
}

// ---------------------------------------------------------------------------
// Preprocessing

double interpolated_percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DataError("percentile of an empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

// LOCF within one patient; leading missings stay missing.
std::vector<Value> locf(const std::vector<Value>& series) {
  std::vector<Value> out = series;
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (is_missing(out[i])) out[i] = out[i - 1];
  }
  return out;
}

double log_domain(double x) { return std::log(std::max(x, 0.0) + kLogEpsilon); }

}  // namespace

std::vector<Value> Preprocessor::impute_series(
    std::size_t variable, const std::vector<Value>& series) const {
  const auto& var = schema_.variables.at(variable);
  const auto& st = stats_.at(variable);
  std::vector<Value> out = locf(series);
  Value fallback;
  if (var.imputation.kind == Imputation::Kind::kConstant) {
    fallback = var.imputation.constant;
  } else if (var.kind == VariableKind::kNumeric) {
    fallback = st.impute_numeric;
  } else {
    fallback = st.impute_token;
  }
  for (auto& v : out) {
    if (is_missing(v)) v = fallback;
  }
  return out;
}

Preprocessor Preprocessor::fit(const EpisodeSet& train,
                               const CohortSchema& schema) {
  if (train.empty()) throw DataError("cannot fit a preprocessor on no episodes");
  schema.validate();
  Preprocessor p;
  p.schema_ = schema;
  p.stats_.resize(schema.variables.size());

  for (std::size_t v = 0; v < schema.variables.size(); ++v) {
    const auto& var = schema.variables[v];
    auto& st = p.stats_[v];
    std::vector<std::vector<Value>> filled;
    filled.reserve(train.size());
    for (const auto& ep : train) {
      std::vector<Value> series;
      series.reserve(ep.stages.size());
      for (const auto& s : ep.stages) series.push_back(s.context.at(v));
      filled.push_back(locf(series));
    }

    if (var.kind == VariableKind::kNumeric) {
      std::vector<double> observed;
      for (const auto& series : filled) {
        for (const auto& val : series) {
          if (const auto* d = std::get_if<double>(&val)) observed.push_back(*d);
        }
      }
      if (observed.empty()) {
        p.warnings_.push_back("variable '" + var.name +
                              "' has no observed training values; imputing 0");
        st.impute_numeric = 0.0;
      } else if (var.imputation.kind == Imputation::Kind::kLocfThenMode) {
        st.impute_numeric = mode_of(observed);
      } else {
        st.impute_numeric =
            std::accumulate(observed.begin(), observed.end(), 0.0) /
            static_cast<double>(observed.size());
      }
      const double fallback =
          var.imputation.kind == Imputation::Kind::kConstant
              ? std::get<double>(var.imputation.constant)
              : st.impute_numeric;
      std::vector<double> full;
      for (const auto& series : filled) {
        for (const auto& val : series) {
          const auto* d = std::get_if<double>(&val);
          full.push_back(d ? *d : fallback);
        }
      }
      if (var.transform == Transform::kStandardize ||
          var.transform == Transform::kLogStandardize) {
        if (var.transform == Transform::kLogStandardize) {
          for (auto& x : full) x = log_domain(x);
        }
        const double n = static_cast<double>(full.size());
        st.mean = std::accumulate(full.begin(), full.end(), 0.0) / n;
        double ss = 0.0;
        for (double x : full) ss += (x - st.mean) * (x - st.mean);
        st.stddev = std::sqrt(ss / n);
        if (!(st.stddev > 1e-12)) {
          st.stddev = 1.0;
          st.zero_variance = true;
          p.warnings_.push_back("variable '" + var.name +
                                "' has zero variance; stddev set to 1");
        }
      } else if (var.transform == Transform::kQuintiles) {
        std::sort(full.begin(), full.end());
        for (double q : {0.2, 0.4, 0.6, 0.8}) {
          st.cuts.push_back(interpolated_percentile(full, q));
        }
      }
    } else {
      std::map<std::string, std::size_t> counts;
      for (const auto& series : filled) {
        for (const auto& val : series) {
          if (const auto* s = std::get_if<std::string>(&val)) ++counts[*s];
        }
      }
      std::size_t best = 0;
      for (const auto& [tok, c] : counts) {
        st.vocabulary.push_back(tok);
        if (c > best) {
          best = c;
          st.impute_token = tok;
        }
      }
      if (counts.empty()) {
        p.warnings_.push_back("variable '" + var.name +
                              "' has no observed training tokens");
        st.impute_token = std::string(kOtherToken);
      }
      if (!counts.count(std::string(kOtherToken))) {
        st.vocabulary.emplace_back(kOtherToken);
      }
    }
  }
  return p;
}

std::vector<FeatureColumn> Preprocessor::columns() const {
  std::vector<FeatureColumn> cols;
  for (std::size_t v = 0; v < schema_.variables.size(); ++v) {
    const auto& var = schema_.variables[v];
    auto add = [&](std::string name) {
      cols.push_back({std::move(name), v, var.aggregate_eligible, var.lag_eligible});
    };
    if (var.kind == VariableKind::kCategorical) {
      for (const auto& tok : stats_[v].vocabulary) add(var.name + "=" + tok);
    } else if (var.transform == Transform::kQuintiles) {
      for (int q = 1; q <= 5; ++q) add(var.name + "=q" + std::to_string(q));
    } else {
      add(var.name);
    }
  }
  return cols;
}

void Preprocessor::encode(std::size_t variable, const Value& v,
                          std::vector<double>& out) const {
  const auto& var = schema_.variables[variable];
  const auto& st = stats_[variable];
  if (var.kind == VariableKind::kCategorical) {
    const auto& tok = std::get<std::string>(v);
    std::size_t hit = st.vocabulary.size() - 1;
    for (std::size_t i = 0; i < st.vocabulary.size(); ++i) {
      if (st.vocabulary[i] == tok) {
        hit = i;
        break;
      }
    }
    if (st.vocabulary[hit] != tok) {
      // Route unseen tokens to the reserved bucket.
      const auto it = std::find(st.vocabulary.begin(), st.vocabulary.end(), kOtherToken);
      hit = static_cast<std::size_t>(it - st.vocabulary.begin());
    }
    for (std::size_t i = 0; i < st.vocabulary.size(); ++i) {
      out.push_back(i == hit ? 1.0 : 0.0);
    }
    return;
  }
  const double x = std::get<double>(v);
  switch (var.transform) {
    case Transform::kNone:
      out.push_back(x);
      break;
    case Transform::kStandardize:
      out.push_back((x - st.mean) / st.stddev);
      break;
    case Transform::kLogStandardize:
      out.push_back((log_domain(x) - st.mean) / st.stddev);
      break;
    case Transform::kQuintiles: {
      std::size_t bin = 0;
      for (double c : st.cuts) bin += c < x ? 1 : 0;
      for (std::size_t i = 0; i < 5; ++i) out.push_back(i == bin ? 1.0 : 0.0);
      break;
    }
  }
}

NumericEpisodeSet Preprocessor::apply(const EpisodeSet& episodes) const {
  NumericEpisodeSet out;
  out.columns = columns();
  out.action_labels = schema_.action_labels;
  out.default_action = schema_.default_action_index();
  out.episodes.reserve(episodes.size());
  const std::size_t width = out.columns.size();
  for (const auto& ep : episodes) {
    NumericEpisode ne;
    ne.patient_id = ep.patient_id;
    ne.length = ep.stages.size();
    ne.width = width;
    std::vector<std::vector<Value>> imputed(schema_.variables.size());
    for (std::size_t v = 0; v < schema_.variables.size(); ++v) {
      std::vector<Value> series;
      for (const auto& s : ep.stages) series.push_back(s.context.at(v));
      imputed[v] = impute_series(v, series);
    }
    ne.context.reserve(ne.length * width);
    for (std::size_t t = 0; t < ne.length; ++t) {
      for (std::size_t v = 0; v < schema_.variables.size(); ++v) {
        encode(v, imputed[v][t], ne.context);
      }
      ne.actions.push_back(ep.stages[t].action);
      ne.severity.push_back(ep.stages[t].severity);
    }
    out.episodes.push_back(std::move(ne));
  }
  return out;
}

nlohmann::json Preprocessor::to_json() const {
  json stats = json::array();
  for (const auto& st : stats_) {
    stats.push_back({{"impute_numeric", st.impute_numeric},
                     {"impute_token", st.impute_token},
                     {"mean", st.mean},
                     {"stddev", st.stddev},
                     {"zero_variance", st.zero_variance},
                     {"cuts", st.cuts},
                     {"vocabulary", st.vocabulary}});
  }
  return {{"schema", schema_to_json(schema_)},
          {"stats", std::move(stats)},
          {"warnings", warnings_}};
}

Preprocessor Preprocessor::from_json(const nlohmann::json& j) {
  Preprocessor p;
  p.schema_ = schema_from_json(j.at("schema"));
  for (const auto& js : j.at("stats")) {
    VariableStats st;
    st.impute_numeric = js.at("impute_numeric").get<double>();
    st.impute_token = js.at("impute_token").get<std::string>();
    st.mean = js.at("mean").get<double>();
    st.stddev = js.at("stddev").get<double>();
    st.zero_variance = js.at("zero_variance").get<bool>();
    st.cuts = js.at("cuts").get<std::vector<double>>();
    st.vocabulary = js.at("vocabulary").get<std::vector<std::string>>();
    p.stats_.push_back(std::move(st));
  }
  if (p.stats_.size() != p.schema_.variables.size()) {
    throw SchemaError("preprocessor statistics do not match its schema");
  }
  p.warnings_ = j.value("warnings", std::vector<std::string>{});
  return p;
}

std::uint64_t Preprocessor::fingerprint() const { return fnv1a(to_json().dump()); }

// ---------------------------------------------------------------------------
// Splitting

DatasetSplit split_dataset(const EpisodeSet& episodes, std::uint64_t seed,
                           double test_frac, double val_frac) {
  if (!(test_frac > 0.0 && test_frac < 1.0) || !(val_frac > 0.0 && val_frac < 1.0) ||
      test_frac + val_frac >= 1.0) {
    throw ConfigError("split fractions must lie in (0,1) and sum to less than 1");
  }
  const std::size_t n = episodes.size();
  if (n < 5) throw DataError("splitting needs at least 5 patients");
  const auto n_test = static_cast<std::size_t>(std::llround(test_frac * n));
  const auto n_val =
      static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n - n_test)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<int> fold(n, 0);
  for (std::size_t i = 0; i < n_test; ++i) fold[order[i]] = 2;
  for (std::size_t i = n_test; i < n_test + n_val; ++i) fold[order[i]] = 1;

  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    (fold[i] == 0 ? split.train : fold[i] == 1 ? split.val : split.test)
        .push_back(episodes[i]);
  }
  return split;
}

}  // namespace histpolicy

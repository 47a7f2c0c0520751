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

// Fixtures and independent reference computations shared by the unit tests.

#ifndef HISTPOLICY_TESTS_TEST_UTIL_H_
#define HISTPOLICY_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "histpolicy/dataset.h"
#include "histpolicy/matrix.h"
#include "histpolicy/staterep.h"

namespace histpolicy::testing {

// Pair counting: positives outranking negatives, ties worth one half.
inline double brute_auroc(std::span<const double> scores, std::span<const int> labels) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      den += 1.0;
      if (scores[i] > scores[j]) num += 1.0;
      else if (scores[i] == scores[j]) num += 0.5;
    }
  }
  return num / den;
}

inline double brute_auroc_multiclass(const Matrix& probs, std::span<const std::size_t> labels) {
  double sum = 0.0;
  int present = 0;
  for (std::size_t k = 0; k < probs.cols; ++k) {
    std::vector<int> y(labels.size());
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      y[i] = labels[i] == k ? 1 : 0;
      (y[i] ? pos : neg) = true;
    }
    if (!pos || !neg) continue;
    const auto col = probs.column(k);
    sum += brute_auroc(col, y);
    ++present;
  }
  return sum / present;
}

// Percentile by sorting and interpolating between order statistics.
inline double reference_percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Membership in equal-width bin b of (0, 1], with zero in the first bin.
inline bool in_bin(double p, std::size_t b, std::size_t bins) {
  const double lo = static_cast<double>(b) / static_cast<double>(bins);
  const double hi = static_cast<double>(b + 1) / static_cast<double>(bins);
  return b == 0 ? p <= hi : (p > lo && p <= hi);
}

// Calibration gap of max-probability confidences, bin by bin.
inline double reference_ece(const Matrix& probs, std::span<const std::size_t> labels,
                            std::size_t bins) {
  const double n = static_cast<double>(probs.rows);
  double total = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    double count = 0, hits = 0, conf = 0;
    for (std::size_t i = 0; i < probs.rows; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < probs.cols; ++j) {
        if (probs(i, j) > probs(i, best)) best = j;
      }
      if (!in_bin(probs(i, best), b, bins)) continue;
      ++count;
      conf += probs(i, best);
      hits += labels[i] == best;
    }
    if (count > 0) total += count / n * std::abs(hits / count - conf / count);
  }
  return total;
}

// Per-column calibration gap evaluated straight from the binning formula.
inline double reference_sce(const Matrix& probs, std::span<const std::size_t> labels,
                            std::size_t bins) {
  const double n = static_cast<double>(probs.rows);
  double total = 0.0;
  for (std::size_t k = 0; k < probs.cols; ++k) {
    for (std::size_t b = 0; b < bins; ++b) {
      double count = 0, hits = 0, conf = 0;
      for (std::size_t i = 0; i < probs.rows; ++i) {
        if (!in_bin(probs(i, k), b, bins)) continue;
        ++count;
        conf += probs(i, k);
        hits += labels[i] == k;
      }
      if (count > 0) total += count / n * std::abs(hits / count - conf / count);
    }
  }
  return total / static_cast<double>(probs.cols);
}

inline Matrix random_probs(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Matrix m(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += (m(i, j) = u(rng));
    for (std::size_t j = 0; j < k; ++j) m(i, j) /= s;
  }
  return m;
}

inline CohortSchema three_action_schema() {
  CohortSchema s;
  VariableSpec x;
  x.name = "cdai";
  s.variables.push_back(x);
  VariableSpec age;
  age.name = "age";
  age.aggregate_eligible = false;
  age.lag_eligible = false;
  s.variables.push_back(age);
  s.action_labels = {"MTX", "TNF", "JAK"};
  s.default_action = "MTX";
  s.severity_column = "news2";
  return s;
}

// Numeric set with `width` plain columns and the given per-patient actions.
inline NumericEpisodeSet numeric_set(const std::vector<std::vector<std::vector<double>>>& contexts,
                                     const std::vector<std::vector<std::size_t>>& actions,
                                     std::vector<std::string> action_labels,
                                     std::size_t default_action = 0) {
  NumericEpisodeSet set;
  const std::size_t width = contexts.front().front().size();
  for (std::size_t c = 0; c < width; ++c) {
    set.columns.push_back({"v" + std::to_string(c + 1), c, true, true});
  }
  set.action_labels = std::move(action_labels);
  set.default_action = default_action;
  for (std::size_t p = 0; p < contexts.size(); ++p) {
    NumericEpisode ep;
    ep.patient_id = "p" + std::to_string(p + 1);
    ep.length = contexts[p].size();
    ep.width = width;
    for (const auto& row : contexts[p]) ep.context.insert(ep.context.end(), row.begin(), row.end());
    ep.actions = actions[p];
    ep.severity.assign(ep.length, std::nullopt);
    set.episodes.push_back(std::move(ep));
  }
  return set;
}

// Minimal XML check: one root element, balanced tags, quoted attributes,
// no bare ampersands or angle brackets in text.
inline bool xml_well_formed(const std::string& doc) {
  std::vector<std::string> stack;
  std::size_t i = 0, roots = 0;
  if (doc.rfind("<?xml", 0) == 0) {
    i = doc.find("?>");
    if (i == std::string::npos) return false;
    i += 2;
  }
  while (i < doc.size()) {
    if (doc[i] == '<') {
      if (doc.compare(i, 4, "<!--") == 0) {
        const auto end = doc.find("-->", i);
        if (end == std::string::npos) return false;
        i = end + 3;
        continue;
      }
      const auto end = doc.find('>', i);
      if (end == std::string::npos) return false;
      std::string tag = doc.substr(i + 1, end - i - 1);
      i = end + 1;
      if (tag.empty()) return false;
      if (tag[0] == '/') {
        if (stack.empty() || stack.back() != tag.substr(1)) return false;
        stack.pop_back();
        continue;
      }
      const bool self_closing = tag.back() == '/';
      if (self_closing) tag.pop_back();
      if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
      if (tag.find('<') != std::string::npos) return false;
      const std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
      if (stack.empty()) ++roots;
      if (!self_closing) stack.push_back(name);
    } else {
      if (doc[i] == '>') return false;
      if (doc[i] == '&') {
        const auto semi = doc.find(';', i);
        if (semi == std::string::npos || semi - i > 6) return false;
      }
      if (stack.empty() && !std::isspace(static_cast<unsigned char>(doc[i]))) return false;
      ++i;
    }
  }
  return stack.empty() && roots == 1;
}

// Unique scratch directory below the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("histpolicy_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace histpolicy::testing

#endif  // HISTPOLICY_TESTS_TEST_UTIL_H_

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

#include "histpolicy/errors.h"
#include "histpolicy/models.h"
#include "histpolicy/optim.h"
#include "model_internal.h"

namespace histpolicy {

RiskScore::RiskScore(std::vector<std::string> features, std::vector<std::string> labels,
                     std::vector<int> weights, double intercept)
    : PolicyModel(std::move(features), std::move(labels)),
      weights_(std::move(weights)),
      intercept_(intercept) {
  if (weights_.size() != feature_names().size()) {
    throw ContractError("risk score needs one weight per feature");
  }
  if (num_classes() != 2) throw UnsupportedModelError("unsupported: multiclass");
}

double RiskScore::score(std::span<const double> x) const {
  double s = intercept_;
  for (std::size_t j = 0; j < weights_.size(); ++j) {
    if (weights_[j] != 0) s += weights_[j] * x[j];
  }
  return s;
}

void RiskScore::predict_into(std::span<const double> x, std::span<double> out) const {
  const double p = 1.0 / (1.0 + std::exp(-score(x)));
  out[0] = 1.0 - p;
  out[1] = p;
}

nlohmann::json RiskScore::parameters() const {
  return {{"weights", weights_}, {"intercept", intercept_}};
}

namespace {

double softplus(double s) { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }
double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

// Weighted logistic loss of labels z in {0,1} with observation weights c.
struct WeightedData {
  std::vector<double> z;
  std::vector<double> c;
  double total = 0.0;

  double loss(std::span<const double> margins, double b) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double s = margins[i] + b;
      acc += c[i] * (softplus(s) - z[i] * s);
    }
    return acc / total;
  }
};

// 1-D Newton with step halving; the loss is convex in b.
double fit_intercept(const WeightedData& d, std::span<const double> margins, double b,
                     double* loss_out) {
  double f = d.loss(margins, b);
  for (int it = 0; it < 100; ++it) {
    double g = 0.0, h = 0.0;
    for (std::size_t i = 0; i < d.z.size(); ++i) {
      const double p = sigmoid(margins[i] + b);
      g += d.c[i] * (p - d.z[i]);
      h += d.c[i] * p * (1.0 - p);
    }
    g /= d.total;
    h /= d.total;
    if (std::abs(g) < 1e-12) break;
    double step = h > 1e-12 ? g / h : (g > 0 ? 1.0 : -1.0);
    bool moved = false;
    for (int ls = 0; ls < 50; ++ls) {
      const double nb = std::clamp(b - step, -50.0, 50.0);
      const double nf = d.loss(margins, nb);
      if (nf <= f) {
        moved = nb != b;
        b = nb;
        f = nf;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  if (loss_out) *loss_out = f;
  return b;
}

struct Candidate {
  std::vector<int> w;
  double b = 0.0;
  double loss = 0.0;
};

std::vector<double> margins_of(const StateMatrix& m, std::span<const int> w) {
  std::vector<double> out(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (w[j] != 0) s += w[j] * m.at(i, j);
    }
    out[i] = s;
  }
  return out;
}

Candidate evaluate(const StateMatrix& m, const WeightedData& d, std::vector<int> w,
                   double b0) {
  Candidate c;
  const auto margins = margins_of(m, w);
  c.b = fit_intercept(d, margins, b0, &c.loss);
  c.w = std::move(w);
  return c;
}

// Greedy +-1 coordinate moves until no move lowers the loss.
Candidate local_search(const StateMatrix& m, const WeightedData& d, Candidate cur,
                       int max_coef, int max_size) {
  auto margins = margins_of(m, cur.w);
  std::vector<double> trial(m.rows);
  for (;;) {
    const auto nnz = std::count_if(cur.w.begin(), cur.w.end(), [](int v) { return v != 0; });
    int best_j = -1, best_delta = 0;
    double best_b = cur.b, best_loss = cur.loss;
    for (std::size_t j = 0; j < cur.w.size(); ++j) {
      for (int delta : {1, -1}) {
        const int nw = cur.w[j] + delta;
        if (std::abs(nw) > max_coef) continue;
        if (cur.w[j] == 0 && nnz >= max_size) continue;
        for (std::size_t i = 0; i < m.rows; ++i) trial[i] = margins[i] + delta * m.at(i, j);
        double loss = 0.0;
        const double b = fit_intercept(d, trial, cur.b, &loss);
        if (loss < best_loss - 1e-12) {
          best_loss = loss;
          best_b = b;
          best_j = static_cast<int>(j);
          best_delta = delta;
        }
      }
    }
    if (best_j < 0) break;
    cur.w[best_j] += best_delta;
    for (std::size_t i = 0; i < m.rows; ++i) margins[i] += best_delta * m.at(i, best_j);
    cur.b = best_b;
    cur.loss = best_loss;
  }
  return cur;
}

// Proximal-gradient L1 path; returns the real-valued weights of the largest
// support not exceeding max_size.
std::vector<double> l1_path_weights(const StateMatrix& m, const WeightedData& d,
                                    int max_size) {
  const std::size_t n = m.rows, p = m.cols();
  double max_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 1.0;
    for (std::size_t j = 0; j < p; ++j) s += m.at(i, j) * m.at(i, j);
    max_norm = std::max(max_norm, s);
  }
  const double step = 1.0 / (0.25 * max_norm);

  std::vector<double> margins(n, 0.0), w(p, 0.0);
  double b = fit_intercept(d, margins, 0.0, nullptr);

  auto gradient = [&](const std::vector<double>& wv, double bv, std::vector<double>& gw,
                      double& gb) {
    gw.assign(p, 0.0);
    gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = bv;
      for (std::size_t j = 0; j < p; ++j) s += wv[j] * m.at(i, j);
      const double r = d.c[i] * (sigmoid(s) - d.z[i]) / d.total;
      for (std::size_t j = 0; j < p; ++j) gw[j] += r * m.at(i, j);
      gb += r;
    }
  };

  std::vector<double> gw;
  double gb = 0.0;
  gradient(w, b, gw, gb);
  double lambda_max = 0.0;
  for (double g : gw) lambda_max = std::max(lambda_max, std::abs(g));
  if (lambda_max <= 0.0) return w;

  std::vector<double> chosen = w;
  std::vector<double> y = w;
  double yb = b;
  for (int k = 1; k <= 60; ++k) {
    const double lambda = lambda_max * std::pow(0.85, k);
    double t = 1.0;
    for (int it = 0; it < 300; ++it) {
      gradient(y, yb, gw, gb);
      double delta = 0.0;
      std::vector<double> w_new(p);
      for (std::size_t j = 0; j < p; ++j) {
        const double u = y[j] - step * gw[j];
        w_new[j] = std::copysign(std::max(std::abs(u) - step * lambda, 0.0), u);
        delta = std::max(delta, std::abs(w_new[j] - w[j]));
      }
      const double b_new = yb - step * gb;
      delta = std::max(delta, std::abs(b_new - b));
      const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      for (std::size_t j = 0; j < p; ++j) {
        y[j] = w_new[j] + ((t - 1.0) / t_new) * (w_new[j] - w[j]);
      }
      yb = b_new + ((t - 1.0) / t_new) * (b_new - b);
      w = std::move(w_new);
      b = b_new;
      t = t_new;
      if (delta < 1e-7) break;
    }
    y = w;
    yb = b;
    const auto support = std::count_if(w.begin(), w.end(), [](double v) { return v != 0.0; });
    if (support > max_size) break;
    chosen = w;
    if (static_cast<std::size_t>(support) == p) break;
  }
  return chosen;
}

}  // namespace

double weighted_log_loss(std::span<const double> margins,
                         std::span<const std::size_t> labels, double pos_weight) {
  double acc = 0.0, total = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    const double c = labels[i] == 1 ? pos_weight : 1.0;
    acc += c * (softplus(margins[i]) - (labels[i] == 1 ? margins[i] : 0.0));
    total += c;
  }
  return acc / total;
}

std::shared_ptr<RiskScore> fit_riskscore(const StateMatrix& train, int max_coef,
                                         int max_size, double pos_weight) {
  if (train.num_actions() != 2) throw UnsupportedModelError("unsupported: multiclass");
  if (max_coef < 1 || max_size < 1 || !(pos_weight > 0.0)) {
    throw ConfigError("risk score needs max_coef >= 1, max_size >= 1, pos_weight > 0");
  }
  if (present_classes(train).size() < 2) {
    throw FitError("risk score needs both classes in training data");
  }
  WeightedData d;
  for (auto y : train.labels) {
    d.z.push_back(y == 1 ? 1.0 : 0.0);
    d.c.push_back(y == 1 ? pos_weight : 1.0);
    d.total += d.c.back();
  }
  const std::size_t p = train.cols();

  // Real-valued start on the selected support.
  auto real_w = l1_path_weights(train, d, max_size);
  std::vector<std::size_t> support;
  for (std::size_t j = 0; j < p; ++j) {
    if (real_w[j] != 0.0) support.push_back(j);
  }
  if (!support.empty()) {
    const Objective refit = [&](const std::vector<double>& x, std::vector<double>& g) {
      const std::size_t s = support.size();
      g.assign(s + 1, 0.0);
      double f = 0.0;
      for (std::size_t i = 0; i < train.rows; ++i) {
        double m = x[s];
        for (std::size_t a = 0; a < s; ++a) m += x[a] * train.at(i, support[a]);
        f += d.c[i] * (softplus(m) - d.z[i] * m);
        const double r = d.c[i] * (sigmoid(m) - d.z[i]);
        for (std::size_t a = 0; a < s; ++a) g[a] += r * train.at(i, support[a]);
        g[s] += r;
      }
      // Small ridge keeps separable problems bounded.
      for (std::size_t a = 0; a < s; ++a) {
        f += 0.5e-4 * d.total * x[a] * x[a];
        g[a] += 1e-4 * d.total * x[a];
      }
      for (auto& v : g) v /= d.total;
      return f / d.total;
    };
    std::vector<double> x(support.size() + 1, 0.0);
    for (std::size_t a = 0; a < support.size(); ++a) x[a] = real_w[support[a]];
    LbfgsOptions opts;
    opts.max_iter = 300;
    minimize_lbfgs(refit, x, opts);
    std::fill(real_w.begin(), real_w.end(), 0.0);
    for (std::size_t a = 0; a < support.size(); ++a) real_w[support[a]] = x[a];
  }

  // Scaled rounding.
  double wmax = 0.0;
  for (double v : real_w) wmax = std::max(wmax, std::abs(v));
  Candidate best = evaluate(train, d, std::vector<int>(p, 0), 0.0);
  if (wmax > 0.0) {
    std::vector<double> scales = {1.0};
    for (int f = 10; f >= 1; --f) scales.push_back(max_coef / wmax * f / 10.0);
    for (double s : scales) {
      std::vector<int> w(p, 0);
      for (std::size_t j = 0; j < p; ++j) {
        w[j] = std::clamp(static_cast<int>(std::lround(s * real_w[j])), -max_coef, max_coef);
      }
      auto c = evaluate(train, d, std::move(w), best.b);
      if (c.loss < best.loss) best = std::move(c);
    }
  }

  Candidate from_rounded = local_search(train, d, best, max_coef, max_size);
  Candidate from_zero =
      local_search(train, d, evaluate(train, d, std::vector<int>(p, 0), 0.0), max_coef, max_size);
  const Candidate& winner = from_zero.loss < from_rounded.loss ? from_zero : from_rounded;
  return std::make_shared<RiskScore>(train.feature_names, train.action_labels, winner.w,
                                     winner.b);
}

}  // namespace histpolicy

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

#include "histpolicy/optim.h"

#include <algorithm>
#include <cmath>
#include <deque>

namespace histpolicy {
namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& f, std::vector<double>& x,
                           const LbfgsOptions& options) {
  const std::size_t n = x.size();
  std::vector<double> g(n), g_new(n), x_new(n), d(n);
  LbfgsResult result;
  double fx = f(x, g);
  result.value = fx;
  result.grad_inf_norm = inf_norm(g);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> memory;

  for (int iter = 0; iter < options.max_iter; ++iter) {
    if (result.grad_inf_norm <= options.grad_tol) {
      result.converged = true;
      break;
    }
    if (!std::isfinite(fx)) break;

    // Two-loop recursion.
    d = g;
    std::vector<double> alpha(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      alpha[k] = memory[k].rho * dot(memory[k].s, d);
      for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[k] * memory[k].y[i];
    }
    double gamma = 1.0;
    if (!memory.empty()) {
      const auto& last = memory.back();
      gamma = dot(last.s, last.y) / dot(last.y, last.y);
    } else {
      gamma = 1.0 / std::max(1.0, std::sqrt(dot(g, g)));
    }
    for (auto& v : d) v *= gamma;
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const double beta = memory[k].rho * dot(memory[k].y, d);
      for (std::size_t i = 0; i < n; ++i) d[i] += memory[k].s[i] * (alpha[k] - beta);
    }
    for (auto& v : d) v = -v;

    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      // Not a descent direction; restart from steepest descent.
      memory.clear();
      const double scale = 1.0 / std::max(1.0, std::sqrt(dot(g, g)));
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i] * scale;
      slope = dot(g, d);
    }

    double step = 1.0;
    bool accepted = false;
    double f_new = fx;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + step * d[i];
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (memory.empty()) break;
      memory.clear();
      continue;
    }

    Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      p.s[i] = x_new[i] - x[i];
      p.y[i] = g_new[i] - g[i];
    }
    const double sy = dot(p.s, p.y);
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    result.iterations = iter + 1;
    result.value = fx;
    result.grad_inf_norm = inf_norm(g);
    if (sy > 1e-300 * std::max(1.0, dot(p.y, p.y))) {
      p.rho = 1.0 / sy;
      memory.push_back(std::move(p));
      if (static_cast<int>(memory.size()) > options.memory) memory.pop_front();
    }
  }
  if (result.grad_inf_norm <= options.grad_tol) result.converged = true;
  return result;
}

}  // namespace histpolicy

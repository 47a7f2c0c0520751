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

// Limited-memory BFGS for smooth unconstrained problems.

#ifndef HISTPOLICY_OPTIM_H_
#define HISTPOLICY_OPTIM_H_

#include <cstddef>
#include <functional>
#include <vector>

namespace histpolicy {

// Returns f(x) and writes the gradient into `grad` (same size as x).
using Objective =
    std::function<double(const std::vector<double>& x, std::vector<double>& grad)>;

struct LbfgsOptions {
  int max_iter = 2000;
  double grad_tol = 1e-6;  // on the infinity norm
  int memory = 10;
};

struct LbfgsResult {
  double value = 0.0;
  double grad_inf_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Minimizes in place. Uses a backtracking Armijo line search and skips
// curvature pairs with s'y <= 0.
LbfgsResult minimize_lbfgs(const Objective& f, std::vector<double>& x,
                           const LbfgsOptions& options = {});

}  // namespace histpolicy

#endif  // HISTPOLICY_OPTIM_H_

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

#ifndef HISTPOLICY_SVG_H_
#define HISTPOLICY_SVG_H_

#include <string>
#include <utility>
#include <vector>

namespace histpolicy::svg {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  int width = 640;
  int height = 400;
};

std::string escape(const std::string& text);

// Standalone SVG document with axes, ticks, one polyline per series and a
// legend. Non-positive values are dropped on a log axis.
std::string line_chart(const std::vector<Series>& series, const ChartOptions& options);

}  // namespace histpolicy::svg

#endif  // HISTPOLICY_SVG_H_

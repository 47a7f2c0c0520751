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

#include "histpolicy/svg.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace histpolicy::svg {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string line_chart(const std::vector<Series>& series, const ChartOptions& o) {
  const double left = 70, right = 160, top = 40, bottom = 50;
  const double plot_w = o.width - left - right;
  const double plot_h = o.height - top - bottom;

  auto ty = [&](double y) { return o.log_y ? std::log10(y) : y; };
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y) || (o.log_y && y <= 0)) continue;
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, ty(y));
      y_max = std::max(y_max, ty(y));
    }
  }
  if (!std::isfinite(x_min)) {
    x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  }
  if (o.log_y) {
    y_min = std::floor(y_min);
    y_max = std::max(std::ceil(y_max), y_min + 1);
  } else if (y_max - y_min < 1e-12) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  if (x_max - x_min < 1e-12) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double v) { return top + plot_h - (v - y_min) / (y_max - y_min) * plot_h; };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\""
      << o.height << "\" viewBox=\"0 0 " << o.width << ' ' << o.height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << num(o.width / 2.0) << "\" y=\"22\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << escape(o.title) << "</text>\n"
      << "<g stroke=\"black\" stroke-width=\"1\">\n"
      << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + plot_h) << "\" x2=\""
      << num(left + plot_w) << "\" y2=\"" << num(top + plot_h) << "\"/>\n"
      << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left)
      << "\" y2=\"" << num(top + plot_h) << "\"/>\n"
      << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";

  const int x_ticks = 5;
  for (int i = 0; i <= x_ticks; ++i) {
    const double x = x_min + (x_max - x_min) * i / x_ticks;
    out << "<text x=\"" << num(px(x)) << "\" y=\"" << num(top + plot_h + 16)
        << "\" text-anchor=\"middle\">" << tick_label(std::round(x * 100) / 100) << "</text>\n";
  }
  if (o.log_y) {
    for (double e = y_min; e <= y_max + 1e-9; e += 1.0) {
      out << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(e) + 4)
          << "\" text-anchor=\"end\">" << tick_label(std::pow(10.0, e)) << "</text>\n";
    }
  } else {
    const int y_ticks = 5;
    for (int i = 0; i <= y_ticks; ++i) {
      const double v = y_min + (y_max - y_min) * i / y_ticks;
      out << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(v) + 4)
          << "\" text-anchor=\"end\">" << tick_label(std::round(v * 1000) / 1000)
          << "</text>\n";
    }
  }
  out << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(o.height - 10.0)
      << "\" text-anchor=\"middle\">" << escape(o.x_label) << "</text>\n"
      << "<text x=\"16\" y=\"" << num(top + plot_h / 2) << "\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 16 " << num(top + plot_h / 2) << ")\">"
      << escape(o.y_label + (o.log_y ? " (log scale)" : "")) << "</text>\n</g>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    std::ostringstream pts;
    for (const auto& [x, y] : series[s].points) {
      if (!std::isfinite(x) || !std::isfinite(y) || (o.log_y && y <= 0)) continue;
      pts << num(px(x)) << ',' << num(py(ty(y))) << ' ';
    }
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
        << pts.str() << "\"/>\n";
    const double ly = top + 14.0 * static_cast<double>(s);
    out << "<line x1=\"" << num(left + plot_w + 10) << "\" y1=\"" << num(ly) << "\" x2=\""
        << num(left + plot_w + 28) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << num(left + plot_w + 32) << "\" y=\"" << num(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(series[s].label)
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace histpolicy::svg

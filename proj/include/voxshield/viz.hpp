// Copyright 2026 The Voxshield Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VOXSHIELD_VIZ_HPP_
#define VOXSHIELD_VIZ_HPP_

#include <fstream>
#include <string>
#include <vector>

#include "voxshield/common.hpp"

namespace voxshield {

// Dependency-free SVG emission for loss traces and battery summaries.

namespace viz_detail {

inline std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

inline void minmax(const std::vector<std::vector<double>>& series, double* lo, double* hi) {
  *lo = INFINITY;
  *hi = -INFINITY;
  for (const auto& s : series) {
    for (double v : s) {
      *lo = std::min(*lo, v);
      *hi = std::max(*hi, v);
    }
  }
  if (!(*lo < *hi)) {
    *lo -= 1.0;
    *hi += 1.0;
  }
}

}  // namespace viz_detail

inline void svg_line_chart(const std::vector<std::vector<double>>& series,
                           const std::vector<std::string>& labels, const std::string& title,
                           const std::string& path) {
  using viz_detail::fmt;
  const int w = 720, h = 400, ml = 60, mr = 20, mt = 40, mb = 40;
  double lo, hi;
  viz_detail::minmax(series, &lo, &hi);
  size_t max_len = 1;
  for (const auto& s : series) max_len = std::max(max_len, s.size());

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::string svg = "<svg xmlns='http://www.w3.org/2000/svg' width='" + std::to_string(w) +
                    "' height='" + std::to_string(h) + "'>\n";
  svg += "<rect width='100%' height='100%' fill='white'/>\n";
  svg += "<text x='" + std::to_string(w / 2) + "' y='24' text-anchor='middle' font-size='16'>" +
         title + "</text>\n";
  svg += "<line x1='" + std::to_string(ml) + "' y1='" + std::to_string(h - mb) + "' x2='" +
         std::to_string(w - mr) + "' y2='" + std::to_string(h - mb) + "' stroke='black'/>\n";
  svg += "<line x1='" + std::to_string(ml) + "' y1='" + std::to_string(mt) + "' x2='" +
         std::to_string(ml) + "' y2='" + std::to_string(h - mb) + "' stroke='black'/>\n";
  svg += "<text x='8' y='" + std::to_string(mt + 8) + "' font-size='11'>" + fmt(hi) + "</text>\n";
  svg += "<text x='8' y='" + std::to_string(h - mb) + "' font-size='11'>" + fmt(lo) + "</text>\n";

  for (size_t s = 0; s < series.size(); ++s) {
    if (series[s].empty()) continue;
    std::string pts;
    for (size_t i = 0; i < series[s].size(); ++i) {
      const double px = ml + (w - ml - mr) * (max_len > 1 ? static_cast<double>(i) / (max_len - 1) : 0.0);
      const double py = (h - mb) - (h - mt - mb) * (series[s][i] - lo) / (hi - lo);
      pts += fmt(px) + "," + fmt(py) + " ";
    }
    const char* color = palette[s % 6];
    svg += "<polyline fill='none' stroke='" + std::string(color) + "' stroke-width='1.5' points='" +
           pts + "'/>\n";
    if (s < labels.size()) {
      svg += "<text x='" + std::to_string(w - mr - 150) + "' y='" + std::to_string(mt + 16 * (s + 1)) +
             "' font-size='12' fill='" + color + "'>" + labels[s] + "</text>\n";
    }
  }
  svg += "</svg>\n";
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw RuntimeFailure("viz: cannot write " + path);
  f << svg;
}

inline void svg_bar_chart(const std::vector<std::string>& labels, const std::vector<double>& values,
                          const std::string& title, const std::string& path) {
  using viz_detail::fmt;
  const int w = 860, h = 420, ml = 60, mr = 20, mt = 40, mb = 110;
  double lo = 0.0, hi = 1e-9;
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::string svg = "<svg xmlns='http://www.w3.org/2000/svg' width='" + std::to_string(w) +
                    "' height='" + std::to_string(h) + "'>\n";
  svg += "<rect width='100%' height='100%' fill='white'/>\n";
  svg += "<text x='" + std::to_string(w / 2) + "' y='24' text-anchor='middle' font-size='16'>" +
         title + "</text>\n";
  const double span = hi - lo;
  const double zero_y = (h - mb) - (h - mt - mb) * (0.0 - lo) / span;
  svg += "<line x1='" + std::to_string(ml) + "' y1='" + fmt(zero_y) + "' x2='" +
         std::to_string(w - mr) + "' y2='" + fmt(zero_y) + "' stroke='black'/>\n";
  const double bw = static_cast<double>(w - ml - mr) / std::max<size_t>(1, values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    const double x = ml + bw * i + bw * 0.15;
    const double y = (h - mb) - (h - mt - mb) * (std::max(values[i], 0.0) - lo) / span;
    const double y0 = (h - mb) - (h - mt - mb) * (std::min(values[i], 0.0) - lo) / span;
    svg += "<rect x='" + fmt(x) + "' y='" + fmt(y) + "' width='" + fmt(bw * 0.7) + "' height='" +
           fmt(std::max(1.0, y0 - y)) + "' fill='#1f77b4'/>\n";
    svg += "<text x='" + fmt(x + bw * 0.35) + "' y='" + std::to_string(h - mb + 14) +
           "' font-size='10' text-anchor='end' transform='rotate(-45 " + fmt(x + bw * 0.35) + " " +
           std::to_string(h - mb + 14) + ")'>" + labels[i] + "</text>\n";
  }
  svg += "</svg>\n";
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw RuntimeFailure("viz: cannot write " + path);
  f << svg;
}

}  // namespace voxshield

#endif  // VOXSHIELD_VIZ_HPP_

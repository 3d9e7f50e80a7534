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
//
// Test-only reference implementations, independent of the library paths they
// check: brute-force DFT, exhaustive CTC path enumeration, exhaustive word
// alignment, finite differences.

#ifndef VOXSHIELD_TESTS_ORACLES_HPP_
#define VOXSHIELD_TESTS_ORACLES_HPP_

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "voxshield/common.hpp"

namespace oracles {

using voxshield::Mat;

// Direct O(N^2) DFT of a real frame.
inline std::vector<std::complex<double>> brute_dft(const std::vector<double>& frame) {
  const size_t n = frame.size();
  std::vector<std::complex<double>> out(n);
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (size_t i = 0; i < n; ++i) {
      const double ang = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(i) / n;
      acc += frame[i] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

// CTC by brute force: enumerate every length-T symbol path, collapse it, and
// sum the probabilities of paths that collapse to the target labels.
inline double ctc_enumerate(const Mat<double>& log_probs, const std::vector<int>& labels) {
  const int frames = log_probs.rows;
  const int symbols = log_probs.cols;
  double total = 0.0;
  std::vector<int> path(frames, 0);
  std::function<void(int, double)> rec = [&](int t, double logp) {
    if (t == frames) {
      std::vector<int> collapsed;
      int prev = 0;
      for (int s : path) {
        if (s != 0 && s != prev) collapsed.push_back(s);
        prev = s;
      }
      if (collapsed == labels) total += std::exp(logp);
      return;
    }
    for (int s = 0; s < symbols; ++s) {
      path[t] = s;
      rec(t + 1, logp + log_probs.at(t, s));
    }
  };
  rec(0, 0.0);
  return -std::log(total);
}

// Edit distance by exhaustive recursion (no DP), unit costs.
inline int exhaustive_edit_distance(const std::vector<std::string>& a, size_t i,
                                    const std::vector<std::string>& b, size_t j) {
  if (i == a.size()) return static_cast<int>(b.size() - j);
  if (j == b.size()) return static_cast<int>(a.size() - i);
  const int sub = exhaustive_edit_distance(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);
  const int del = exhaustive_edit_distance(a, i + 1, b, j) + 1;
  const int ins = exhaustive_edit_distance(a, i, b, j + 1) + 1;
  return std::min(sub, std::min(del, ins));
}

inline double exhaustive_wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  return 100.0 * exhaustive_edit_distance(ref, 0, hyp, 0) / static_cast<double>(ref.size());
}

// Central finite difference of f along coordinate i.
inline double central_diff(const std::function<double(const std::vector<double>&)>& f,
                           std::vector<double> x, size_t i, double h) {
  x[i] += h;
  const double plus = f(x);
  x[i] -= 2.0 * h;
  const double minus = f(x);
  return (plus - minus) / (2.0 * h);
}

// Central finite difference of f along direction v.
inline double directional_diff(const std::function<double(const std::vector<double>&)>& f,
                               const std::vector<double>& x, const std::vector<double>& v,
                               double h) {
  std::vector<double> xp = x, xm = x;
  for (size_t i = 0; i < x.size(); ++i) {
    xp[i] += h * v[i];
    xm[i] -= h * v[i];
  }
  return (f(xp) - f(xm)) / (2.0 * h);
}

inline double rel_err(double a, double b, double floor = 1e-9) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Checks an analytic gradient against finite differences along random
// directions and a sampled coordinate subset. Returns the worst relative
// error observed.
inline double check_gradient(const std::function<double(const std::vector<double>&)>& f,
                             const std::vector<double>& x, const std::vector<double>& grad,
                             double h, int num_directions, int num_coords, uint64_t seed,
                             double coord_floor = 1e-7) {
  voxshield::Rng rng(seed);
  double worst = 0.0;
  for (int d = 0; d < num_directions; ++d) {
    std::vector<double> v(x.size());
    for (double& vi : v) vi = rng.gaussian();
    double norm = voxshield::l2_norm(v);
    for (double& vi : v) vi /= norm;
    const double fd = directional_diff(f, x, v, h);
    const double an = voxshield::dot(grad, v);
    worst = std::max(worst, rel_err(fd, an));
  }
  for (int c = 0; c < num_coords; ++c) {
    const size_t i = static_cast<size_t>(rng.next_u64() % x.size());
    const double fd = central_diff(f, x, i, h);
    // Skip coordinates whose derivative is negligible relative to the
    // gradient scale; relative error is meaningless there.
    const double scale = std::max(std::abs(fd), std::abs(grad[i]));
    if (scale < coord_floor) continue;
    worst = std::max(worst, rel_err(fd, grad[i]));
  }
  return worst;
}

}  // namespace oracles

#endif  // VOXSHIELD_TESTS_ORACLES_HPP_

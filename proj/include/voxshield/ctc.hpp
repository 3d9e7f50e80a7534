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

#ifndef VOXSHIELD_CTC_HPP_
#define VOXSHIELD_CTC_HPP_

#include <string>
#include <vector>

#include "voxshield/common.hpp"

namespace voxshield {

// Character inventory: blank at index 0, then a-z, space, apostrophe.
class Alphabet {
 public:
  static constexpr int kBlank = 0;

  Alphabet() {
    chars_ = "abcdefghijklmnopqrstuvwxyz '";
    for (size_t i = 0; i < chars_.size(); ++i) index_[static_cast<unsigned char>(chars_[i])] = static_cast<int>(i) + 1;
  }

  int size() const { return static_cast<int>(chars_.size()) + 1; }  // incl. blank

  bool valid_text(const std::string& text) const {
    for (char c : text) {
      if (index_[static_cast<unsigned char>(c)] == 0) return false;
    }
    return true;
  }

  std::vector<int> encode(const std::string& text) const {
    std::vector<int> out;
    out.reserve(text.size());
    for (char c : text) {
      const int idx = index_[static_cast<unsigned char>(c)];
      if (idx == 0) throw ValidationError(std::string("alphabet: unsupported character '") + c + "'");
      out.push_back(idx);
    }
    return out;
  }

  char decode_symbol(int idx) const {
    if (idx <= 0 || idx > static_cast<int>(chars_.size())) {
      throw ValidationError("alphabet: symbol index out of range");
    }
    return chars_[idx - 1];
  }

 private:
  std::string chars_;
  int index_[256] = {0};
};

// Minimum frame count that can emit the label sequence: length plus one
// mandatory blank between identical neighbors.
inline int ctc_min_frames(const std::vector<int>& labels) {
  int need = static_cast<int>(labels.size());
  for (size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++need;
  }
  return need;
}

// Longest feasible prefix of `labels` for `frames` frames.
inline std::vector<int> ctc_feasible_prefix(const std::vector<int>& labels, int frames) {
  std::vector<int> out;
  int need = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    need += 1 + (i > 0 && labels[i] == labels[i - 1] ? 1 : 0);
    if (need > frames) break;
    out.push_back(labels[i]);
  }
  return out;
}

// Negative log-likelihood of `labels` under per-frame log-probabilities
// [frames x symbols], computed with the forward algorithm over the
// blank-augmented label sequence in log space. When grad_log_probs is
// non-null it receives dL/d(log p) treating the log-probabilities as free
// variables.
inline double ctc_loss(const Mat<double>& log_probs, const std::vector<int>& labels,
                       Mat<double>* grad_log_probs = nullptr) {
  const int frames = log_probs.rows;
  const int symbols = log_probs.cols;
  if (labels.empty()) throw ValidationError("ctc: empty label sequence");
  for (int l : labels) {
    if (l <= 0 || l >= symbols) throw ValidationError("ctc: label index out of range");
  }
  if (frames < ctc_min_frames(labels)) {
    throw ValidationError("ctc: label sequence infeasible for frame count");
  }

  // Extended sequence: blank, l1, blank, l2, ..., blank.
  const int n = static_cast<int>(labels.size());
  const int states = 2 * n + 1;
  std::vector<int> ext(states, Alphabet::kBlank);
  for (int i = 0; i < n; ++i) ext[2 * i + 1] = labels[i];

  auto allow_skip = [&](int s) {
    return s >= 2 && ext[s] != Alphabet::kBlank && ext[s] != ext[s - 2];
  };

  Mat<double> alpha(frames, states, -INFINITY);
  alpha.at(0, 0) = log_probs.at(0, ext[0]);
  if (states > 1) alpha.at(0, 1) = log_probs.at(0, ext[1]);
  for (int t = 1; t < frames; ++t) {
    for (int s = 0; s < states; ++s) {
      double best = alpha.at(t - 1, s);
      if (s >= 1) best = log_sum_exp(best, alpha.at(t - 1, s - 1));
      if (allow_skip(s)) best = log_sum_exp(best, alpha.at(t - 1, s - 2));
      alpha.at(t, s) = best + log_probs.at(t, ext[s]);
    }
  }
  double log_p = alpha.at(frames - 1, states - 1);
  if (states > 1) log_p = log_sum_exp(log_p, alpha.at(frames - 1, states - 2));
  const double loss = -log_p;

  if (grad_log_probs != nullptr) {
    // beta excludes the emission at t, so alpha_t(s) + beta_t(s) sums to
    // log p over states at every t.
    Mat<double> beta(frames, states, -INFINITY);
    beta.at(frames - 1, states - 1) = 0.0;
    if (states > 1) beta.at(frames - 1, states - 2) = 0.0;
    for (int t = frames - 2; t >= 0; --t) {
      for (int s = 0; s < states; ++s) {
        double acc = beta.at(t + 1, s) + log_probs.at(t + 1, ext[s]);
        if (s + 1 < states) {
          acc = log_sum_exp(acc, beta.at(t + 1, s + 1) + log_probs.at(t + 1, ext[s + 1]));
        }
        if (s + 2 < states && allow_skip(s + 2)) {
          acc = log_sum_exp(acc, beta.at(t + 1, s + 2) + log_probs.at(t + 1, ext[s + 2]));
        }
        beta.at(t, s) = acc;
      }
    }
    *grad_log_probs = Mat<double>(frames, symbols, 0.0);
    for (int t = 0; t < frames; ++t) {
      std::vector<double> per_symbol(symbols, -INFINITY);
      for (int s = 0; s < states; ++s) {
        const double v = alpha.at(t, s) + beta.at(t, s);
        per_symbol[ext[s]] = log_sum_exp(per_symbol[ext[s]], v);
      }
      for (int k = 0; k < symbols; ++k) {
        if (per_symbol[k] == -INFINITY) continue;
        grad_log_probs->at(t, k) = -std::exp(per_symbol[k] - log_p);
      }
    }
  }
  return loss;
}

// Per-frame argmax, collapse repeats, drop blanks.
inline std::string ctc_greedy_decode(const Mat<double>& log_probs, const Alphabet& alphabet) {
  std::string out;
  int prev = Alphabet::kBlank;
  for (int t = 0; t < log_probs.rows; ++t) {
    int best = 0;
    const double* row = log_probs.row(t);
    for (int k = 1; k < log_probs.cols; ++k) {
      if (row[k] > row[best]) best = k;
    }
    if (best != Alphabet::kBlank && best != prev) out.push_back(alphabet.decode_symbol(best));
    prev = best;
  }
  return out;
}

}  // namespace voxshield

#endif  // VOXSHIELD_CTC_HPP_

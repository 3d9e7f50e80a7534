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

#ifndef VOXSHIELD_WER_HPP_
#define VOXSHIELD_WER_HPP_

#include <cctype>
#include <sstream>
#include <string>
#include <vector>

#include "voxshield/common.hpp"

namespace voxshield {

// Case-fold, strip punctuation (apostrophes kept), split on whitespace.
inline std::vector<std::string> wer_tokenize(const std::string& text) {
  std::string norm;
  norm.reserve(text.size());
  for (char c : text) {
    const unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '\'') {
      norm.push_back(static_cast<char>(std::tolower(u)));
    } else if (std::isspace(u)) {
      norm.push_back(' ');
    }
  }
  std::vector<std::string> words;
  std::istringstream ss(norm);
  std::string w;
  while (ss >> w) words.push_back(w);
  return words;
}

// Word error rate in percent: 100 * (S + D + I) / N via word-level
// Levenshtein distance with unit costs. May exceed 100.
inline double wer(const std::string& reference, const std::string& hypothesis) {
  const std::vector<std::string> ref = wer_tokenize(reference);
  const std::vector<std::string> hyp = wer_tokenize(hypothesis);
  if (ref.empty()) throw ValidationError("wer: empty reference");

  const size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
  for (size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      const int sub = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d[i][j] = std::min(sub, std::min(d[i - 1][j] + 1, d[i][j - 1] + 1));
    }
  }
  return 100.0 * d[n][m] / static_cast<double>(n);
}

}  // namespace voxshield

#endif  // VOXSHIELD_WER_HPP_

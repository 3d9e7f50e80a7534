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

#include "voxshield/ctc.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"

using namespace voxshield;

namespace {

Mat<double> normalized_log_probs(int frames, int symbols, uint64_t seed) {
  Rng rng(seed);
  Mat<double> lp(frames, symbols);
  for (int t = 0; t < frames; ++t) {
    double z = 0.0;
    std::vector<double> raw(symbols);
    for (int k = 0; k < symbols; ++k) {
      raw[k] = 0.05 + rng.uniform();
      z += raw[k];
    }
    for (int k = 0; k < symbols; ++k) lp.at(t, k) = std::log(raw[k] / z);
  }
  return lp;
}

// Rows whose argmax follows `argmaxes`, mildly peaked.
Mat<double> argmax_rows(const std::vector<int>& argmaxes, int symbols) {
  Mat<double> lp(static_cast<int>(argmaxes.size()), symbols, std::log(0.01));
  for (size_t t = 0; t < argmaxes.size(); ++t) lp.at(static_cast<int>(t), argmaxes[t]) = std::log(0.9);
  return lp;
}

}  // namespace

TEST_CASE("single-frame single-label loss is the emission probability") {
  Mat<double> lp(1, 2);
  lp.at(0, 0) = std::log(0.25);
  lp.at(0, 1) = std::log(0.75);
  const double loss = ctc_loss(lp, {1});
  REQUIRE(loss == Catch::Approx(-std::log(0.75)).epsilon(1e-12));
  REQUIRE(loss == Catch::Approx(0.2876820724).epsilon(1e-8));
}

TEST_CASE("two uniform frames over {blank, a} sum three alignment paths") {
  Mat<double> lp(2, 2, std::log(0.5));
  const double loss = ctc_loss(lp, {1});
  REQUIRE(loss == Catch::Approx(-std::log(0.75)).epsilon(1e-12));
}

TEST_CASE("ctc_loss equals exhaustive path enumeration") {
  const int symbols = 3;  // blank, a, b
  for (int frames = 1; frames <= 6; ++frames) {
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
      const Mat<double> lp = normalized_log_probs(frames, symbols, seed * 100 + frames);
      std::vector<std::vector<int>> label_sets = {{1},    {2},    {1, 2},    {2, 1},   {1, 1},
                                                  {1, 2, 1}, {2, 2, 2}, {1, 1, 2}, {1, 2, 2}};
      for (const auto& labels : label_sets) {
        if (ctc_min_frames(labels) > frames) {
          REQUIRE_THROWS_AS(ctc_loss(lp, labels), ValidationError);
          continue;
        }
        const double got = ctc_loss(lp, labels);
        const double expected = oracles::ctc_enumerate(lp, labels);
        REQUIRE(got == Catch::Approx(expected).margin(1e-9));
      }
    }
  }
}

TEST_CASE("infeasible label lengths raise an explicit error") {
  Mat<double> lp(1, 3, std::log(1.0 / 3.0));
  REQUIRE_THROWS_AS(ctc_loss(lp, {1, 2}), ValidationError);
  REQUIRE_THROWS_AS(ctc_loss(lp, {1, 1}), ValidationError);
  REQUIRE(ctc_min_frames({1, 1}) == 3);
  REQUIRE(ctc_min_frames({1, 2}) == 2);
  REQUIRE(ctc_min_frames({1, 2, 1}) == 3);
}

TEST_CASE("ctc_feasible_prefix keeps the longest fitting prefix") {
  REQUIRE(ctc_feasible_prefix({1, 2, 3}, 2) == std::vector<int>({1, 2}));
  REQUIRE(ctc_feasible_prefix({1, 1, 2}, 2) == std::vector<int>({1}));
  REQUIRE(ctc_feasible_prefix({1, 2, 3}, 10) == std::vector<int>({1, 2, 3}));
  REQUIRE(ctc_feasible_prefix({1}, 0).empty());
}

TEST_CASE("ctc gradient matches finite differences on the log-prob table") {
  const Mat<double> lp = normalized_log_probs(5, 4, 99);
  const std::vector<int> labels = {1, 3, 1};
  Mat<double> grad;
  ctc_loss(lp, labels, &grad);

  for (int t = 0; t < lp.rows; ++t) {
    for (int k = 0; k < lp.cols; ++k) {
      Mat<double> plus = lp, minus = lp;
      plus.at(t, k) += 1e-6;
      minus.at(t, k) -= 1e-6;
      const double fd = (ctc_loss(plus, labels) - ctc_loss(minus, labels)) / 2e-6;
      REQUIRE(grad.at(t, k) == Catch::Approx(fd).margin(1e-5));
    }
  }
}

TEST_CASE("greedy decode collapses repeats and removes blanks") {
  const Alphabet alphabet;
  const int blank = Alphabet::kBlank;
  const int a = 1, c = 3, t = 20;

  REQUIRE(ctc_greedy_decode(argmax_rows({blank, c, c, blank, a, t, t}, alphabet.size()), alphabet) ==
          "cat");
  REQUIRE(ctc_greedy_decode(argmax_rows({blank, blank, blank}, alphabet.size()), alphabet).empty());
  REQUIRE(ctc_greedy_decode(argmax_rows({a, a, blank, a}, alphabet.size()), alphabet) == "aa");
}

TEST_CASE("alphabet round trip and validation") {
  const Alphabet alphabet;
  REQUIRE(alphabet.size() == 29);
  REQUIRE(alphabet.valid_text("it's a dog"));
  REQUIRE_FALSE(alphabet.valid_text("Hello"));
  REQUIRE_FALSE(alphabet.valid_text("a,b"));
  const std::vector<int> enc = alphabet.encode("az '");
  REQUIRE(enc == std::vector<int>({1, 26, 27, 28}));
  REQUIRE(alphabet.decode_symbol(1) == 'a');
  REQUIRE(alphabet.decode_symbol(28) == '\'');
  REQUIRE_THROWS_AS(alphabet.encode("x;y"), ValidationError);
}

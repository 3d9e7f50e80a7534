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

#include "voxshield/losses.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "test_support.hpp"

using namespace voxshield;

namespace {

std::vector<SpeakerEncoder> untrained_ensemble(uint64_t seed = 51) {
  std::vector<SpeakerEncoder> encoders;
  for (const EncoderSpec& spec : default_ensemble_specs()) {
    SpeakerEncoder enc(spec);
    enc.init_params(seed);
    encoders.push_back(std::move(enc));
  }
  return encoders;
}

EmbeddingVector unit_vec(std::vector<double> v, const std::string& id = "test") {
  const double n = l2_norm(v);
  for (double& x : v) x /= n;
  return {std::move(v), id};
}

}  // namespace

TEST_CASE("cosine similarity basics") {
  const EmbeddingVector v = unit_vec({0.3, -0.4, 0.5, 0.1});
  EmbeddingVector neg = v;
  for (double& x : neg.values) x = -x;
  REQUIRE(cosine_similarity(v, v) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(cosine_similarity(v, neg) == Catch::Approx(-1.0).margin(1e-12));

  const EmbeddingVector e1 = unit_vec({1.0, 0.0, 0.0, 0.0});
  const EmbeddingVector e2 = unit_vec({0.0, 1.0, 0.0, 0.0});
  REQUIRE(cosine_similarity(e1, e2) == 0.0);

  const EmbeddingVector shorter = unit_vec({1.0, 0.0});
  REQUIRE_THROWS_AS(cosine_similarity(v, shorter), ValidationError);
}

TEST_CASE("untargeted feature loss of the clean audio is k plus one") {
  const std::vector<SpeakerEncoder> encoders = untrained_ensemble();
  const Waveform x = test_support::noise(0.5, 3200, 61);
  const double loss = feature_loss_untargeted(x, x, encoders);
  REQUIRE(loss == Catch::Approx(static_cast<double>(encoders.size()) + 1.0).margin(1e-9));
}

TEST_CASE("feature losses stay within the cosine range bound") {
  const std::vector<SpeakerEncoder> encoders = untrained_ensemble();
  const double bound = static_cast<double>(encoders.size()) + 1.0;
  for (uint64_t s = 0; s < 5; ++s) {
    const Waveform a = test_support::noise(0.6, 2400, 100 + s);
    const Waveform b = test_support::noise(0.6, 2400, 200 + s);
    const double u = feature_loss_untargeted(a, b, encoders);
    const double t = feature_loss_targeted(a, b, encoders);
    REQUIRE(u >= -bound - 1e-9);
    REQUIRE(u <= bound + 1e-9);
    REQUIRE(t >= -bound - 1e-9);
    REQUIRE(t <= bound + 1e-9);
  }
}

TEST_CASE("targeted feature loss of the target itself is minus k plus one") {
  const std::vector<SpeakerEncoder> encoders = untrained_ensemble();
  const Waveform x_t = test_support::sine(210.0, 0.5, 3200);
  const double loss = feature_loss_targeted(x_t, x_t, encoders);
  REQUIRE(loss == Catch::Approx(-(static_cast<double>(encoders.size()) + 1.0)).margin(1e-9));
}

TEST_CASE("asr targeted loss rejects infeasible targets and accepts feasible ones") {
  CtcAsr asr;
  asr.init_params(5);
  const Waveform w = test_support::noise(0.4, 1600, 9);
  const int frames = asr.frame_count(w.length());
  REQUIRE(frames == 4);

  TranscriptTarget too_long;
  too_long.text = "abcdefgh";
  REQUIRE_THROWS_AS(asr_targeted_loss(asr, w, too_long), ValidationError);

  TranscriptTarget ok;
  ok.text = "ab";
  REQUIRE(asr_targeted_loss(asr, w, ok) > 0.0);

  TranscriptTarget empty;
  REQUIRE_THROWS_AS(asr_targeted_loss(asr, w, empty), ValidationError);
}

TEST_CASE("total loss with zero weights equals the asr loss alone") {
  const std::vector<SpeakerEncoder> encoders = untrained_ensemble();
  const MfccExtractor& extractor = default_mfcc_extractor();
  CtcAsr asr;
  asr.init_params(5);

  const Waveform x = test_support::noise(0.5, 4096, 71);
  Waveform x_prime = x;
  Rng rng(8);
  for (double& s : x_prime.samples) s = clamp(s + rng.uniform(-0.02, 0.02), -1.0, 1.0);

  const FeatureProfile profile = make_feature_profile(x, encoders, extractor);
  const MaskingThresholdMap thresh = masking_threshold(x, StftConfig{});
  TranscriptTarget y_t;
  y_t.text = "go home";

  LossWeights weights;
  weights.alpha = 0.0;
  weights.beta = 0.0;
  const LossBreakdown b = total_loss(x, x_prime, ProtectionMode::kUntargeted, profile, encoders,
                                     extractor, &asr, &y_t, thresh, StftConfig{}, weights);
  REQUIRE(b.total() == Catch::Approx(asr_targeted_loss(asr, x_prime, y_t)).margin(1e-12));
  REQUIRE(b.fea == 0.0);
  REQUIRE(b.psy == 0.0);
  REQUIRE(b.l2 == 0.0);
}

TEST_CASE("total loss at the clean point with beta zero is alpha (k+1) plus asr") {
  const std::vector<SpeakerEncoder> encoders = untrained_ensemble();
  const MfccExtractor& extractor = default_mfcc_extractor();
  CtcAsr asr;
  asr.init_params(5);

  const Waveform x = test_support::noise(0.5, 4096, 73);
  const FeatureProfile profile = make_feature_profile(x, encoders, extractor);
  const MaskingThresholdMap thresh = masking_threshold(x, StftConfig{});
  TranscriptTarget y_t;
  y_t.text = "warm bread";

  LossWeights weights;
  weights.alpha = 500.0;
  weights.beta = 0.0;
  const LossBreakdown b = total_loss(x, x, ProtectionMode::kUntargeted, profile, encoders,
                                     extractor, &asr, &y_t, thresh, StftConfig{}, weights);
  const double expected =
      500.0 * (static_cast<double>(encoders.size()) + 1.0) + asr_targeted_loss(asr, x, y_t);
  REQUIRE(b.total() == Catch::Approx(expected).epsilon(1e-9));
}

TEST_CASE("disabling the asr term zeroes its component") {
  const std::vector<SpeakerEncoder> encoders = untrained_ensemble();
  const MfccExtractor& extractor = default_mfcc_extractor();
  const Waveform x = test_support::noise(0.5, 4096, 79);
  const FeatureProfile profile = make_feature_profile(x, encoders, extractor);
  const MaskingThresholdMap thresh = masking_threshold(x, StftConfig{});

  LossWeights weights;
  const LossBreakdown b = total_loss(x, x, ProtectionMode::kUntargeted, profile, encoders,
                                     extractor, nullptr, nullptr, thresh, StftConfig{}, weights);
  REQUIRE(b.asr == 0.0);
  REQUIRE(b.total() == Catch::Approx(weights.alpha * 4.0).epsilon(1e-9));
}

TEST_CASE("total loss gradient matches finite differences") {
  const std::vector<SpeakerEncoder> encoders = untrained_ensemble(91);
  const MfccExtractor& extractor = default_mfcc_extractor();
  CtcAsr asr;
  asr.init_params(17);

  const Waveform x = test_support::sine(330.0, 0.6, 4096);
  Waveform x_prime = x;
  Rng rng(12);
  for (double& s : x_prime.samples) s = clamp(s + rng.uniform(-0.03, 0.03), -1.0, 1.0);

  const FeatureProfile profile = make_feature_profile(x, encoders, extractor);
  const StftConfig psy_cfg;
  const MaskingThresholdMap thresh = masking_threshold(x, psy_cfg);
  TranscriptTarget y_t;
  y_t.text = "the lazy dog";

  LossWeights weights;  // defaults: alpha 500, beta 5e-3
  std::vector<double> grad;
  total_loss(x, x_prime, ProtectionMode::kUntargeted, profile, encoders, extractor, &asr, &y_t,
             thresh, psy_cfg, weights, &grad);

  auto f = [&](const std::vector<double>& samples) {
    Waveform v;
    v.sample_rate = 16000;
    v.samples = samples;
    return total_loss(x, v, ProtectionMode::kUntargeted, profile, encoders, extractor, &asr, &y_t,
                      thresh, psy_cfg, weights)
        .total_smooth();
  };
  const double worst = oracles::check_gradient(f, x_prime.samples, grad, 1e-4, 4, 25, 777);
  REQUIRE(worst <= 1e-3);
}

TEST_CASE("targeted total loss gradient matches finite differences") {
  const std::vector<SpeakerEncoder> encoders = untrained_ensemble(93);
  const MfccExtractor& extractor = default_mfcc_extractor();

  const Waveform x = test_support::sine(270.0, 0.6, 4096);
  const Waveform x_t = test_support::sine(150.0, 0.55, 4096);
  Waveform x_prime = x;
  Rng rng(14);
  for (double& s : x_prime.samples) s = clamp(s + rng.uniform(-0.03, 0.03), -1.0, 1.0);

  const FeatureProfile profile = make_feature_profile(x_t, encoders, extractor);
  const StftConfig psy_cfg;
  const MaskingThresholdMap thresh = masking_threshold(x, psy_cfg);

  LossWeights weights;
  std::vector<double> grad;
  total_loss(x, x_prime, ProtectionMode::kTargeted, profile, encoders, extractor, nullptr, nullptr,
             thresh, psy_cfg, weights, &grad);

  auto f = [&](const std::vector<double>& samples) {
    Waveform v;
    v.sample_rate = 16000;
    v.samples = samples;
    return total_loss(x, v, ProtectionMode::kTargeted, profile, encoders, extractor, nullptr,
                      nullptr, thresh, psy_cfg, weights)
        .total_smooth();
  };
  const double worst = oracles::check_gradient(f, x_prime.samples, grad, 1e-4, 4, 25, 779);
  REQUIRE(worst <= 1e-3);
}

TEST_CASE("loss weights validate their ranges") {
  LossWeights w;
  w.alpha = -1.0;
  REQUIRE_THROWS_AS(w.validate(), ValidationError);
}

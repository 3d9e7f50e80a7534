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

#include "voxshield/protect.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace voxshield;

namespace {

struct MiniStack {
  std::vector<SpeakerEncoder> encoders;
  MfccExtractor extractor;
  CtcAsr asr;

  MiniStack() {
    for (const EncoderSpec& spec : default_ensemble_specs()) {
      SpeakerEncoder enc(spec);
      enc.init_params(3);
      encoders.push_back(std::move(enc));
    }
    asr.init_params(3);
  }
};

SpeakerDatabase mini_db(const MiniStack& stack) {
  FixturesCorpus corpus;
  const std::vector<SpeakerVoice> voices = default_voices();
  for (int v = 0; v < 3; ++v) {
    FixtureRecord rec;
    rec.path = "mem://" + voices[v].id;
    rec.transcript = v == 0 ? "warm bread" : (v == 1 ? "the quick fox" : "go home now");
    rec.speaker_id = voices[v].id;
    rec.audio = synthesize_utterance(rec.transcript, voices[v], 400 + v);
    corpus.records.push_back(std::move(rec));
  }
  return build_speaker_database(corpus, stack.encoders, stack.extractor);
}

}  // namespace

TEST_CASE("transcript slicing follows the dictionary prefix rule") {
  const Alphabet alphabet;
  const TranscriptTarget t = slice_transcript_target("hello", "the quick brown fox", alphabet);
  REQUIRE(t.text == "the q");
  REQUIRE(t.origin == TargetOrigin::kSlicedFromDictionary);

  REQUIRE_THROWS_AS(slice_transcript_target("", "the quick", alphabet), ValidationError);
  REQUIRE_THROWS_AS(slice_transcript_target("toolongtranscript", "short", alphabet),
                    ValidationError);

  for (int len = 1; len <= 10; ++len) {
    const std::string clean(len, 'a');
    REQUIRE(slice_transcript_target(clean, "the quick brown fox", alphabet).text.size() ==
            clean.size());
  }
}

TEST_CASE("select_target_speaker avoids the query's own recording") {
  const MiniStack stack;
  const std::vector<SpeakerVoice> voices = default_voices();
  const Waveform x = synthesize_utterance("warm bread", voices[0], 400);

  FixturesCorpus corpus;
  FixtureRecord self;
  self.path = "mem://self";
  self.transcript = "warm bread";
  self.speaker_id = "spk0";
  self.audio = x;
  FixtureRecord other;
  other.path = "mem://other";
  other.transcript = "go home";
  other.speaker_id = "spk4";
  other.audio = synthesize_utterance("go home", voices[4], 11);
  corpus.records = {self, other};

  const SpeakerDatabase db = build_speaker_database(corpus, stack.encoders, stack.extractor);
  const auto& rec = select_target_speaker(x, db, stack.encoders, stack.extractor);
  REQUIRE(rec.speaker_id == "spk4");
}

TEST_CASE("select_target_speaker is the exhaustive argmin with lowest-id ties") {
  const MiniStack stack;
  const SpeakerDatabase db = mini_db(stack);
  const Waveform x = synthesize_utterance("five jugs", default_voices()[3], 42);

  const auto& rec = select_target_speaker(x, db, stack.encoders, stack.extractor);

  // Oracle: brute-force scan with fresh embeddings.
  double best_score = INFINITY;
  std::string best_id;
  for (const auto& r : db.records) {
    double score = 0.0;
    for (size_t k = 0; k < stack.encoders.size(); ++k) {
      score += dot(stack.encoders[k].encode(x).values, stack.encoders[k].encode(r.audio).values);
    }
    score += dot(stack.extractor.embed(x).values, stack.extractor.embed(r.audio).values);
    if (score < best_score) {
      best_score = score;
      best_id = r.speaker_id;
    }
  }
  REQUIRE(rec.speaker_id == best_id);

  // Records with equal scores resolve to the lowest speaker_id.
  SpeakerDatabase tied;
  tied.encoder_hash = db.encoder_hash;
  SpeakerDatabase::Record first = db.records[0];
  first.speaker_id = "zzz";
  SpeakerDatabase::Record second = db.records[0];
  second.speaker_id = "aaa";
  tied.records = {first, second};
  const auto& tie_rec = select_target_speaker(x, tied, stack.encoders, stack.extractor);
  REQUIRE(tie_rec.speaker_id == "aaa");

  SpeakerDatabase empty;
  REQUIRE_THROWS_AS(select_target_speaker(x, empty, stack.encoders, stack.extractor),
                    ValidationError);
}

TEST_CASE("speaker database is hash-bound to its encoders") {
  const MiniStack stack;
  SpeakerDatabase db = mini_db(stack);

  MiniStack other;
  for (auto& enc : other.encoders) enc.init_params(999);
  const Waveform x = synthesize_utterance("the dog", default_voices()[1], 5);
  REQUIRE_THROWS_AS(select_target_speaker(x, db, other.encoders, other.extractor), ValidationError);
}

TEST_CASE("zero gradient in pgd mode keeps the initial perturbation") {
  const MiniStack stack;
  const Waveform x = synthesize_utterance("sing old song", default_voices()[2], 77);

  ProtectionConfig cfg;
  cfg.mode = ProtectionMode::kUntargeted;
  cfg.iterations = 3;
  cfg.weights.alpha = 0.0;
  cfg.weights.beta = 0.0;
  cfg.include_asr_term = false;
  cfg.step_rule = StepRule::kPgdAccumulate;
  cfg.seed = 2718;

  const ProtectionResult res = protect(x, cfg, stack.encoders, stack.extractor, stack.asr);

  Rng rng(cfg.seed);
  for (int64_t i = 0; i < x.length(); ++i) {
    const double d0 = rng.uniform(-cfg.epsilon, cfg.epsilon);
    REQUIRE(res.x_prime.samples[i] == clamp(x.samples[i] + d0, -1.0, 1.0));
  }
  for (const auto& it : res.loss_trace) REQUIRE(it.total == 0.0);
}

TEST_CASE("protection honors the budget and range for both modes and rules") {
  const MiniStack stack;
  const SpeakerDatabase db = mini_db(stack);
  const std::vector<SpeakerVoice> voices = default_voices();

  int checked = 0;
  for (int f = 0; f < 3; ++f) {
    const Waveform x = synthesize_utterance("jugs of milk", voices[f % 5], 900 + f);
    for (ProtectionMode mode : {ProtectionMode::kUntargeted, ProtectionMode::kTargeted}) {
      for (StepRule rule : {StepRule::kLiteralSign, StepRule::kPgdAccumulate}) {
        ProtectionConfig cfg;
        cfg.mode = mode;
        cfg.step_rule = rule;
        cfg.iterations = 3;
        cfg.seed = 100 + f;
        cfg.include_asr_term = mode == ProtectionMode::kTargeted;  // untrained ASR may decode ""
        const ProtectionResult res =
            protect(x, cfg, stack.encoders, stack.extractor, stack.asr,
                    mode == ProtectionMode::kTargeted ? &db : nullptr);
        REQUIRE(res.linf_achieved <= cfg.epsilon + 1e-9);
        REQUIRE(static_cast<int>(res.loss_trace.size()) == cfg.iterations);
        for (size_t i = 0; i < res.x_prime.samples.size(); ++i) {
          REQUIRE(std::abs(res.x_prime.samples[i] - x.samples[i]) <= cfg.epsilon + 1e-9);
          REQUIRE(res.x_prime.samples[i] >= -1.0);
          REQUIRE(res.x_prime.samples[i] <= 1.0);
        }
        ++checked;
      }
    }
  }
  REQUIRE(checked == 12);
}

TEST_CASE("protection is deterministic and never returns worse than the start") {
  const MiniStack stack;
  const SpeakerDatabase db = mini_db(stack);
  const Waveform x = synthesize_utterance("pack my box", default_voices()[1], 31);

  ProtectionConfig cfg;
  cfg.mode = ProtectionMode::kTargeted;
  cfg.iterations = 5;
  cfg.seed = 4242;

  const ProtectionResult a = protect(x, cfg, stack.encoders, stack.extractor, stack.asr, &db);
  const ProtectionResult b = protect(x, cfg, stack.encoders, stack.extractor, stack.asr, &db);
  REQUIRE(a.x_prime.samples == b.x_prime.samples);
  REQUIRE(a.best_iteration == b.best_iteration);
  REQUIRE(a.y_t.text == b.y_t.text);
  for (size_t i = 0; i < a.loss_trace.size(); ++i) {
    REQUIRE(a.loss_trace[i].total == b.loss_trace[i].total);
  }

  double best = INFINITY;
  for (const auto& it : a.loss_trace) best = std::min(best, it.total);
  REQUIRE(a.loss_trace[a.best_iteration - 1].total == best);
  REQUIRE(best <= a.loss_trace.front().total);

  // Targeted y_t is the database transcript of the selected speaker.
  bool found = false;
  for (const auto& r : db.records) {
    if (r.speaker_id == a.target_speaker_id.value()) {
      REQUIRE(a.y_t.text == r.transcript);
      found = true;
    }
  }
  REQUIRE(found);
}

TEST_CASE("targeted mode without a database is rejected") {
  const MiniStack stack;
  const Waveform x = synthesize_utterance("the dog", default_voices()[0], 3);
  ProtectionConfig cfg;
  cfg.mode = ProtectionMode::kTargeted;
  cfg.iterations = 1;
  REQUIRE_THROWS_AS(protect(x, cfg, stack.encoders, stack.extractor, stack.asr, nullptr),
                    ValidationError);
}

TEST_CASE("config validation rejects bad settings") {
  ProtectionConfig cfg;
  cfg.iterations = 0;
  REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
  cfg = ProtectionConfig{};
  cfg.epsilon = 1.5;
  REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
  cfg = ProtectionConfig{};
  cfg.step_size = cfg.epsilon * 2.0;
  REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("a very short waveform gets a truncated feasible target") {
  const MiniStack stack;
  const SpeakerDatabase db = mini_db(stack);

  // 0.06 s: enough for the psy frame if we shrink it, and only a few ASR
  // frames, so the database transcript cannot fit.
  Waveform x = synthesize_utterance("the dog", default_voices()[0], 3);
  x.samples.resize(2048);

  ProtectionConfig cfg;
  cfg.mode = ProtectionMode::kTargeted;
  cfg.iterations = 2;
  cfg.psy_cfg.frame_length = 1024;
  cfg.psy_cfg.hop_length = 256;
  cfg.psy_cfg.fft_size = 1024;

  const ProtectionResult res = protect(x, cfg, stack.encoders, stack.extractor, stack.asr, &db);
  REQUIRE_FALSE(res.warning.empty());
  REQUIRE_FALSE(res.y_t.text.empty());
  const int frames = stack.asr.frame_count(x.length());
  REQUIRE(ctc_min_frames(stack.asr.alphabet().encode(res.y_t.text)) <= frames);
}

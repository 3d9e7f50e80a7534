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

#ifndef VOXSHIELD_PROTECT_HPP_
#define VOXSHIELD_PROTECT_HPP_

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "voxshield/losses.hpp"

namespace voxshield {

// Alphabet-valid filler text sliced to length for untargeted runs.
inline const std::string& default_text_dictionary() {
  static const std::string text =
      "the quick brown fox jumps over the lazy dog while seven wizards mix a "
      "jar of quartz dye and a young judge buys extra milk for the vexed "
      "farmer who kept his old banjo under the pale winter moon it's a long "
      "road from the quiet harbor to the dusty canyon and every traveler "
      "hums a simple tune about warm bread sweet honey and the slow river "
      "that carries small boats past the orchard gate";
  return text;
}

enum class StepRule { kLiteralSign, kPgdAccumulate };

inline std::string step_rule_name(StepRule r) {
  return r == StepRule::kLiteralSign ? "literal-sign" : "pgd-accumulate";
}
inline StepRule step_rule_from_name(const std::string& s) {
  if (s == "literal-sign") return StepRule::kLiteralSign;
  if (s == "pgd-accumulate") return StepRule::kPgdAccumulate;
  throw ValidationError("unknown step rule: " + s);
}

struct ProtectionConfig {
  ProtectionMode mode = ProtectionMode::kUntargeted;
  double epsilon = 8.0 / 255.0;
  int iterations = 500;
  LossWeights weights;
  StepRule step_rule = StepRule::kPgdAccumulate;
  double step_size = (8.0 / 255.0) / 10.0;
  uint64_t seed = 1;
  std::string text_dictionary = default_text_dictionary();
  bool include_asr_term = true;
  StftConfig psy_cfg;  // defaults: 2048 / 512 / 2048

  void validate() const {
    if (iterations < 1) throw ValidationError("protect: iterations must be >= 1");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("protect: epsilon must be in (0,1)");
    if (!(step_size > 0.0 && step_size <= epsilon)) {
      throw ValidationError("protect: step_size must be in (0, epsilon]");
    }
    weights.validate();
    psy_cfg.validate();
  }
};

// Candidate target speakers with embeddings cached against a specific set of
// encoder parameters.
struct SpeakerDatabase {
  struct Record {
    std::string speaker_id;
    Waveform audio;
    std::string transcript;
    FeatureProfile profile;
  };

  std::vector<Record> records;
  uint64_t encoder_hash = 0;

  void validate() const {
    std::set<std::string> speakers;
    for (const auto& r : records) {
      speakers.insert(r.speaker_id);
      for (const auto& e : r.profile.encoder_embeddings) e.validate();
      r.profile.mfcc_embedding.validate();
    }
    if (speakers.size() < 2) throw ValidationError("speaker database: needs at least 2 speakers");
  }
};

inline uint64_t combined_encoder_hash(const std::vector<SpeakerEncoder>& encoders) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& e : encoders) {
    const uint64_t ph = e.params_hash();
    h = fnv1a64(&ph, sizeof(ph), h);
  }
  return h;
}

inline SpeakerDatabase build_speaker_database(const FixturesCorpus& corpus,
                                              const std::vector<SpeakerEncoder>& encoders,
                                              const MfccExtractor& extractor) {
  SpeakerDatabase db;
  db.encoder_hash = combined_encoder_hash(encoders);
  for (const auto& rec : corpus.records) {
    SpeakerDatabase::Record r;
    r.speaker_id = rec.speaker_id;
    r.audio = rec.audio;
    r.transcript = rec.transcript;
    r.profile = make_feature_profile(rec.audio, encoders, extractor);
    db.records.push_back(std::move(r));
  }
  db.validate();
  return db;
}

// Most dissimilar database record by total ensemble similarity; ties break
// toward the lowest speaker_id, then the earliest record.
inline const SpeakerDatabase::Record& select_target_speaker(
    const Waveform& x, const SpeakerDatabase& db, const std::vector<SpeakerEncoder>& encoders,
    const MfccExtractor& extractor) {
  if (db.records.empty()) throw ValidationError("select_target_speaker: empty database");
  if (db.encoder_hash != combined_encoder_hash(encoders)) {
    throw ValidationError("select_target_speaker: database cached against different encoders");
  }
  const FeatureProfile px = make_feature_profile(x, encoders, extractor);
  int best = -1;
  double best_score = 0.0;
  for (size_t i = 0; i < db.records.size(); ++i) {
    const auto& rec = db.records[i];
    double score = 0.0;
    for (size_t k = 0; k < encoders.size(); ++k) {
      score += cosine_similarity(px.encoder_embeddings[k], rec.profile.encoder_embeddings[k]);
    }
    score += cosine_similarity(px.mfcc_embedding, rec.profile.mfcc_embedding);
    if (best < 0 || score < best_score ||
        (score == best_score && rec.speaker_id < db.records[best].speaker_id)) {
      best = static_cast<int>(i);
      best_score = score;
    }
  }
  return db.records[best];
}

// Prefix of the dictionary with the character length of the clean transcript.
inline TranscriptTarget slice_transcript_target(const std::string& clean_transcript,
                                                const std::string& dictionary,
                                                const Alphabet& alphabet) {
  if (clean_transcript.empty()) {
    throw ValidationError("make_untargeted_transcript: clean transcript is empty");
  }
  if (dictionary.size() < clean_transcript.size()) {
    throw ValidationError("make_untargeted_transcript: dictionary shorter than transcript");
  }
  TranscriptTarget t;
  t.text = dictionary.substr(0, clean_transcript.size());
  t.origin = TargetOrigin::kSlicedFromDictionary;
  t.validate(alphabet);
  return t;
}

inline TranscriptTarget make_untargeted_transcript(const Waveform& x, const CtcAsr& asr,
                                                   const std::string& dictionary) {
  if (!asr.alphabet().valid_text(dictionary)) {
    throw ValidationError("text dictionary: not alphabet-valid");
  }
  return slice_transcript_target(asr.greedy_decode(x), dictionary, asr.alphabet());
}

struct IterationTrace {
  double asr = 0.0;
  double fea = 0.0;
  double psy = 0.0;
  double l2 = 0.0;
  double total = 0.0;
};

struct ProtectionResult {
  Waveform x_prime;
  TranscriptTarget y_t;
  std::optional<std::string> target_speaker_id;
  std::vector<IterationTrace> loss_trace;
  double linf_achieved = 0.0;
  double runtime_seconds = 0.0;  // wall clock; not part of the deterministic payload
  int best_iteration = 0;        // 1-based index into loss_trace
  std::string warning;
};

// The full perturbation loop: seeded uniform init in [-eps, eps], target
// selection per mode, one masking-threshold computation, iterative
// sign-gradient updates under the L-infinity budget, clamp to [-1, 1] each
// step, best-iterate selection by total loss.
inline ProtectionResult protect(const Waveform& x, const ProtectionConfig& cfg,
                                const std::vector<SpeakerEncoder>& encoders,
                                const MfccExtractor& extractor, const CtcAsr& asr,
                                const SpeakerDatabase* db = nullptr) {
  const auto t_start = std::chrono::steady_clock::now();
  cfg.validate();
  x.validate();
  if (encoders.empty()) throw ValidationError("protect: empty encoder ensemble");

  ProtectionResult result;

  // Target selection (branches by mode).
  FeatureProfile reference;
  if (cfg.mode == ProtectionMode::kUntargeted) {
    reference = make_feature_profile(x, encoders, extractor);
    if (cfg.include_asr_term) {
      result.y_t = make_untargeted_transcript(x, asr, cfg.text_dictionary);
    }
  } else {
    if (db == nullptr) throw ValidationError("protect: targeted mode requires a speaker database");
    const SpeakerDatabase::Record& rec = select_target_speaker(x, *db, encoders, extractor);
    reference = rec.profile;
    result.target_speaker_id = rec.speaker_id;
    result.y_t.text = rec.transcript;
    result.y_t.origin = TargetOrigin::kTranscriptOfTargetSpeaker;
    result.y_t.validate(asr.alphabet());
  }

  // CTC feasibility: very short audio gets a truncated target rather than a
  // mid-batch failure.
  if (cfg.include_asr_term) {
    const int frames = asr.frame_count(x.length());
    const std::vector<int> labels = asr.alphabet().encode(result.y_t.text);
    if (ctc_min_frames(labels) > frames) {
      const std::vector<int> feasible = ctc_feasible_prefix(labels, frames);
      if (feasible.empty()) {
        throw ValidationError("protect: no feasible target transcript for this audio length");
      }
      std::string truncated;
      for (int idx : feasible) truncated.push_back(asr.alphabet().decode_symbol(idx));
      result.warning = "target transcript truncated from " + std::to_string(labels.size()) +
                       " to " + std::to_string(feasible.size()) + " labels to fit " +
                       std::to_string(frames) + " frames";
      result.y_t.text = truncated;
    }
  }

  const MaskingThresholdMap thresh = masking_threshold(x, cfg.psy_cfg);

  const int64_t n = x.length();
  Rng rng(cfg.seed);
  std::vector<double> delta(n);
  for (int64_t i = 0; i < n; ++i) delta[i] = rng.uniform(-cfg.epsilon, cfg.epsilon);

  auto apply = [&](const std::vector<double>& d) {
    Waveform w;
    w.sample_rate = x.sample_rate;
    w.samples.resize(n);
    for (int64_t i = 0; i < n; ++i) w.samples[i] = clamp(x.samples[i] + d[i], -1.0, 1.0);
    return w;
  };

  Waveform x_prime = apply(delta);
  Waveform best = x_prime;
  double best_total = INFINITY;
  result.loss_trace.reserve(cfg.iterations);

  std::vector<double> grad;
  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    const LossBreakdown loss =
        total_loss(x, x_prime, cfg.mode, reference, encoders, extractor,
                   cfg.include_asr_term ? &asr : nullptr,
                   cfg.include_asr_term ? &result.y_t : nullptr, thresh, cfg.psy_cfg,
                   cfg.weights, &grad);
    result.loss_trace.push_back({loss.asr, loss.fea, loss.psy, loss.l2, loss.total()});
    if (loss.total() < best_total) {
      best_total = loss.total();
      best = x_prime;
      result.best_iteration = iter;
    }
    if (cfg.step_rule == StepRule::kLiteralSign) {
      for (int64_t i = 0; i < n; ++i) {
        const double s = grad[i] > 0.0 ? 1.0 : (grad[i] < 0.0 ? -1.0 : 0.0);
        delta[i] = clamp(-s, -cfg.epsilon, cfg.epsilon);
      }
    } else {
      for (int64_t i = 0; i < n; ++i) {
        const double s = grad[i] > 0.0 ? 1.0 : (grad[i] < 0.0 ? -1.0 : 0.0);
        delta[i] = clamp(delta[i] - cfg.step_size * s, -cfg.epsilon, cfg.epsilon);
      }
    }
    x_prime = apply(delta);
  }

  result.x_prime = std::move(best);
  double linf = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    linf = std::max(linf, std::abs(result.x_prime.samples[i] - x.samples[i]));
  }
  result.linf_achieved = linf;
  if (linf > cfg.epsilon + 1e-9) {
    throw RuntimeFailure("protect: perturbation exceeded the budget");
  }
  result.x_prime.validate();
  result.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

}  // namespace voxshield

#endif  // VOXSHIELD_PROTECT_HPP_

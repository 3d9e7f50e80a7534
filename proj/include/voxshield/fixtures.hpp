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

#ifndef VOXSHIELD_FIXTURES_HPP_
#define VOXSHIELD_FIXTURES_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "voxshield/audio.hpp"
#include "voxshield/ctc.hpp"
#include "voxshield/models.hpp"

namespace voxshield {

// Formant-style additive synthesizer for the bundled fixtures corpus. Each
// character carries a fixed formant pattern shared across speakers; speaker
// identity lives in the fundamental, spectral tilt, vibrato and breathiness.
// The mapping is deterministic so a small recognizer can learn it.
struct SpeakerVoice {
  std::string id;
  double f0_hz;
  double tilt_db_per_octave;
  double vibrato_hz;
  double vibrato_depth;
  double breath_level;
};

inline std::vector<SpeakerVoice> default_voices() {
  return {
      {"spk0", 105.0, -2.0, 4.5, 0.008, 0.004},
      {"spk1", 145.0, -4.0, 5.5, 0.010, 0.002},
      {"spk2", 190.0, -1.0, 6.5, 0.006, 0.006},
      {"spk3", 240.0, -3.0, 5.0, 0.012, 0.003},
      {"spk4", 300.0, -5.0, 4.0, 0.009, 0.005},
  };
}

namespace fixtures_detail {

constexpr int kCharSamples = 1280;    // 80 ms per character at 16 kHz
constexpr int kPadSamples = 2560;     // 160 ms lead/trail
constexpr int kCrossfadeSamples = 160;
constexpr double kMaxHarmonicHz = 7400.0;

// Per-character formant triple; space maps to silence.
inline void char_formants(char c, double* f1, double* f2, double* f3) {
  static const double grid1[5] = {350.0, 500.0, 650.0, 800.0, 950.0};
  static const double grid2[6] = {1100.0, 1500.0, 1900.0, 2300.0, 2700.0, 3100.0};
  int idx;
  if (c >= 'a' && c <= 'z') {
    idx = c - 'a';
  } else if (c == '\'') {
    idx = 26;
  } else {
    *f1 = *f2 = *f3 = 0.0;
    return;
  }
  *f1 = grid1[idx % 5];
  *f2 = grid2[idx / 5];
  *f3 = 3300.0 + 60.0 * (idx % 7);
}

inline std::vector<double> char_harmonic_amps(char c, double f0, double tilt_db_per_octave,
                                              double formant_jitter, int num_harmonics) {
  std::vector<double> amps(num_harmonics, 0.0);
  if (c == ' ') return amps;
  double f1, f2, f3;
  char_formants(c, &f1, &f2, &f3);
  f1 *= formant_jitter;
  f2 *= formant_jitter;
  f3 *= formant_jitter;
  constexpr double kBandwidth = 140.0;
  for (int h = 1; h <= num_harmonics; ++h) {
    const double f = h * f0;
    if (f > kMaxHarmonicHz) break;
    double env = std::exp(-0.5 * std::pow((f - f1) / kBandwidth, 2.0)) +
                 0.8 * std::exp(-0.5 * std::pow((f - f2) / kBandwidth, 2.0)) +
                 0.35 * std::exp(-0.5 * std::pow((f - f3) / kBandwidth, 2.0)) + 0.02;
    env *= std::pow(10.0, tilt_db_per_octave * std::log2(f / 200.0) / 20.0);
    amps[h - 1] = env;
  }
  return amps;
}

}  // namespace fixtures_detail

inline Waveform synthesize_utterance(const std::string& text, const SpeakerVoice& voice,
                                     uint64_t seed, int sample_rate = kCanonicalSampleRate) {
  using namespace fixtures_detail;
  Alphabet alphabet;
  if (text.empty() || !alphabet.valid_text(text)) {
    throw ValidationError("synthesize: text must be non-empty and alphabet-valid");
  }

  Rng rng(seed);
  const double f0 = voice.f0_hz * (1.0 + 0.02 * (rng.uniform() * 2.0 - 1.0));
  const double formant_jitter = 1.0 + 0.02 * (rng.uniform() * 2.0 - 1.0);
  const double amp_jitter = 1.0 + 0.05 * (rng.uniform() * 2.0 - 1.0);

  const int num_harmonics = static_cast<int>(kMaxHarmonicHz / f0);
  std::vector<std::vector<double>> char_amps;
  char_amps.reserve(text.size());
  for (char c : text) {
    char_amps.push_back(char_harmonic_amps(c, f0, voice.tilt_db_per_octave, formant_jitter,
                                           num_harmonics));
  }

  int64_t total = kPadSamples * 2 + static_cast<int64_t>(text.size()) * kCharSamples;
  const int64_t min_samples = static_cast<int64_t>(0.55 * sample_rate);
  total = std::max(total, min_samples);

  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(total, 0.0);

  const std::vector<double> silence(num_harmonics, 0.0);
  auto amps_at = [&](int64_t n) -> const std::vector<double>& {
    const int64_t rel = n - kPadSamples;
    if (rel < 0) return silence;
    const int64_t ci = rel / kCharSamples;
    if (ci >= static_cast<int64_t>(text.size())) return silence;
    return char_amps[ci];
  };

  double phase = 0.0;
  std::vector<double> current(num_harmonics, 0.0);
  for (int64_t n = 0; n < total; ++n) {
    const double t = static_cast<double>(n) / sample_rate;
    const double inst_f0 = f0 * (1.0 + voice.vibrato_depth * std::sin(2.0 * M_PI * voice.vibrato_hz * t));
    phase += 2.0 * M_PI * inst_f0 / sample_rate;

    // Smooth the per-character target amplitudes over a short crossfade.
    const std::vector<double>& target = amps_at(n);
    const double blend = 1.0 / kCrossfadeSamples;
    double s = 0.0;
    for (int h = 0; h < num_harmonics; ++h) {
      current[h] += blend * (target[h] - current[h]);
      if (current[h] > 1e-6) s += current[h] * std::sin((h + 1) * phase);
    }
    s = 0.16 * amp_jitter * s + voice.breath_level * rng.gaussian();
    w.samples[n] = s;
  }

  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0) {
    const double gain = 0.62 / peak;
    if (gain < 1.0) {
      for (double& s : w.samples) s *= gain;
    }
  }
  for (double& s : w.samples) s = clamp(s, -1.0, 1.0);
  return w;
}

inline const std::vector<std::string>& fixture_word_list() {
  static const std::vector<std::string> words = {
      "the",  "quick", "brown", "fox",  "jumps", "over",  "lazy", "dog",  "we",
      "like", "warm",  "bread", "and",  "sweet", "honey", "it's", "fine", "day",
      "to",   "sing",  "old",   "song", "by",    "river", "pack", "my",   "box",
      "with", "five",  "dozen", "jugs", "go",    "home",  "now",  "don't"};
  return words;
}

struct FixtureSet {
  std::string train_manifest;
  std::string heldout_manifest;
  int train_count = 0;
  int heldout_count = 0;
};

// Writes a synthetic corpus: per_speaker utterances for each voice, the last
// heldout_per_speaker of each held out into a separate manifest.
inline FixtureSet generate_fixtures(const std::string& dir, uint64_t seed, int per_speaker = 12,
                                    int heldout_per_speaker = 2) {
  if (per_speaker < 1 || heldout_per_speaker < 0 || heldout_per_speaker >= per_speaker) {
    throw ValidationError("fixtures: bad utterance split");
  }
  std::filesystem::create_directories(dir);
  const std::vector<SpeakerVoice> voices = default_voices();
  const std::vector<std::string>& words = fixture_word_list();

  std::string train_csv = "path,transcript,speaker_id\n";
  std::string heldout_csv = "path,transcript,speaker_id\n";
  FixtureSet set;

  Rng rng(seed);
  for (size_t v = 0; v < voices.size(); ++v) {
    for (int u = 0; u < per_speaker; ++u) {
      const int num_words = rng.uniform_int(2, 4);
      std::string text;
      for (int k = 0; k < num_words; ++k) {
        if (k > 0) text += ' ';
        text += words[rng.uniform_int(0, static_cast<int>(words.size()) - 1)];
      }
      const uint64_t utt_seed = seed ^ (0x9e3779b9ull * (v * 1000 + u + 1));
      const Waveform w = synthesize_utterance(text, voices[v], utt_seed);
      char name[64];
      std::snprintf(name, sizeof(name), "%s_utt%02d.wav", voices[v].id.c_str(), u);
      save_wav(w, dir + "/" + name);
      const std::string row = std::string(name) + "," + text + "," + voices[v].id + "\n";
      if (u < per_speaker - heldout_per_speaker) {
        train_csv += row;
        ++set.train_count;
      } else {
        heldout_csv += row;
        ++set.heldout_count;
      }
    }
  }

  set.train_manifest = dir + "/train.csv";
  set.heldout_manifest = dir + "/heldout.csv";
  {
    std::ofstream f(set.train_manifest, std::ios::trunc);
    f << train_csv;
  }
  {
    std::ofstream f(set.heldout_manifest, std::ios::trunc);
    f << heldout_csv;
  }
  return set;
}

}  // namespace voxshield

#endif  // VOXSHIELD_FIXTURES_HPP_

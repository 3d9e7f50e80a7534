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

#ifndef VOXSHIELD_TESTS_TEST_SUPPORT_HPP_
#define VOXSHIELD_TESTS_TEST_SUPPORT_HPP_

#include <string>
#include <vector>

#include "voxshield/fixtures.hpp"
#include "voxshield/models.hpp"

namespace test_support {

// In-memory synthetic corpus; no disk involved.
inline voxshield::FixturesCorpus make_corpus(int n_speakers = 4, int per_speaker = 11,
                                             uint64_t seed = 1234) {
  using namespace voxshield;
  const std::vector<SpeakerVoice> voices = default_voices();
  const std::vector<std::string>& words = fixture_word_list();
  Rng rng(seed);
  FixturesCorpus corpus;
  corpus.manifest_path = "mem://corpus";
  for (int v = 0; v < n_speakers; ++v) {
    for (int u = 0; u < per_speaker; ++u) {
      const int num_words = rng.uniform_int(2, 3);
      std::string text;
      for (int k = 0; k < num_words; ++k) {
        if (k > 0) text += ' ';
        text += words[rng.uniform_int(0, static_cast<int>(words.size()) - 1)];
      }
      FixtureRecord rec;
      rec.path = "mem://" + voices[v].id + "/" + std::to_string(u);
      rec.transcript = text;
      rec.speaker_id = voices[v].id;
      rec.audio = synthesize_utterance(text, voices[v], seed ^ (v * 977 + u + 1));
      corpus.records.push_back(std::move(rec));
    }
  }
  return corpus;
}

inline voxshield::Waveform sine(double freq, double amp, int64_t n, int rate = 16000) {
  voxshield::Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (int64_t i = 0; i < n; ++i) w.samples[i] = amp * std::sin(2.0 * M_PI * freq * i / rate);
  return w;
}

inline voxshield::Waveform noise(double amp, int64_t n, uint64_t seed, int rate = 16000) {
  voxshield::Rng rng(seed);
  voxshield::Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (double& s : w.samples) s = rng.uniform(-amp, amp);
  return w;
}

}  // namespace test_support

#endif  // VOXSHIELD_TESTS_TEST_SUPPORT_HPP_

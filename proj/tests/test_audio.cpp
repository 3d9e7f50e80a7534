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

#include "voxshield/audio.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace voxshield;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void push_u32(std::vector<unsigned char>& v, uint32_t x) {
  v.push_back(x & 0xff);
  v.push_back((x >> 8) & 0xff);
  v.push_back((x >> 16) & 0xff);
  v.push_back((x >> 24) & 0xff);
}

void push_u16(std::vector<unsigned char>& v, uint16_t x) {
  v.push_back(x & 0xff);
  v.push_back((x >> 8) & 0xff);
}

std::vector<unsigned char> make_wav(int format, int channels, int rate, int bits,
                                    const std::vector<unsigned char>& payload) {
  std::vector<unsigned char> v;
  v.insert(v.end(), {'R', 'I', 'F', 'F'});
  push_u32(v, 36 + static_cast<uint32_t>(payload.size()));
  v.insert(v.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  push_u32(v, 16);
  push_u16(v, static_cast<uint16_t>(format));
  push_u16(v, static_cast<uint16_t>(channels));
  push_u32(v, static_cast<uint32_t>(rate));
  push_u32(v, static_cast<uint32_t>(rate * channels * bits / 8));
  push_u16(v, static_cast<uint16_t>(channels * bits / 8));
  push_u16(v, static_cast<uint16_t>(bits));
  v.insert(v.end(), {'d', 'a', 't', 'a'});
  push_u32(v, static_cast<uint32_t>(payload.size()));
  v.insert(v.end(), payload.begin(), payload.end());
  return v;
}

std::vector<unsigned char> pcm16_payload(const std::vector<int16_t>& samples) {
  std::vector<unsigned char> p;
  for (int16_t s : samples) push_u16(p, static_cast<uint16_t>(s));
  return p;
}

}  // namespace

TEST_CASE("load_wav scales 16-bit PCM by full scale") {
  const std::string path = temp_path("vx_const16.wav");
  write_file(path, make_wav(1, 1, 16000, 16, pcm16_payload(std::vector<int16_t>(64, 16384))));
  const Waveform w = load_wav(path);
  REQUIRE(w.sample_rate == 16000);
  REQUIRE(w.length() == 64);
  for (double s : w.samples) REQUIRE(s == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("load_wav silence decodes to zeros") {
  const std::string path = temp_path("vx_silence.wav");
  write_file(path, make_wav(1, 1, 16000, 16, pcm16_payload(std::vector<int16_t>(32, 0))));
  const Waveform w = load_wav(path);
  for (double s : w.samples) REQUIRE(s == 0.0);
}

TEST_CASE("load_wav averages stereo channels") {
  std::vector<int16_t> interleaved;
  for (int i = 0; i < 16; ++i) {
    interleaved.push_back(6554);
    interleaved.push_back(-6554);
  }
  const std::string path = temp_path("vx_stereo.wav");
  write_file(path, make_wav(1, 2, 22050, 16, pcm16_payload(interleaved)));
  const Waveform w = load_wav(path);
  REQUIRE(w.length() == 16);
  for (double s : w.samples) REQUIRE(s == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("load_wav handles 8-bit and 24-bit PCM") {
  const std::string p8 = temp_path("vx_8bit.wav");
  write_file(p8, make_wav(1, 1, 8000, 8, std::vector<unsigned char>(16, 192)));
  const Waveform w8 = load_wav(p8);
  for (double s : w8.samples) REQUIRE(s == Catch::Approx(0.5).margin(1e-12));

  std::vector<unsigned char> p24;
  for (int i = 0; i < 8; ++i) {
    // 0x400000 = 4194304 = half of full scale 8388608.
    p24.push_back(0x00);
    p24.push_back(0x00);
    p24.push_back(0x40);
  }
  const std::string path24 = temp_path("vx_24bit.wav");
  write_file(path24, make_wav(1, 1, 48000, 24, p24));
  const Waveform w24 = load_wav(path24);
  for (double s : w24.samples) REQUIRE(s == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("load_wav rejects bad inputs") {
  const std::string nonpcm = temp_path("vx_float.wav");
  write_file(nonpcm, make_wav(3, 1, 16000, 32, std::vector<unsigned char>(64, 0)));
  REQUIRE_THROWS_AS(load_wav(nonpcm), ValidationError);

  const std::string empty = temp_path("vx_empty.wav");
  write_file(empty, make_wav(1, 1, 16000, 16, {}));
  REQUIRE_THROWS_AS(load_wav(empty), ValidationError);

  REQUIRE_THROWS_AS(load_wav(temp_path("vx_does_not_exist.wav")), ValidationError);
}

TEST_CASE("save_wav round trip stays within one quantization step") {
  Rng rng(42);
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(2000);
  for (double& s : w.samples) s = rng.uniform(-1.0, 1.0);
  const std::string path = temp_path("vx_roundtrip.wav");
  save_wav(w, path);
  const Waveform r = load_wav(path);
  REQUIRE(r.length() == w.length());
  REQUIRE(r.sample_rate == w.sample_rate);
  for (size_t i = 0; i < w.samples.size(); ++i) {
    REQUIRE(std::abs(r.samples[i] - w.samples[i]) <= 1.0 / 32768.0 + 1e-12);
  }
}

TEST_CASE("save_wav stores 1.0 as full-scale positive code") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples = {1.0, -1.0, 0.0};
  const std::string path = temp_path("vx_fullscale.wav");
  save_wav(w, path);
  std::ifstream f(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  const auto* data = bytes.data() + 44;
  const int16_t s0 = static_cast<int16_t>(data[0] | (data[1] << 8));
  const int16_t s1 = static_cast<int16_t>(data[2] | (data[3] << 8));
  const int16_t s2 = static_cast<int16_t>(data[4] | (data[5] << 8));
  REQUIRE(s0 == 32767);
  REQUIRE(s1 == -32768);
  REQUIRE(s2 == 0);
}

TEST_CASE("resample at the same rate is the identity") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples = {0.1, -0.2, 0.3, 0.0};
  const Waveform r = resample(w, 16000);
  REQUIRE(r.samples == w.samples);
}

TEST_CASE("resample passes DC") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(4000, 0.3);
  const Waveform r = resample(w, 8000);
  REQUIRE(r.sample_rate == 8000);
  REQUIRE(r.length() == 2000);
  for (int64_t i = 100; i + 100 < r.length(); ++i) {
    REQUIRE(r.samples[i] == Catch::Approx(0.3).margin(1e-3));
  }
}

TEST_CASE("resample round trip preserves a low tone") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(16000);
  for (size_t i = 0; i < w.samples.size(); ++i) {
    w.samples[i] = 0.8 * std::sin(2.0 * M_PI * 100.0 * i / 16000.0);
  }
  const Waveform down = resample(w, 8000);
  const Waveform up = resample(down, 16000);
  REQUIRE(up.length() == w.length());
  double num = 0.0, da = 0.0, db = 0.0;
  for (int64_t i = 200; i + 200 < w.length(); ++i) {
    num += w.samples[i] * up.samples[i];
    da += w.samples[i] * w.samples[i];
    db += up.samples[i] * up.samples[i];
  }
  const double corr = num / std::sqrt(da * db);
  REQUIRE(corr >= 0.99);
}

TEST_CASE("resample is linear in its input") {
  Rng rng(7);
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(1600);
  for (double& s : w.samples) s = rng.uniform(-0.4, 0.4);
  Waveform scaled = w;
  const double a = 0.37;
  for (double& s : scaled.samples) s *= a;

  const Waveform ra = resample(scaled, 11025);
  const Waveform rb = resample(w, 11025);
  REQUIRE(ra.length() == rb.length());
  for (int64_t i = 0; i < ra.length(); ++i) {
    REQUIRE(std::abs(ra.samples[i] - a * rb.samples[i]) <= 1e-9);
  }
}

TEST_CASE("loaded and saved waveforms stay inside [-1, 1]") {
  Rng rng(99);
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(512);
  for (double& s : w.samples) s = rng.uniform(-1.0, 1.0);
  const std::string path = temp_path("vx_range.wav");
  save_wav(w, path);
  const Waveform r = load_wav(path);
  for (double s : r.samples) REQUIRE((s >= -1.0 && s <= 1.0));
}

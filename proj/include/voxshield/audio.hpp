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

#ifndef VOXSHIELD_AUDIO_HPP_
#define VOXSHIELD_AUDIO_HPP_

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "voxshield/common.hpp"

namespace voxshield {

constexpr int kCanonicalSampleRate = 16000;

// Mono waveform with samples in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kCanonicalSampleRate;

  Waveform() = default;
  Waveform(std::vector<double> s, int rate) : samples(std::move(s)), sample_rate(rate) {}

  int64_t length() const { return static_cast<int64_t>(samples.size()); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }

  void validate() const {
    if (sample_rate <= 0) throw ValidationError("waveform: sample_rate must be > 0");
    if (samples.empty()) throw ValidationError("waveform: empty");
    for (double s : samples) {
      if (!(s >= -1.0 && s <= 1.0)) throw ValidationError("waveform: sample out of [-1,1]");
    }
  }
};

// L-infinity perturbation budget.
struct PerturbationBudget {
  double epsilon = 8.0 / 255.0;

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("budget: epsilon must be in (0,1)");
  }
};

namespace wav_detail {

inline uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

inline void write_u32(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

inline void write_u16(std::vector<unsigned char>& out, uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

}  // namespace wav_detail

// Reads a RIFF/PCM WAV file (8/16/24/32-bit integer PCM, 1 or 2 channels).
// Stereo is averaged to mono; integer codes are scaled by the type's full
// scale so all samples land in [-1, 1].
inline Waveform load_wav(const std::string& path) {
  using namespace wav_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("load_wav: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw ValidationError("load_wav: not a RIFF/WAVE file: " + path);
  }

  size_t pos = 12;
  int format = -1, channels = 0, bits = 0, rate = 0;
  const unsigned char* data = nullptr;
  size_t data_len = 0;
  while (pos + 8 <= buf.size()) {
    const char* id = reinterpret_cast<const char*>(buf.data() + pos);
    const uint32_t len = read_u32(buf.data() + pos + 4);
    pos += 8;
    if (pos + len > buf.size()) throw ValidationError("load_wav: truncated chunk in " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw ValidationError("load_wav: bad fmt chunk in " + path);
      format = read_u16(buf.data() + pos);
      channels = read_u16(buf.data() + pos + 2);
      rate = static_cast<int>(read_u32(buf.data() + pos + 4));
      bits = read_u16(buf.data() + pos + 14);
      if (format == 0xFFFE && len >= 40) {
        // WAVE_FORMAT_EXTENSIBLE: sub-format GUID starts with the format tag.
        format = read_u16(buf.data() + pos + 24);
      }
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = buf.data() + pos;
      data_len = len;
    }
    pos += len + (len & 1);
  }

  if (format != 1) throw ValidationError("load_wav: only PCM WAV supported: " + path);
  if (channels < 1 || channels > 2) throw ValidationError("load_wav: mono or stereo only: " + path);
  if (bits != 8 && bits != 16 && bits != 24 && bits != 32) {
    throw ValidationError("load_wav: unsupported bit depth: " + path);
  }
  if (rate <= 0) throw ValidationError("load_wav: bad sample rate: " + path);
  if (data == nullptr || data_len == 0) throw ValidationError("load_wav: no audio data: " + path);

  const int bytes_per = bits / 8;
  const size_t frames = data_len / (static_cast<size_t>(bytes_per) * channels);
  if (frames == 0) throw ValidationError("load_wav: zero-length audio: " + path);

  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(frames);
  for (size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const unsigned char* p = data + (f * channels + c) * bytes_per;
      double v = 0.0;
      switch (bits) {
        case 8:
          v = (static_cast<int>(p[0]) - 128) / 128.0;
          break;
        case 16: {
          const int16_t s = static_cast<int16_t>(p[0] | (p[1] << 8));
          v = s / 32768.0;
          break;
        }
        case 24: {
          int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
          if (s & 0x800000) s |= ~0xFFFFFF;
          v = s / 8388608.0;
          break;
        }
        case 32: {
          const int32_t s = static_cast<int32_t>(read_u32(p));
          v = s / 2147483648.0;
          break;
        }
        default:
          break;
      }
      acc += v;
    }
    w.samples[f] = clamp(acc / channels, -1.0, 1.0);
  }
  return w;
}

// Writes 16-bit PCM mono. Quantization uses a 32768 step so a load/save
// round trip reproduces every sample within 1/32768.
inline void save_wav(const Waveform& w, const std::string& path) {
  using namespace wav_detail;
  w.validate();

  std::vector<unsigned char> out;
  out.reserve(44 + 2 * w.samples.size());
  const uint32_t data_bytes = static_cast<uint32_t>(2 * w.samples.size());
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  write_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<uint32_t>(w.sample_rate));
  write_u32(out, static_cast<uint32_t>(w.sample_rate) * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  write_u32(out, data_bytes);
  for (double s : w.samples) {
    const long q = std::lround(s * 32768.0);
    const int16_t v = static_cast<int16_t>(std::max(-32768L, std::min(32767L, q)));
    write_u16(out, static_cast<uint16_t>(v));
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("save_wav: cannot write " + tmp);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw RuntimeFailure("save_wav: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw RuntimeFailure("save_wav: rename failed for " + path);
  }
}

namespace resample_detail {

inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double half_x = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half_x / k) * (half_x / k);
    sum += term;
    if (term < sum * 1e-16) break;
  }
  return sum;
}

inline double sinc(double t) {
  if (std::abs(t) < 1e-12) return 1.0;
  const double pt = M_PI * t;
  return std::sin(pt) / pt;
}

}  // namespace resample_detail

// Windowed-sinc interpolation core at an arbitrary rate ratio (output rate /
// input rate): Kaiser window, beta = 8, 32 zero crossings at the cutoff rate.
// Per-output weight normalization gives exactly unity DC gain.
inline std::vector<double> sinc_interp(const std::vector<double>& x, double ratio) {
  if (!(ratio > 0.0)) throw ValidationError("sinc_interp: ratio must be > 0");
  using resample_detail::bessel_i0;
  using resample_detail::sinc;

  const double cutoff = std::min(1.0, ratio);  // anti-aliasing when downsampling
  constexpr double kBeta = 8.0;
  constexpr int kZeroCrossings = 32;
  const double support = kZeroCrossings / cutoff;  // in input samples
  const double i0_beta = bessel_i0(kBeta);
  const int64_t in_len = static_cast<int64_t>(x.size());
  const int64_t out_len = std::max<int64_t>(1, std::llround(in_len * ratio));

  std::vector<double> out(out_len);
  for (int64_t j = 0; j < out_len; ++j) {
    const double center = j / ratio;
    const int64_t lo = std::max<int64_t>(0, static_cast<int64_t>(std::ceil(center - support)));
    const int64_t hi = std::min<int64_t>(in_len - 1, static_cast<int64_t>(std::floor(center + support)));
    double acc = 0.0, wsum = 0.0;
    for (int64_t n = lo; n <= hi; ++n) {
      const double t = n - center;
      const double u = t / support;
      const double win = bessel_i0(kBeta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0_beta;
      const double h = cutoff * sinc(cutoff * t) * win;
      acc += h * x[n];
      wsum += h;
    }
    out[j] = wsum != 0.0 ? acc / wsum : 0.0;
  }
  return out;
}

// Band-limited resampling to a new rate; output is clamped to [-1, 1].
inline Waveform resample(const Waveform& w, int target_rate) {
  if (target_rate <= 0) throw ValidationError("resample: target_rate must be > 0");
  if (w.samples.empty()) throw ValidationError("resample: empty waveform");
  if (target_rate == w.sample_rate) return w;

  Waveform out;
  out.sample_rate = target_rate;
  out.samples = sinc_interp(w.samples, static_cast<double>(target_rate) / w.sample_rate);
  for (double& s : out.samples) s = clamp(s, -1.0, 1.0);
  return out;
}

// Ingestion path: canonicalize any loaded file to the processing rate.
inline Waveform load_wav_canonical(const std::string& path, int rate = kCanonicalSampleRate) {
  Waveform w = load_wav(path);
  if (w.sample_rate != rate) w = resample(w, rate);
  return w;
}

}  // namespace voxshield

#endif  // VOXSHIELD_AUDIO_HPP_

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

#ifndef VOXSHIELD_EVALUATE_HPP_
#define VOXSHIELD_EVALUATE_HPP_

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"
#include "voxshield/models.hpp"
#include "voxshield/wer.hpp"

namespace voxshield {

constexpr double kSnrCapDb = 120.0;

// Speaker similarity under a held-out verifier encoder (the verifier must
// not be part of the protection ensemble).
inline double sim(const Waveform& a, const Waveform& b, const SpeakerEncoder& verifier) {
  const EmbeddingVector ea = verifier.encode(a);
  const EmbeddingVector eb = verifier.encode(b);
  return dot(ea.values, eb.values);
}

// 10 log10(||x||^2 / ||x' - x||^2), capped at kSnrCapDb for a numerically
// zero perturbation.
inline double snr(const Waveform& x, const Waveform& x_prime) {
  if (x.length() != x_prime.length()) throw ValidationError("snr: length mismatch");
  double ex = 0.0, ed = 0.0;
  for (size_t i = 0; i < x.samples.size(); ++i) {
    ex += x.samples[i] * x.samples[i];
    const double d = x_prime.samples[i] - x.samples[i];
    ed += d * d;
  }
  if (ex <= 0.0) throw ValidationError("snr: silent reference");
  if (ed <= 0.0 || 10.0 * std::log10(ex / ed) >= kSnrCapDb) return kSnrCapDb;
  return 10.0 * std::log10(ex / ed);
}

// SNR with both signals trimmed to the shorter length, for transforms that
// change duration.
inline double snr_trimmed(const Waveform& x, const Waveform& x_prime) {
  const int64_t n = std::min(x.length(), x_prime.length());
  Waveform a, b;
  a.sample_rate = x.sample_rate;
  b.sample_rate = x.sample_rate;
  a.samples.assign(x.samples.begin(), x.samples.begin() + n);
  b.samples.assign(x_prime.samples.begin(), x_prime.samples.begin() + n);
  return snr(a, b);
}

// ---------------------------------------------------------------------------
// Augmentations (the robustness battery's transform set)
// ---------------------------------------------------------------------------

enum class AugmentKind {
  kNone,
  kResampleRoundtrip,
  kMelInvert,
  kQuantizeDequantize,
  kFiltering,
  kSpeed,
  kGaussianNoise,
  kTimeMask,
  kPitchShift,
  kTanhDistortion,
  kBandPass,
  kLowPass,
  kHighPass,
  kSpectralGating,
};

inline const std::vector<std::pair<AugmentKind, std::string>>& augment_kind_names() {
  static const std::vector<std::pair<AugmentKind, std::string>> names = {
      {AugmentKind::kNone, "none"},
      {AugmentKind::kResampleRoundtrip, "resample-roundtrip"},
      {AugmentKind::kMelInvert, "mel-invert"},
      {AugmentKind::kQuantizeDequantize, "quantize-dequantize"},
      {AugmentKind::kFiltering, "filtering"},
      {AugmentKind::kSpeed, "speed"},
      {AugmentKind::kGaussianNoise, "gaussian-noise"},
      {AugmentKind::kTimeMask, "time-mask"},
      {AugmentKind::kPitchShift, "pitch-shift"},
      {AugmentKind::kTanhDistortion, "tanh-distortion"},
      {AugmentKind::kBandPass, "band-pass"},
      {AugmentKind::kLowPass, "low-pass"},
      {AugmentKind::kHighPass, "high-pass"},
      {AugmentKind::kSpectralGating, "spectral-gating-denoise"},
  };
  return names;
}

inline std::string augment_name(AugmentKind kind) {
  for (const auto& [k, n] : augment_kind_names()) {
    if (k == kind) return n;
  }
  throw ValidationError("unknown augmentation kind");
}

inline AugmentKind augment_from_name(const std::string& name) {
  for (const auto& [k, n] : augment_kind_names()) {
    if (n == name) return k;
  }
  throw ValidationError("unknown augmentation kind: " + name);
}

// Every transform kind except "none", in battery order.
inline std::vector<AugmentKind> all_augment_kinds() {
  std::vector<AugmentKind> kinds;
  for (const auto& [k, n] : augment_kind_names()) {
    if (k != AugmentKind::kNone) kinds.push_back(k);
  }
  return kinds;
}

struct AugmentParams {
  uint64_t seed = 7;
  int resample_rate = 8000;
  int mel_bands = 40;
  int mel_gl_iterations = 32;
  int quantize_bits = 8;
  int filtering_window = 5;
  double speed_factor = 1.1;
  double noise_sigma = 0.01;
  double time_mask_fraction = 0.10;
  double pitch_semitones = 2.0;
  double tanh_drive = 2.0;
  double lpf_hz = 4000.0;
  double hpf_hz = 300.0;
  double bpf_low_hz = 300.0;
  double bpf_high_hz = 4000.0;
  double sg_threshold_db = 6.0;
};

namespace aug_detail {

inline Waveform clamp_wave(Waveform w) {
  for (double& s : w.samples) s = clamp(s, -1.0, 1.0);
  return w;
}

// Linear-phase windowed-sinc low-pass kernel (Hamming, odd length),
// normalized to unity DC gain.
inline std::vector<double> lowpass_kernel(double cutoff_hz, int sample_rate, int taps = 101) {
  const double fc = cutoff_hz / sample_rate;
  const int mid = taps / 2;
  std::vector<double> h(taps);
  double sum = 0.0;
  for (int i = 0; i < taps; ++i) {
    const double t = i - mid;
    const double s = t == 0.0 ? 2.0 * fc : std::sin(2.0 * M_PI * fc * t) / (M_PI * t);
    const double win = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (taps - 1));
    h[i] = s * win;
    sum += h[i];
  }
  for (double& v : h) v /= sum;
  return h;
}

inline std::vector<double> convolve_same(const std::vector<double>& x, const std::vector<double>& h) {
  const int mid = static_cast<int>(h.size()) / 2;
  std::vector<double> y(x.size(), 0.0);
  for (size_t i = 0; i < x.size(); ++i) {
    double acc = 0.0;
    for (size_t j = 0; j < h.size(); ++j) {
      const int64_t src = static_cast<int64_t>(i) + static_cast<int64_t>(j) - mid;
      if (src < 0 || src >= static_cast<int64_t>(x.size())) continue;
      acc += h[j] * x[src];
    }
    y[i] = acc;
  }
  return y;
}

inline Waveform fir_lowpass(const Waveform& w, double cutoff_hz) {
  Waveform out = w;
  out.samples = convolve_same(w.samples, lowpass_kernel(cutoff_hz, w.sample_rate));
  return clamp_wave(std::move(out));
}

inline Waveform fir_highpass(const Waveform& w, double cutoff_hz) {
  std::vector<double> h = lowpass_kernel(cutoff_hz, w.sample_rate);
  for (double& v : h) v = -v;
  h[h.size() / 2] += 1.0;  // spectral inversion
  Waveform out = w;
  out.samples = convolve_same(w.samples, h);
  return clamp_wave(std::move(out));
}

inline Waveform fir_bandpass(const Waveform& w, double lo_hz, double hi_hz) {
  std::vector<double> h = lowpass_kernel(hi_hz, w.sample_rate);
  const std::vector<double> hl = lowpass_kernel(lo_hz, w.sample_rate);
  for (size_t i = 0; i < h.size(); ++i) h[i] -= hl[i];
  Waveform out = w;
  out.samples = convolve_same(w.samples, h);
  return clamp_wave(std::move(out));
}

// Granular overlap-add time stretch (Hann grains, 75% overlap on the
// synthesis side). Rough but deterministic.
inline std::vector<double> time_stretch_ola(const std::vector<double>& x, double stretch) {
  const int grain = 1024;
  const int hop_syn = 256;
  const int64_t in_len = static_cast<int64_t>(x.size());
  const int64_t out_len = std::max<int64_t>(grain, std::llround(in_len * stretch));
  std::vector<double> acc(out_len, 0.0), norm(out_len, 0.0);
  std::vector<double> win(grain);
  for (int i = 0; i < grain; ++i) win[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / grain);
  for (int64_t pos = 0; pos + grain <= out_len; pos += hop_syn) {
    int64_t src = std::llround(pos / stretch);
    src = std::min(src, std::max<int64_t>(0, in_len - grain));
    for (int i = 0; i < grain; ++i) {
      if (src + i >= in_len) break;
      acc[pos + i] += win[i] * x[src + i];
      norm[pos + i] += win[i];
    }
  }
  for (int64_t i = 0; i < out_len; ++i) acc[i] = norm[i] > 1e-9 ? acc[i] / norm[i] : 0.0;
  return acc;
}

inline Waveform mel_invert(const Waveform& w, const AugmentParams& p) {
  StftConfig cfg;
  cfg.frame_length = 1024;
  cfg.hop_length = 256;
  cfg.fft_size = 1024;
  const Mat<Cpx> spec = stft(w, cfg);
  const int frames = spec.rows, bins = spec.cols;
  const Mat<double> fb = mel_filterbank(p.mel_bands, cfg.fft_size, w.sample_rate);

  Mat<double> mel(frames, p.mel_bands, 0.0);
  for (int m = 0; m < frames; ++m) {
    for (int i = 0; i < p.mel_bands; ++i) {
      double e = 0.0;
      for (int k = 0; k < bins; ++k) e += fb.at(i, k) * std::norm(spec.at(m, k));
      mel.at(m, i) = e;
    }
  }

  // Approximate pseudo-inverse of the filterbank: transpose with column
  // normalization.
  std::vector<double> colsum(bins, 0.0);
  for (int i = 0; i < p.mel_bands; ++i) {
    for (int k = 0; k < bins; ++k) colsum[k] += fb.at(i, k);
  }
  Mat<double> mag(frames, bins, 0.0);
  for (int m = 0; m < frames; ++m) {
    for (int k = 0; k < bins; ++k) {
      double e = 0.0;
      for (int i = 0; i < p.mel_bands; ++i) e += fb.at(i, k) * mel.at(m, i);
      mag.at(m, k) = std::sqrt(std::max(0.0, e / std::max(colsum[k], 1e-8)));
    }
  }

  // Phase recovery, zero-phase init.
  Mat<Cpx> s(frames, bins);
  for (int m = 0; m < frames; ++m) {
    for (int k = 0; k < bins; ++k) s.at(m, k) = Cpx(mag.at(m, k), 0.0);
  }
  Waveform y;
  for (int it = 0; it < p.mel_gl_iterations; ++it) {
    y = istft(s, cfg, w.sample_rate);
    const Mat<Cpx> sp = stft(y, cfg);
    for (int m = 0; m < std::min(frames, sp.rows); ++m) {
      for (int k = 0; k < bins; ++k) {
        const Cpx z = sp.at(m, k);
        const double a = std::abs(z);
        s.at(m, k) = a > 1e-12 ? Cpx(mag.at(m, k) * z.real() / a, mag.at(m, k) * z.imag() / a)
                               : Cpx(mag.at(m, k), 0.0);
      }
    }
  }
  y = istft(s, cfg, w.sample_rate, w.length());
  return clamp_wave(std::move(y));
}

inline Waveform spectral_gating(const Waveform& w, const AugmentParams& p) {
  StftConfig cfg;
  cfg.frame_length = 512;
  cfg.hop_length = 128;
  cfg.fft_size = 512;
  Mat<Cpx> spec = stft(w, cfg);
  const int frames = spec.rows, bins = spec.cols;

  // Noise profile: mean magnitude per bin over the quietest 10% of frames.
  std::vector<std::pair<double, int>> frame_energy(frames);
  for (int m = 0; m < frames; ++m) {
    double e = 0.0;
    for (int k = 0; k < bins; ++k) e += std::norm(spec.at(m, k));
    frame_energy[m] = {e, m};
  }
  std::sort(frame_energy.begin(), frame_energy.end());
  const int quiet = std::max(1, frames / 10);
  std::vector<double> floor_mag(bins, 0.0);
  for (int q = 0; q < quiet; ++q) {
    const int m = frame_energy[q].second;
    for (int k = 0; k < bins; ++k) floor_mag[k] += std::abs(spec.at(m, k));
  }
  for (double& v : floor_mag) v /= quiet;

  const double gate = std::pow(10.0, p.sg_threshold_db / 20.0);
  for (int m = 0; m < frames; ++m) {
    for (int k = 0; k < bins; ++k) {
      const double a = std::abs(spec.at(m, k));
      const double gain = a >= floor_mag[k] * gate ? 1.0 : 0.1;
      spec.at(m, k) *= gain;
    }
  }
  Waveform y = istft(spec, cfg, w.sample_rate, w.length());
  return clamp_wave(std::move(y));
}

}  // namespace aug_detail

// Deterministic transform battery. Length may change for speed and
// pitch-shift; the sample rate field is always preserved.
inline Waveform augment(const Waveform& w, AugmentKind kind, const AugmentParams& p = AugmentParams()) {
  using namespace aug_detail;
  switch (kind) {
    case AugmentKind::kNone:
      return w;
    case AugmentKind::kResampleRoundtrip: {
      Waveform down = resample(w, p.resample_rate);
      Waveform up = resample(down, w.sample_rate);
      up.samples.resize(w.samples.size(), 0.0);
      return clamp_wave(std::move(up));
    }
    case AugmentKind::kMelInvert:
      return mel_invert(w, p);
    case AugmentKind::kQuantizeDequantize: {
      if (p.quantize_bits < 2 || p.quantize_bits > 16) {
        throw ValidationError("augment: quantize_bits out of range");
      }
      const double scale = static_cast<double>(1 << (p.quantize_bits - 1));
      Waveform out = w;
      for (double& s : out.samples) s = clamp(std::round(s * scale) / scale, -1.0, 1.0);
      return out;
    }
    case AugmentKind::kFiltering: {
      if (p.filtering_window < 1) throw ValidationError("augment: filtering_window must be >= 1");
      const std::vector<double> h(p.filtering_window, 1.0 / p.filtering_window);
      Waveform out = w;
      out.samples = convolve_same(w.samples, h);
      return clamp_wave(std::move(out));
    }
    case AugmentKind::kSpeed: {
      if (!(p.speed_factor > 0.0)) throw ValidationError("augment: speed_factor must be > 0");
      Waveform out = w;
      out.samples = sinc_interp(w.samples, 1.0 / p.speed_factor);
      return clamp_wave(std::move(out));
    }
    case AugmentKind::kGaussianNoise: {
      if (p.noise_sigma < 0.0) throw ValidationError("augment: noise_sigma must be >= 0");
      if (p.noise_sigma == 0.0) return w;
      Rng rng(p.seed);
      Waveform out = w;
      for (double& s : out.samples) s += p.noise_sigma * rng.gaussian();
      return clamp_wave(std::move(out));
    }
    case AugmentKind::kTimeMask: {
      if (!(p.time_mask_fraction >= 0.0 && p.time_mask_fraction <= 1.0)) {
        throw ValidationError("augment: time_mask_fraction out of range");
      }
      const int64_t span = std::llround(w.length() * p.time_mask_fraction);
      if (span <= 0) return w;
      Rng rng(p.seed);
      const int64_t start = static_cast<int64_t>(rng.uniform() * std::max<int64_t>(1, w.length() - span));
      Waveform out = w;
      for (int64_t i = start; i < std::min(w.length(), start + span); ++i) out.samples[i] = 0.0;
      return out;
    }
    case AugmentKind::kPitchShift: {
      const double r = std::pow(2.0, p.pitch_semitones / 12.0);
      Waveform out = w;
      const std::vector<double> stretched = time_stretch_ola(w.samples, r);
      out.samples = sinc_interp(stretched, 1.0 / r);
      out.samples.resize(w.samples.size(), 0.0);
      return clamp_wave(std::move(out));
    }
    case AugmentKind::kTanhDistortion: {
      if (!(p.tanh_drive > 0.0)) throw ValidationError("augment: tanh_drive must be > 0");
      Waveform out = w;
      const double norm = std::tanh(p.tanh_drive);
      for (double& s : out.samples) s = std::tanh(p.tanh_drive * s) / norm;
      return clamp_wave(std::move(out));
    }
    case AugmentKind::kBandPass:
      return fir_bandpass(w, p.bpf_low_hz, p.bpf_high_hz);
    case AugmentKind::kLowPass:
      return fir_lowpass(w, p.lpf_hz);
    case AugmentKind::kHighPass:
      return fir_highpass(w, p.hpf_hz);
    case AugmentKind::kSpectralGating:
      return spectral_gating(w, p);
  }
  throw ValidationError("augment: unknown kind");
}

// ---------------------------------------------------------------------------
// Battery
// ---------------------------------------------------------------------------

struct MetricReport {
  std::string kind;
  std::vector<double> wer_percent;  // per utterance
  std::vector<double> sim_values;
  std::vector<double> snr_db;
  double mean_wer = 0.0;
  double mean_sim = 0.0;
  double mean_snr = 0.0;
  int n = 0;
};

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / v.size();
}

// For each kind (plus "none"): transform the protected audio, decode with the
// ASR, score WER against the reference transcripts, SIM and SNR against the
// clean audio.
inline std::vector<MetricReport> run_battery(const std::vector<FixtureRecord>& clean,
                                             const std::vector<Waveform>& protected_audio,
                                             const CtcAsr& asr, const SpeakerEncoder& verifier,
                                             const std::vector<AugmentKind>& kinds,
                                             const AugmentParams& params = AugmentParams()) {
  if (clean.size() != protected_audio.size()) {
    throw ValidationError("run_battery: clean and protected corpora misaligned");
  }
  if (clean.empty()) throw ValidationError("run_battery: empty corpora");

  std::vector<AugmentKind> all;
  all.push_back(AugmentKind::kNone);
  for (AugmentKind k : kinds) {
    if (k != AugmentKind::kNone) all.push_back(k);
  }

  std::vector<MetricReport> reports;
  for (AugmentKind kind : all) {
    MetricReport rep;
    rep.kind = augment_name(kind);
    rep.n = static_cast<int>(clean.size());
    for (size_t i = 0; i < clean.size(); ++i) {
      const Waveform t = augment(protected_audio[i], kind, params);
      rep.wer_percent.push_back(wer(clean[i].transcript, asr.greedy_decode(t)));
      rep.sim_values.push_back(sim(clean[i].audio, t, verifier));
      rep.snr_db.push_back(snr_trimmed(clean[i].audio, t));
    }
    rep.mean_wer = mean_of(rep.wer_percent);
    rep.mean_sim = mean_of(rep.sim_values);
    rep.mean_snr = mean_of(rep.snr_db);
    reports.push_back(std::move(rep));
  }
  return reports;
}

inline std::string format_metric(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::string battery_to_csv(const std::vector<MetricReport>& reports, uint64_t seed) {
  std::string out = "# seed=" + std::to_string(seed) + "\n";
  out += "kind,wer,sim,snr,n\n";
  for (const auto& r : reports) {
    out += r.kind + "," + format_metric(r.mean_wer) + "," + format_metric(r.mean_sim) + "," +
           format_metric(r.mean_snr) + "," + std::to_string(r.n) + "\n";
  }
  return out;
}

inline nlohmann::json battery_to_json(const std::vector<MetricReport>& reports, uint64_t seed) {
  nlohmann::json j;
  j["seed"] = seed;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json row;
    row["kind"] = r.kind;
    row["wer"] = r.mean_wer;
    row["sim"] = r.mean_sim;
    row["snr"] = r.mean_snr;
    row["n"] = r.n;
    row["per_utterance"] = {{"wer", r.wer_percent}, {"sim", r.sim_values}, {"snr", r.snr_db}};
    j["rows"].push_back(row);
  }
  return j;
}

}  // namespace voxshield

#endif  // VOXSHIELD_EVALUATE_HPP_

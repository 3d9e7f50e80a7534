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

#ifndef VOXSHIELD_DSP_HPP_
#define VOXSHIELD_DSP_HPP_

#include <complex>
#include <vector>

#include "voxshield/audio.hpp"
#include "voxshield/common.hpp"

namespace voxshield {

using Cpx = std::complex<double>;

// Power floor applied to |X|^2 / fft_size^2 before taking logs (-200 dB).
constexpr double kPsdFloorPower = 1e-20;
// Full-scale content is mapped to this SPL so masking thresholds are
// comparable with the absolute threshold of hearing.
constexpr double kSplMax = 96.0;
// Floor applied to mel-band energies before the log.
constexpr double kMelFloor = 1e-20;

struct StftConfig {
  int frame_length = 2048;
  int hop_length = 512;
  int fft_size = 2048;

  void validate() const {
    if (!(hop_length > 0 && hop_length <= frame_length && frame_length <= fft_size)) {
      throw ValidationError("stft: need 0 < hop <= frame_length <= fft_size");
    }
    if ((fft_size & (fft_size - 1)) != 0) throw ValidationError("stft: fft_size must be a power of two");
  }

  int num_frames(int64_t num_samples) const {
    if (num_samples < frame_length) throw ValidationError("stft: waveform shorter than one frame");
    return 1 + static_cast<int>((num_samples - frame_length) / hop_length);
  }

  int num_bins() const { return fft_size / 2 + 1; }

  uint64_t hash() const {
    const int v[3] = {frame_length, hop_length, fft_size};
    return fnv1a64(v, sizeof(v));
  }

  bool operator==(const StftConfig& o) const {
    return frame_length == o.frame_length && hop_length == o.hop_length && fft_size == o.fft_size;
  }
};

namespace fft_detail {

// Forward twiddles exp(-2*pi*i*j/n) for j < n/2, cached per size and thread.
inline const std::vector<Cpx>& twiddles(size_t n) {
  thread_local std::vector<std::vector<Cpx>> cache;  // indexed by log2(n)
  size_t lg = 0;
  while ((size_t{1} << lg) < n) ++lg;
  if (cache.size() <= lg) cache.resize(lg + 1);
  std::vector<Cpx>& tw = cache[lg];
  if (tw.size() != n / 2) {
    tw.resize(n / 2);
    for (size_t j = 0; j < n / 2; ++j) {
      const double ang = -2.0 * M_PI * static_cast<double>(j) / static_cast<double>(n);
      tw[j] = Cpx(std::cos(ang), std::sin(ang));
    }
  }
  return tw;
}

}  // namespace fft_detail

// In-place iterative radix-2 FFT. `inverse` applies the conjugate transform
// without the 1/N scale.
inline void fft_inplace(std::vector<Cpx>& a, bool inverse) {
  const size_t n = a.size();
  if (n <= 1) return;
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const std::vector<Cpx>& tw = fft_detail::twiddles(n);
  for (size_t len = 2; len <= n; len <<= 1) {
    const size_t step = n / len;
    for (size_t i = 0; i < n; i += len) {
      for (size_t j = 0; j < len / 2; ++j) {
        const Cpx w = inverse ? std::conj(tw[j * step]) : tw[j * step];
        const Cpx u = a[i + j];
        const Cpx v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }
}

// Periodic Hann window.
inline std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  return w;
}

// One-sided STFT, [num_frames x (fft_size/2 + 1)], no padding.
inline Mat<Cpx> stft(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  const int frames = cfg.num_frames(w.length());
  const int bins = cfg.num_bins();
  const std::vector<double> win = hann_window(cfg.frame_length);
  Mat<Cpx> out(frames, bins);
  std::vector<Cpx> buf(cfg.fft_size);
  for (int m = 0; m < frames; ++m) {
    const int64_t start = static_cast<int64_t>(m) * cfg.hop_length;
    for (int n = 0; n < cfg.fft_size; ++n) {
      buf[n] = n < cfg.frame_length ? Cpx(win[n] * w.samples[start + n], 0.0) : Cpx(0.0, 0.0);
    }
    fft_inplace(buf, false);
    for (int k = 0; k < bins; ++k) out.at(m, k) = buf[k];
  }
  return out;
}

// Adjoint of `stft` against the one-sided spectrum: grad_spec holds
// dL/dRe(X) in the real part and dL/dIm(X) in the imaginary part.
// Accumulates dL/dx into dx (which must have the waveform's length).
inline void stft_adjoint(const Mat<Cpx>& grad_spec, const StftConfig& cfg,
                         std::vector<double>* dx) {
  const int frames = grad_spec.rows;
  const int bins = cfg.num_bins();
  const std::vector<double> win = hann_window(cfg.frame_length);
  std::vector<Cpx> buf(cfg.fft_size);
  for (int m = 0; m < frames; ++m) {
    for (int k = 0; k < cfg.fft_size; ++k) {
      buf[k] = k < bins ? std::conj(grad_spec.at(m, k)) : Cpx(0.0, 0.0);
    }
    fft_inplace(buf, false);
    const int64_t start = static_cast<int64_t>(m) * cfg.hop_length;
    for (int n = 0; n < cfg.frame_length; ++n) {
      (*dx)[start + n] += win[n] * buf[n].real();
    }
  }
}

// Overlap-add inverse STFT with Hann synthesis window and window-square
// normalization. Used by the augmentation transforms, not by gradients.
inline Waveform istft(const Mat<Cpx>& spec, const StftConfig& cfg, int sample_rate,
                      int64_t length_hint = -1) {
  const int frames = spec.rows;
  const int bins = cfg.num_bins();
  const std::vector<double> win = hann_window(cfg.frame_length);
  const int64_t total = static_cast<int64_t>(frames - 1) * cfg.hop_length + cfg.frame_length;
  std::vector<double> acc(total, 0.0), norm(total, 0.0);
  std::vector<Cpx> buf(cfg.fft_size);
  for (int m = 0; m < frames; ++m) {
    for (int k = 0; k < bins; ++k) buf[k] = spec.at(m, k);
    for (int k = bins; k < cfg.fft_size; ++k) buf[k] = std::conj(spec.at(m, cfg.fft_size - k));
    fft_inplace(buf, true);
    const int64_t start = static_cast<int64_t>(m) * cfg.hop_length;
    for (int n = 0; n < cfg.frame_length; ++n) {
      acc[start + n] += win[n] * buf[n].real() / cfg.fft_size;
      norm[start + n] += win[n] * win[n];
    }
  }
  Waveform out;
  out.sample_rate = sample_rate;
  const int64_t out_len = length_hint > 0 ? length_hint : total;
  out.samples.assign(out_len, 0.0);
  double norm_max = 0.0;
  for (double v : norm) norm_max = std::max(norm_max, v);
  // Floor the normalizer so tapered edges attenuate instead of amplifying.
  const double norm_floor = std::max(1e-9, 0.25 * norm_max);
  for (int64_t i = 0; i < std::min(total, out_len); ++i) {
    out.samples[i] = acc[i] / std::max(norm[i], norm_floor);
  }
  return out;
}

// Log-magnitude power spectral density, globally shifted so the matrix
// maximum maps to kSplMax. The shift is recorded so the same normalization
// can be reused for a perturbation's PSD.
struct PsdFrameMatrix {
  Mat<double> values;               // dB after shift
  std::vector<double> freq_axis;    // bin centers, Hz
  std::vector<double> frame_times;  // frame start times, seconds
  double shift_db = 0.0;
  StftConfig cfg;
};

namespace dsp_detail {

inline PsdFrameMatrix log_psd_raw(const Waveform& w, const StftConfig& cfg) {
  const Mat<Cpx> spec = stft(w, cfg);
  PsdFrameMatrix psd;
  psd.cfg = cfg;
  psd.values = Mat<double>(spec.rows, spec.cols);
  const double n2 = static_cast<double>(cfg.fft_size) * cfg.fft_size;
  for (int m = 0; m < spec.rows; ++m) {
    for (int k = 0; k < spec.cols; ++k) {
      const double p = std::norm(spec.at(m, k)) / n2;
      psd.values.at(m, k) = 10.0 * std::log10(std::max(p, kPsdFloorPower));
    }
  }
  psd.freq_axis.resize(spec.cols);
  for (int k = 0; k < spec.cols; ++k) {
    psd.freq_axis[k] = static_cast<double>(k) * w.sample_rate / cfg.fft_size;
  }
  psd.frame_times.resize(spec.rows);
  for (int m = 0; m < spec.rows; ++m) {
    psd.frame_times[m] = static_cast<double>(m) * cfg.hop_length / w.sample_rate;
  }
  return psd;
}

}  // namespace dsp_detail

inline PsdFrameMatrix log_psd(const Waveform& w, const StftConfig& cfg) {
  PsdFrameMatrix psd = dsp_detail::log_psd_raw(w, cfg);
  double max_db = -INFINITY;
  for (double v : psd.values.data) max_db = std::max(max_db, v);
  psd.shift_db = kSplMax - max_db;
  for (double& v : psd.values.data) v += psd.shift_db;
  return psd;
}

inline PsdFrameMatrix log_psd_with_shift(const Waveform& w, const StftConfig& cfg, double shift_db) {
  PsdFrameMatrix psd = dsp_detail::log_psd_raw(w, cfg);
  psd.shift_db = shift_db;
  for (double& v : psd.values.data) v += shift_db;
  return psd;
}

// Triangular mel filterbank on the HTK mel scale, 0 Hz to Nyquist,
// [n_mels x num_bins].
inline Mat<double> mel_filterbank(int n_mels, int fft_size, int sample_rate) {
  auto hz_to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto mel_to_hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  const int bins = fft_size / 2 + 1;
  const double nyquist = sample_rate / 2.0;
  std::vector<double> edges(n_mels + 2);
  const double mel_max = hz_to_mel(nyquist);
  for (int i = 0; i < n_mels + 2; ++i) edges[i] = mel_to_hz(mel_max * i / (n_mels + 1));
  Mat<double> fb(n_mels, bins);
  for (int i = 0; i < n_mels; ++i) {
    const double lo = edges[i], mid = edges[i + 1], hi = edges[i + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / fft_size;
      double v = 0.0;
      if (f > lo && f < hi) {
        v = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      }
      fb.at(i, k) = v;
    }
  }
  return fb;
}

// Orthonormal DCT-II matrix, [n_out x n_in].
inline Mat<double> dct2_orthonormal(int n_out, int n_in) {
  Mat<double> d(n_out, n_in);
  for (int j = 0; j < n_out; ++j) {
    const double s = j == 0 ? std::sqrt(1.0 / n_in) : std::sqrt(2.0 / n_in);
    for (int i = 0; i < n_in; ++i) {
      d.at(j, i) = s * std::cos(M_PI * j * (2.0 * i + 1.0) / (2.0 * n_in));
    }
  }
  return d;
}

struct MfccMatrix {
  Mat<double> values;  // [num_frames x n_mfcc]
  int n_mfcc = 0;
};

// Intermediates cached by a feature forward pass and consumed by backward.
struct SpectralTape {
  Mat<Cpx> spec;
  Mat<double> mel_energy;  // pre-log, pre-floor
  StftConfig cfg;
  int64_t num_samples = 0;
};

enum class FeatureKind { kLogMel, kMfcc };

// Shared differentiable frontend: STFT -> power -> mel -> log, optionally
// followed by an orthonormal DCT-II (MFCC). Owns the precomputed filterbank
// and DCT so repeated calls stay cheap.
class FeaturePipeline {
 public:
  FeaturePipeline(FeatureKind kind, StftConfig cfg, int n_mels, int n_mfcc, int sample_rate)
      : kind_(kind), cfg_(cfg), n_mels_(n_mels), n_mfcc_(n_mfcc), sample_rate_(sample_rate) {
    cfg.validate();
    if (n_mfcc > n_mels) throw ValidationError("mfcc: n_mfcc must be <= n_mels");
    if (n_mels < 1) throw ValidationError("mfcc: n_mels must be >= 1");
    fb_ = mel_filterbank(n_mels, cfg.fft_size, sample_rate);
    if (kind == FeatureKind::kMfcc) dct_ = dct2_orthonormal(n_mfcc, n_mels);
    // Nonzero support of each triangular filter.
    fb_lo_.resize(n_mels);
    fb_hi_.resize(n_mels);
    for (int i = 0; i < n_mels; ++i) {
      int lo = fb_.cols, hi = 0;
      for (int k = 0; k < fb_.cols; ++k) {
        if (fb_.at(i, k) != 0.0) {
          lo = std::min(lo, k);
          hi = std::max(hi, k + 1);
        }
      }
      fb_lo_[i] = std::min(lo, hi);
      fb_hi_[i] = hi;
    }
  }

  int dim() const { return kind_ == FeatureKind::kMfcc ? n_mfcc_ : n_mels_; }
  const StftConfig& cfg() const { return cfg_; }
  int sample_rate() const { return sample_rate_; }
  FeatureKind kind() const { return kind_; }
  int n_mels() const { return n_mels_; }
  int n_mfcc() const { return n_mfcc_; }

  // Shared stage: STFT -> power -> mel -> floored log, [num_frames x n_mels].
  Mat<double> forward_logmel(const Waveform& w, SpectralTape* tape = nullptr) const {
    if (w.sample_rate != sample_rate_) {
      throw ValidationError("features: waveform rate does not match pipeline rate");
    }
    Mat<Cpx> spec = stft(w, cfg_);
    const int frames = spec.rows;
    Mat<double> mel(frames, n_mels_);
    std::vector<double> power(spec.cols);
    for (int m = 0; m < frames; ++m) {
      for (int k = 0; k < spec.cols; ++k) power[k] = std::norm(spec.at(m, k));
      for (int i = 0; i < n_mels_; ++i) {
        double e = 0.0;
        const double* fbrow = fb_.row(i);
        for (int k = fb_lo_[i]; k < fb_hi_[i]; ++k) e += fbrow[k] * power[k];
        mel.at(m, i) = e;
      }
    }
    if (tape != nullptr) {
      tape->mel_energy = mel;
      tape->cfg = cfg_;
      tape->num_samples = w.length();
      tape->spec = std::move(spec);
    }
    Mat<double> logmel(frames, n_mels_);
    for (size_t i = 0; i < mel.data.size(); ++i) {
      logmel.data[i] = std::log(std::max(mel.data[i], kMelFloor));
    }
    return logmel;
  }

  // [num_frames x dim()]
  Mat<double> forward(const Waveform& w, SpectralTape* tape = nullptr) const {
    return project(forward_logmel(w, tape));
  }

  // Final projection stage over a shared log-mel matrix: identity for
  // log-mel features, the truncated orthonormal DCT-II for MFCC.
  Mat<double> project(const Mat<double>& logmel) const {
    if (kind_ == FeatureKind::kLogMel) return logmel;
    Mat<double> out(logmel.rows, n_mfcc_);
    for (int m = 0; m < logmel.rows; ++m) {
      for (int j = 0; j < n_mfcc_; ++j) {
        double c = 0.0;
        const double* drow = dct_.row(j);
        for (int i = 0; i < n_mels_; ++i) c += drow[i] * logmel.at(m, i);
        out.at(m, j) = c;
      }
    }
    return out;
  }

  // Adjoint of project(): accumulates dL/d(log-mel) from dL/d(features).
  void project_backward(const Mat<double>& grad_feat, Mat<double>* grad_logmel) const {
    if (kind_ == FeatureKind::kLogMel) {
      for (size_t i = 0; i < grad_feat.data.size(); ++i) grad_logmel->data[i] += grad_feat.data[i];
      return;
    }
    for (int m = 0; m < grad_feat.rows; ++m) {
      for (int i = 0; i < n_mels_; ++i) {
        double g = 0.0;
        for (int j = 0; j < n_mfcc_; ++j) g += dct_.at(j, i) * grad_feat.at(m, j);
        grad_logmel->at(m, i) += g;
      }
    }
  }

  // Two pipelines can share one spectral/mel forward pass when everything
  // before the projection stage matches.
  bool shares_frontend(const FeaturePipeline& o) const {
    return cfg_ == o.cfg_ && n_mels_ == o.n_mels_ && sample_rate_ == o.sample_rate_;
  }

  // Accumulates dL/dx given dL/d(log-mel). `dx` must be sized to the
  // waveform length recorded in the tape.
  void backward_from_logmel(const SpectralTape& tape, const Mat<double>& grad_logmel,
                            std::vector<double>* dx) const {
    const int frames = tape.spec.rows;
    const int bins = tape.spec.cols;
    Mat<Cpx> grad_spec(frames, bins);
    for (int m = 0; m < frames; ++m) {
      for (int i = 0; i < n_mels_; ++i) {
        const double e = tape.mel_energy.at(m, i);
        if (e <= kMelFloor) continue;  // flat region of the floored log
        const double ge = grad_logmel.at(m, i) / e;
        const double* fbrow = fb_.row(i);
        for (int k = fb_lo_[i]; k < fb_hi_[i]; ++k) {
          const Cpx x = tape.spec.at(m, k);
          const double gp = ge * fbrow[k];
          grad_spec.at(m, k) += Cpx(gp * 2.0 * x.real(), gp * 2.0 * x.imag());
        }
      }
    }
    stft_adjoint(grad_spec, cfg_, dx);
  }

  // Accumulates dL/dx given dL/d(features).
  void backward(const SpectralTape& tape, const Mat<double>& grad_out, std::vector<double>* dx) const {
    Mat<double> grad_logmel(tape.spec.rows, n_mels_, 0.0);
    project_backward(grad_out, &grad_logmel);
    backward_from_logmel(tape, grad_logmel, dx);
  }

 private:
  FeatureKind kind_;
  StftConfig cfg_;
  int n_mels_;
  int n_mfcc_;
  int sample_rate_;
  Mat<double> fb_;
  std::vector<int> fb_lo_, fb_hi_;
  Mat<double> dct_;
};

// Standalone MFCC op over an ad-hoc configuration.
inline MfccMatrix mfcc(const Waveform& w, const StftConfig& cfg, int n_mels, int n_mfcc) {
  FeaturePipeline pipe(FeatureKind::kMfcc, cfg, n_mels, n_mfcc, w.sample_rate);
  MfccMatrix out;
  out.values = pipe.forward(w);
  out.n_mfcc = n_mfcc;
  return out;
}

}  // namespace voxshield

#endif  // VOXSHIELD_DSP_HPP_

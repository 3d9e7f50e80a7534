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

#ifndef VOXSHIELD_PSYCHOACOUSTIC_HPP_
#define VOXSHIELD_PSYCHOACOUSTIC_HPP_

#include <algorithm>
#include <vector>

#include "voxshield/dsp.hpp"

namespace voxshield {

// Softplus sharpness for the hinge surrogate used in gradients.
constexpr double kHingeSharpness = 10.0;

// Terhardt approximation of the absolute threshold of hearing, clamped to
// kSplMax. DC is assigned the clamp value.
inline double ath_db(double freq_hz) {
  if (freq_hz <= 0.0) return kSplMax;
  const double khz = freq_hz / 1000.0;
  const double v = 3.64 * std::pow(khz, -0.8) - 6.5 * std::exp(-0.6 * (khz - 3.3) * (khz - 3.3)) +
                   1e-3 * std::pow(khz, 4.0);
  return std::min(v, kSplMax);
}

inline double bark(double freq_hz) {
  return 13.0 * std::atan(0.00076 * freq_hz) + 3.5 * std::atan((freq_hz / 7500.0) * (freq_hz / 7500.0));
}

// Per-frame frequency-masking threshold in the same shifted-dB scale as the
// PSD it was computed from.
struct MaskingThresholdMap {
  Mat<double> theta;  // [num_frames x bins], dB
  std::vector<double> freq_axis;
  double shift_db = 0.0;  // normalization shift of the source PSD
  StftConfig cfg;
  int64_t source_samples = 0;
  uint64_t config_hash = 0;

  uint64_t compute_hash() const {
    uint64_t h = cfg.hash();
    h = fnv1a64(&source_samples, sizeof(source_samples), h);
    h = fnv1a64(&shift_db, sizeof(shift_db), h);
    return h;
  }
};

namespace psy_detail {

struct Masker {
  int bin;
  double level_db;  // power-summed over the bin and its two neighbors
  double z;         // bark position
};

// Tonal-masker scan for one PSD frame: local maxima that stand at least
// 7 dB above bins at +-2,+-3 (and +-4..6 above 5.5 kHz).
inline std::vector<Masker> find_tonal_maskers(const double* p, int bins,
                                              const std::vector<double>& freq) {
  std::vector<Masker> out;
  for (int k = 1; k + 1 < bins; ++k) {
    if (!(p[k] > p[k - 1] && p[k] > p[k + 1])) continue;
    const int max_delta = freq[k] > 5500.0 ? 6 : 3;
    bool tonal = true;
    for (int d = 2; d <= max_delta && tonal; ++d) {
      if (k - d >= 0 && p[k] - p[k - d] < 7.0) tonal = false;
      if (k + d < bins && p[k] - p[k + d] < 7.0) tonal = false;
    }
    if (!tonal) continue;
    const double level = 10.0 * std::log10(std::pow(10.0, p[k - 1] / 10.0) +
                                           std::pow(10.0, p[k] / 10.0) +
                                           std::pow(10.0, p[k + 1] / 10.0));
    out.push_back({k, level, bark(freq[k])});
  }
  return out;
}

// Drop maskers below ATH; among maskers within 0.5 Bark keep the strongest
// (ties keep the lower bin).
inline std::vector<Masker> prune_maskers(std::vector<Masker> maskers,
                                         const std::vector<double>& freq) {
  std::vector<Masker> audible;
  for (const Masker& m : maskers) {
    if (m.level_db >= ath_db(freq[m.bin])) audible.push_back(m);
  }
  std::vector<Masker> kept;
  for (size_t i = 0; i < audible.size(); ++i) {
    bool dominated = false;
    for (size_t j = 0; j < audible.size() && !dominated; ++j) {
      if (i == j) continue;
      if (std::abs(audible[i].z - audible[j].z) < 0.5) {
        if (audible[j].level_db > audible[i].level_db ||
            (audible[j].level_db == audible[i].level_db && audible[j].bin < audible[i].bin)) {
          dominated = true;
        }
      }
    }
    if (!dominated) kept.push_back(audible[i]);
  }
  return kept;
}

}  // namespace psy_detail

// Tonal-masker frequency-masking threshold of the clean waveform. The PSD is
// normalized so its maximum maps to kSplMax; the threshold floor is the
// absolute threshold of hearing.
inline MaskingThresholdMap masking_threshold(const Waveform& x, const StftConfig& cfg) {
  const PsdFrameMatrix psd = log_psd(x, cfg);
  const int frames = psd.values.rows;
  const int bins = psd.values.cols;

  MaskingThresholdMap map;
  map.freq_axis = psd.freq_axis;
  map.shift_db = psd.shift_db;
  map.cfg = cfg;
  map.source_samples = x.length();
  map.theta = Mat<double>(frames, bins);

  std::vector<double> z(bins), ath_pow(bins);
  for (int k = 0; k < bins; ++k) {
    z[k] = bark(psd.freq_axis[k]);
    ath_pow[k] = std::pow(10.0, ath_db(psd.freq_axis[k]) / 10.0);
  }

  for (int m = 0; m < frames; ++m) {
    const double* p = psd.values.row(m);
    auto maskers = psy_detail::find_tonal_maskers(p, bins, psd.freq_axis);
    maskers = psy_detail::prune_maskers(std::move(maskers), psd.freq_axis);
    double* theta = map.theta.row(m);
    for (int k = 0; k < bins; ++k) theta[k] = ath_pow[k];
    for (const auto& masker : maskers) {
      const double offset = -6.025 - 0.275 * masker.z;
      const double up_slope = -27.0 + 0.37 * std::max(masker.level_db - 40.0, 0.0);
      for (int k = 0; k < bins; ++k) {
        const double dz = z[k] - masker.z;
        const double spread = dz < 0.0 ? 27.0 * dz : up_slope * dz;
        theta[k] += std::pow(10.0, (masker.level_db + spread + offset) / 10.0);
      }
    }
    for (int k = 0; k < bins; ++k) theta[k] = 10.0 * std::log10(theta[k]);
  }
  map.config_hash = map.compute_hash();
  return map;
}

struct PsyEval {
  double exact = 0.0;   // mean over frames of (1/F) sum max(0, p - theta)
  double smooth = 0.0;  // softplus surrogate of the same quantity
};

namespace psy_detail {

inline void check_compatible(const Waveform& x, const Waveform& x_prime,
                             const MaskingThresholdMap& thresh, const StftConfig& cfg) {
  if (x.length() != x_prime.length() || x.sample_rate != x_prime.sample_rate) {
    throw ValidationError("psy_loss: x and x' must share length and rate");
  }
  if (!(thresh.cfg == cfg) || thresh.source_samples != x.length()) {
    throw ValidationError("psy_loss: threshold map does not match inputs");
  }
  if (thresh.config_hash != thresh.compute_hash()) {
    throw ValidationError("psy_loss: threshold map hash mismatch");
  }
}

}  // namespace psy_detail

// Evaluates the masking penalty of the perturbation x' - x against the clean
// waveform's threshold map. If grad_x_prime is non-null it receives the
// gradient of the smooth surrogate.
inline PsyEval psy_loss_eval(const Waveform& x, const Waveform& x_prime,
                             const MaskingThresholdMap& thresh, const StftConfig& cfg,
                             std::vector<double>* grad_x_prime = nullptr) {
  psy_detail::check_compatible(x, x_prime, thresh, cfg);

  Waveform delta;
  delta.sample_rate = x.sample_rate;
  delta.samples.resize(x.samples.size());
  for (size_t i = 0; i < x.samples.size(); ++i) delta.samples[i] = x_prime.samples[i] - x.samples[i];

  const Mat<Cpx> spec = stft(delta, cfg);
  const int frames = spec.rows, bins = spec.cols;
  if (frames != thresh.theta.rows || bins != thresh.theta.cols) {
    throw ValidationError("psy_loss: threshold shape mismatch");
  }
  const double n2 = static_cast<double>(cfg.fft_size) * cfg.fft_size;

  PsyEval eval;
  Mat<Cpx> grad_spec;
  if (grad_x_prime != nullptr) grad_spec = Mat<Cpx>(frames, bins);
  const double scale = 1.0 / (static_cast<double>(frames) * bins);
  for (int m = 0; m < frames; ++m) {
    for (int k = 0; k < bins; ++k) {
      const double power = std::norm(spec.at(m, k));
      const double v = power / n2;
      const double p_db = 10.0 * std::log10(std::max(v, kPsdFloorPower)) + thresh.shift_db;
      const double t = p_db - thresh.theta.at(m, k);
      eval.exact += std::max(0.0, t) * scale;
      eval.smooth += softplus_sharp(t, kHingeSharpness) * scale;
      if (grad_x_prime != nullptr && v > kPsdFloorPower) {
        const double d_db = sigmoid(kHingeSharpness * t) * scale;  // dL/dp_db
        const double d_pow = d_db * 10.0 / (std::log(10.0) * power);
        grad_spec.at(m, k) = Cpx(d_pow * 2.0 * spec.at(m, k).real(),
                                 d_pow * 2.0 * spec.at(m, k).imag());
      }
    }
  }
  if (grad_x_prime != nullptr) {
    grad_x_prime->assign(x.samples.size(), 0.0);
    stft_adjoint(grad_spec, cfg, grad_x_prime);
  }
  return eval;
}

// Reported metric: the exact hinge.
inline double psy_loss(const Waveform& x, const Waveform& x_prime,
                       const MaskingThresholdMap& thresh, const StftConfig& cfg) {
  return psy_loss_eval(x, x_prime, thresh, cfg).exact;
}

}  // namespace voxshield

#endif  // VOXSHIELD_PSYCHOACOUSTIC_HPP_

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

#ifndef VOXSHIELD_LOSSES_HPP_
#define VOXSHIELD_LOSSES_HPP_

#include <optional>
#include <string>
#include <vector>

#include "voxshield/models.hpp"
#include "voxshield/psychoacoustic.hpp"

namespace voxshield {

struct LossWeights {
  double alpha = 500.0;
  double beta = 5e-3;
  double l2_coeff = 1.0;

  void validate() const {
    if (alpha < 0.0 || beta < 0.0 || l2_coeff < 0.0) {
      throw ValidationError("weights: alpha, beta and l2_coeff must be >= 0");
    }
  }
};

enum class TargetOrigin { kSlicedFromDictionary, kTranscriptOfTargetSpeaker };

struct TranscriptTarget {
  std::string text;
  TargetOrigin origin = TargetOrigin::kSlicedFromDictionary;

  void validate(const Alphabet& alphabet) const {
    if (text.empty()) throw ValidationError("transcript target: empty");
    if (!alphabet.valid_text(text)) throw ValidationError("transcript target: not alphabet-valid");
  }
};

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size()) {
    throw ValidationError("cosine_similarity: dimension mismatch");
  }
  return dot(a.values, b.values);
}

// Embeddings of a reference waveform under every feature map of the
// ensemble; computed once and reused across optimization iterations.
struct FeatureProfile {
  std::vector<EmbeddingVector> encoder_embeddings;
  EmbeddingVector mfcc_embedding;
};

inline FeatureProfile make_feature_profile(const Waveform& w,
                                           const std::vector<SpeakerEncoder>& encoders,
                                           const MfccExtractor& extractor) {
  FeatureProfile p;
  p.encoder_embeddings.reserve(encoders.size());
  for (const auto& enc : encoders) p.encoder_embeddings.push_back(enc.encode(w));
  p.mfcc_embedding = extractor.embed(w);
  return p;
}

namespace loss_detail {

// sign = +1 sums similarities to the reference (untargeted form); sign = -1
// negates them (targeted form). The gradient with respect to x_prime is
// accumulated into grad when non-null.
inline double feature_loss_core(const FeatureProfile& ref, const Waveform& x_prime,
                                const std::vector<SpeakerEncoder>& encoders,
                                const MfccExtractor& extractor, double sign,
                                std::vector<double>* grad) {
  if (encoders.empty()) throw ValidationError("feature loss: empty encoder list");
  if (ref.encoder_embeddings.size() != encoders.size()) {
    throw ValidationError("feature loss: profile does not match encoder list");
  }
  double value = 0.0;
  for (size_t i = 0; i < encoders.size(); ++i) {
    SpeakerEncoder::Tape tape;
    const EmbeddingVector e = encoders[i].encode(x_prime, &tape);
    value += sign * cosine_similarity(ref.encoder_embeddings[i], e);
    if (grad != nullptr) {
      std::vector<double> ge(ref.encoder_embeddings[i].values);
      for (double& v : ge) v *= sign;
      encoders[i].backward_to_waveform(tape, ge, grad);
    }
  }
  MfccExtractor::Tape mtape;
  const EmbeddingVector me = extractor.embed(x_prime, &mtape);
  value += sign * cosine_similarity(ref.mfcc_embedding, me);
  if (grad != nullptr) {
    std::vector<double> ge(ref.mfcc_embedding.values);
    for (double& v : ge) v *= sign;
    extractor.backward_to_waveform(mtape, ge, grad);
  }
  return value;
}

}  // namespace loss_detail

// Sum of ensemble similarities between the clean audio and the candidate;
// minimizing pushes x' away from x in every feature space.
inline double feature_loss_untargeted(const Waveform& x, const Waveform& x_prime,
                                      const std::vector<SpeakerEncoder>& encoders,
                                      const MfccExtractor& extractor = default_mfcc_extractor()) {
  const FeatureProfile ref = make_feature_profile(x, encoders, extractor);
  return loss_detail::feature_loss_core(ref, x_prime, encoders, extractor, 1.0, nullptr);
}

// Negated similarity sum against a chosen target speaker; minimizing pulls
// x' toward the target's features.
inline double feature_loss_targeted(const Waveform& x_t, const Waveform& x_prime,
                                    const std::vector<SpeakerEncoder>& encoders,
                                    const MfccExtractor& extractor = default_mfcc_extractor()) {
  const FeatureProfile ref = make_feature_profile(x_t, encoders, extractor);
  return loss_detail::feature_loss_core(ref, x_prime, encoders, extractor, -1.0, nullptr);
}

// CTC negative log-likelihood of the target text. Gradient with respect to
// x_prime is accumulated into grad when non-null.
inline double asr_targeted_loss(const CtcAsr& asr, const Waveform& x_prime,
                                const TranscriptTarget& y_t, std::vector<double>* grad = nullptr) {
  y_t.validate(asr.alphabet());
  const std::vector<int> labels = asr.alphabet().encode(y_t.text);
  CtcAsr::Tape tape;
  const Mat<double> lp = asr.log_probs(x_prime, &tape);
  Mat<double> glp;
  const double loss = ctc_loss(lp, labels, grad != nullptr ? &glp : nullptr);
  if (grad != nullptr) {
    grad->assign(x_prime.samples.size(), 0.0);
    asr.backward_to_waveform(tape, glp, grad);
  }
  return loss;
}

enum class ProtectionMode { kUntargeted, kTargeted };

inline std::string mode_name(ProtectionMode m) {
  return m == ProtectionMode::kUntargeted ? "untargeted" : "targeted";
}
inline ProtectionMode mode_from_name(const std::string& s) {
  if (s == "untargeted") return ProtectionMode::kUntargeted;
  if (s == "targeted") return ProtectionMode::kTargeted;
  throw ValidationError("unknown mode: " + s);
}

// Per-term values of one objective evaluation. Terms with zero weight (or a
// disabled ASR attack) are skipped and reported as zero.
struct LossBreakdown {
  double asr = 0.0;
  double fea = 0.0;
  double psy = 0.0;         // exact hinge, the reported metric
  double psy_smooth = 0.0;  // softplus surrogate feeding the gradient
  double l2 = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double l2_coeff = 1.0;

  double total() const { return asr + alpha * fea + beta * (psy + l2_coeff * l2); }
  double total_smooth() const { return asr + alpha * fea + beta * (psy_smooth + l2_coeff * l2); }
};

// The combined objective: L_asr + alpha * L_fea + beta * (L_psy + L_2).
// `reference` holds the cached embeddings of the clean audio (untargeted) or
// of the selected target speaker (targeted). Pass asr == nullptr to disable
// the ASR term. The returned gradient (when requested) is the gradient of
// total_smooth(), whose hinge term is the softplus surrogate.
inline LossBreakdown total_loss(const Waveform& x, const Waveform& x_prime, ProtectionMode mode,
                                const FeatureProfile& reference,
                                const std::vector<SpeakerEncoder>& encoders,
                                const MfccExtractor& extractor, const CtcAsr* asr,
                                const TranscriptTarget* y_t, const MaskingThresholdMap& thresh,
                                const StftConfig& psy_cfg, const LossWeights& weights,
                                std::vector<double>* grad = nullptr) {
  weights.validate();
  if (x.length() != x_prime.length() || x.sample_rate != x_prime.sample_rate) {
    throw ValidationError("total_loss: x and x' must share length and rate");
  }
  LossBreakdown out;
  out.alpha = weights.alpha;
  out.beta = weights.beta;
  out.l2_coeff = weights.l2_coeff;
  if (grad != nullptr) grad->assign(x.samples.size(), 0.0);

  const bool asr_on = asr != nullptr && y_t != nullptr;
  const bool fea_on = weights.alpha != 0.0;
  const double sign = mode == ProtectionMode::kUntargeted ? 1.0 : -1.0;

  // All default models share one STFT/mel frontend; when they do, run it
  // once and push every model's feature gradient through a single adjoint.
  const FeaturePipeline* base = nullptr;
  bool share = true;
  if (fea_on) {
    if (encoders.empty()) throw ValidationError("feature loss: empty encoder list");
    if (reference.encoder_embeddings.size() != encoders.size()) {
      throw ValidationError("feature loss: profile does not match encoder list");
    }
    for (const auto& enc : encoders) {
      if (base == nullptr) base = &enc.pipeline();
      share = share && base->shares_frontend(enc.pipeline());
    }
    share = share && base->shares_frontend(extractor.pipeline());
  }
  if (asr_on) {
    if (base == nullptr) base = &asr->pipeline();
    share = share && base->shares_frontend(asr->pipeline());
  }

  if (base != nullptr && share) {
    SpectralTape tape;
    const Mat<double> logmel = base->forward_logmel(x_prime, &tape);
    Mat<double> grad_logmel(logmel.rows, logmel.cols, 0.0);

    if (asr_on) {
      y_t->validate(asr->alphabet());
      const std::vector<int> labels = asr->alphabet().encode(y_t->text);
      CtcAsr::Tape at;
      const Mat<double> lp = asr->log_probs_from_features(asr->pipeline().project(logmel), &at);
      Mat<double> glp;
      out.asr = ctc_loss(lp, labels, grad != nullptr ? &glp : nullptr);
      if (grad != nullptr) {
        const Mat<double> gfeat = asr->backward_features(at, glp, false);
        asr->pipeline().project_backward(gfeat, &grad_logmel);
      }
    }
    if (fea_on) {
      for (size_t i = 0; i < encoders.size(); ++i) {
        SpeakerEncoder::Tape et;
        const std::vector<double> e =
            encoders[i].embed_features(encoders[i].pipeline().project(logmel), &et);
        out.fea += sign * dot(reference.encoder_embeddings[i].values, e);
        if (grad != nullptr) {
          std::vector<double> ge(reference.encoder_embeddings[i].values);
          for (double& v : ge) v *= weights.alpha * sign;
          const Mat<double> gfeat = encoders[i].backward_features(et, ge, false);
          encoders[i].pipeline().project_backward(gfeat, &grad_logmel);
        }
      }
      {
        MfccExtractor::Tape mt;
        Mat<double> feat = extractor.pipeline().project(logmel);
        mt.frames = feat.rows;
        const std::vector<double> pooled = nn::mean_pool(feat);
        std::vector<double> me = nn::l2_normalize(pooled, &mt.norm);
        out.fea += sign * dot(reference.mfcc_embedding.values, me);
        if (grad != nullptr) {
          std::vector<double> ge(reference.mfcc_embedding.values);
          for (double& v : ge) v *= weights.alpha * sign;
          const std::vector<double> gp = nn::l2_normalize_backward(me, mt.norm, ge);
          const Mat<double> gfeat = nn::mean_pool_backward(mt.frames, gp);
          extractor.pipeline().project_backward(gfeat, &grad_logmel);
        }
      }
    }
    if (grad != nullptr) base->backward_from_logmel(tape, grad_logmel, grad);
  } else {
    if (asr_on) {
      std::vector<double> g_asr;
      out.asr = asr_targeted_loss(*asr, x_prime, *y_t, grad != nullptr ? &g_asr : nullptr);
      if (grad != nullptr) {
        for (size_t i = 0; i < grad->size(); ++i) (*grad)[i] += g_asr[i];
      }
    }
    if (fea_on) {
      std::vector<double> g_fea;
      if (grad != nullptr) g_fea.assign(x.samples.size(), 0.0);
      out.fea = loss_detail::feature_loss_core(reference, x_prime, encoders, extractor, sign,
                                               grad != nullptr ? &g_fea : nullptr);
      if (grad != nullptr) {
        for (size_t i = 0; i < grad->size(); ++i) (*grad)[i] += weights.alpha * g_fea[i];
      }
    }
  }

  if (weights.beta != 0.0) {
    std::vector<double> g_psy;
    const PsyEval psy = psy_loss_eval(x, x_prime, thresh, psy_cfg, grad != nullptr ? &g_psy : nullptr);
    out.psy = psy.exact;
    out.psy_smooth = psy.smooth;

    double l2sq = 0.0;
    for (size_t i = 0; i < x.samples.size(); ++i) {
      const double d = x_prime.samples[i] - x.samples[i];
      l2sq += d * d;
    }
    out.l2 = std::sqrt(l2sq);
    if (grad != nullptr) {
      const double inv = out.l2 > 1e-15 ? 1.0 / out.l2 : 0.0;
      for (size_t i = 0; i < grad->size(); ++i) {
        const double d = x_prime.samples[i] - x.samples[i];
        (*grad)[i] += weights.beta * (g_psy[i] + weights.l2_coeff * d * inv);
      }
    }
  }
  return out;
}

}  // namespace voxshield

#endif  // VOXSHIELD_LOSSES_HPP_

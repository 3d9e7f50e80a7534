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

#ifndef VOXSHIELD_MODELS_HPP_
#define VOXSHIELD_MODELS_HPP_

#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "voxshield/ctc.hpp"
#include "voxshield/dsp.hpp"
#include "voxshield/nn.hpp"
#include "voxshield/wer.hpp"

namespace voxshield {

// Frontend shared by all models: 25 ms frames, 10 ms hop at 16 kHz.
inline StftConfig model_frontend_cfg() {
  StftConfig cfg;
  cfg.frame_length = 400;
  cfg.hop_length = 160;
  cfg.fft_size = 512;
  return cfg;
}

constexpr int kModelMelBands = 40;
constexpr int kModelMfccCoeffs = 13;
constexpr int kEmbeddingDim = 64;

struct EmbeddingVector {
  std::vector<double> values;
  std::string source_id;

  void validate() const {
    const double n = l2_norm(values);
    if (!(std::abs(n - 1.0) <= 1e-6)) throw ValidationError("embedding: not unit norm");
    for (double v : values) {
      if (!std::isfinite(v)) throw ValidationError("embedding: non-finite entry");
    }
  }
};

enum class EncoderArch { kConvPool, kRecurrentPool };

inline std::string arch_name(EncoderArch a) {
  return a == EncoderArch::kConvPool ? "conv_pool" : "recurrent_pool";
}
inline EncoderArch arch_from_name(const std::string& s) {
  if (s == "conv_pool") return EncoderArch::kConvPool;
  if (s == "recurrent_pool") return EncoderArch::kRecurrentPool;
  throw ValidationError("unknown encoder architecture: " + s);
}

inline std::string frontend_name(FeatureKind k) {
  return k == FeatureKind::kLogMel ? "log_mel" : "mfcc";
}
inline FeatureKind frontend_from_name(const std::string& s) {
  if (s == "log_mel") return FeatureKind::kLogMel;
  if (s == "mfcc") return FeatureKind::kMfcc;
  throw ValidationError("unknown frontend: " + s);
}

struct EncoderSpec {
  std::string id;
  EncoderArch arch = EncoderArch::kConvPool;
  FeatureKind frontend = FeatureKind::kLogMel;
  int width1 = 24;     // first conv channels
  int width2 = 24;     // second conv channels (conv_pool) or rnn hidden
  int embed_dim = kEmbeddingDim;
};

// Small trainable speaker encoder. Two architectures share the same skeleton:
//   conv_pool:      feat -> conv(k5,s1) -> tanh -> conv(k5,s1) -> tanh
//   recurrent_pool: feat -> conv(k5,s2) -> tanh -> rnn(tanh)
// then mean pooling over frames, linear projection, l2 normalization.
class SpeakerEncoder {
 public:
  struct Tape {
    SpectralTape frontend;
    Mat<double> feat;
    Mat<double> a1;  // conv1 output, post-tanh
    Mat<double> a2;  // conv2 output or rnn states
    std::vector<double> pooled;
    std::vector<double> embedding;
    double norm = 1.0;
  };

  SpeakerEncoder(EncoderSpec spec, int sample_rate = kCanonicalSampleRate)
      : spec_(std::move(spec)),
        pipeline_(spec_.frontend, model_frontend_cfg(), kModelMelBands, kModelMfccCoeffs, sample_rate) {}

  void init_params(uint64_t seed) {
    Rng rng(seed ^ fnv1a64(spec_.id));
    conv1_.init(pipeline_.dim(), spec_.width1, 5, spec_.arch == EncoderArch::kConvPool ? 1 : 2, rng);
    if (spec_.arch == EncoderArch::kConvPool) {
      conv2_.init(spec_.width1, spec_.width2, 5, 1, rng);
    } else {
      rnn_.init(spec_.width1, spec_.width2, rng);
    }
    proj_.init(spec_.width2, spec_.embed_dim, rng);
    seed_ = seed;
  }

  const EncoderSpec& spec() const { return spec_; }
  const FeaturePipeline& pipeline() const { return pipeline_; }
  int min_samples() const { return pipeline_.cfg().frame_length; }

  std::vector<double> embed_features(const Mat<double>& feat, Tape* tape) const {
    Tape local;
    Tape& t = tape != nullptr ? *tape : local;
    t.feat = feat;
    t.a1 = nn::tanh_forward(conv1_.forward(feat));
    if (spec_.arch == EncoderArch::kConvPool) {
      t.a2 = nn::tanh_forward(conv2_.forward(t.a1));
    } else {
      t.a2 = rnn_.forward(t.a1);
    }
    t.pooled = nn::mean_pool(t.a2);
    Mat<double> pr(1, spec_.width2);
    for (int i = 0; i < spec_.width2; ++i) pr.at(0, i) = t.pooled[i];
    const Mat<double> proj = proj_.forward(pr);
    std::vector<double> v(proj.row(0), proj.row(0) + spec_.embed_dim);
    t.embedding = nn::l2_normalize(v, &t.norm);
    return t.embedding;
  }

  // dL/d(features); parameter gradients accumulate when train is set.
  Mat<double> backward_features(const Tape& t, const std::vector<double>& grad_embedding, bool train) const {
    const std::vector<double> gv = nn::l2_normalize_backward(t.embedding, t.norm, grad_embedding);
    Mat<double> gvm(1, spec_.embed_dim);
    for (int i = 0; i < spec_.embed_dim; ++i) gvm.at(0, i) = gv[i];
    Mat<double> pr(1, spec_.width2);
    for (int i = 0; i < spec_.width2; ++i) pr.at(0, i) = t.pooled[i];
    const Mat<double> gpooled_m = proj_.backward(pr, gvm, train);
    std::vector<double> gpooled(gpooled_m.row(0), gpooled_m.row(0) + spec_.width2);
    const Mat<double> ga2 = nn::mean_pool_backward(t.a2.rows, gpooled);
    Mat<double> ga1;
    if (spec_.arch == EncoderArch::kConvPool) {
      const Mat<double> gpre2 = nn::tanh_backward(t.a2, ga2);
      ga1 = conv2_.backward(t.a1, gpre2, train);
    } else {
      ga1 = rnn_.backward(t.a1, t.a2, ga2, train);
    }
    const Mat<double> gpre1 = nn::tanh_backward(t.a1, ga1);
    return conv1_.backward(t.feat, gpre1, train);
  }

  EmbeddingVector encode(const Waveform& w, Tape* tape = nullptr) const {
    Tape local;
    Tape& t = tape != nullptr ? *tape : local;
    const Mat<double> feat = pipeline_.forward(w, &t.frontend);
    EmbeddingVector e;
    e.values = embed_features(feat, &t);
    e.source_id = spec_.id;
    e.validate();
    return e;
  }

  // Gradient of a scalar loss with respect to the waveform samples, given
  // dL/d(embedding). Requires a tape from encode().
  void backward_to_waveform(const Tape& t, const std::vector<double>& grad_embedding,
                            std::vector<double>* grad_samples) const {
    const Mat<double> gfeat = backward_features(t, grad_embedding, false);
    pipeline_.backward(t.frontend, gfeat, grad_samples);
  }

  std::vector<nn::ParamBlock*> blocks() {
    std::vector<nn::ParamBlock*> out;
    for (auto* b : conv1_.blocks()) out.push_back(b);
    if (spec_.arch == EncoderArch::kConvPool) {
      for (auto* b : conv2_.blocks()) out.push_back(b);
    } else {
      for (auto* b : rnn_.blocks()) out.push_back(b);
    }
    for (auto* b : proj_.blocks()) out.push_back(b);
    return out;
  }

  std::vector<const nn::ParamBlock*> blocks() const {
    auto* self = const_cast<SpeakerEncoder*>(this);
    std::vector<const nn::ParamBlock*> out;
    for (auto* b : self->blocks()) out.push_back(b);
    return out;
  }

  size_t param_count() const {
    size_t n = 0;
    for (const auto* b : blocks()) n += b->w.size();
    return n;
  }

  uint64_t params_hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto* b : blocks()) h = fnv1a64(b->w.data(), b->w.size() * sizeof(double), h);
    return h;
  }

  uint64_t seed() const { return seed_; }
  void set_seed(uint64_t s) { seed_ = s; }

 private:
  EncoderSpec spec_;
  FeaturePipeline pipeline_;
  nn::Conv1d conv1_;
  nn::Conv1d conv2_;
  nn::Rnn rnn_;
  nn::Linear proj_;
  uint64_t seed_ = 0;
};

// Parameter-free acoustic feature map: MFCC matrix mean-pooled over frames,
// then l2-normalized.
class MfccExtractor {
 public:
  struct Tape {
    SpectralTape frontend;
    int frames = 0;
    std::vector<double> embedding;
    double norm = 1.0;
  };

  explicit MfccExtractor(int sample_rate = kCanonicalSampleRate)
      : pipeline_(FeatureKind::kMfcc, model_frontend_cfg(), kModelMelBands, kModelMfccCoeffs, sample_rate) {}

  EmbeddingVector embed(const Waveform& w, Tape* tape = nullptr) const {
    Tape local;
    Tape& t = tape != nullptr ? *tape : local;
    const Mat<double> feat = pipeline_.forward(w, &t.frontend);
    t.frames = feat.rows;
    const std::vector<double> pooled = nn::mean_pool(feat);
    EmbeddingVector e;
    e.values = nn::l2_normalize(pooled, &t.norm);
    e.source_id = "mfcc";
    t.embedding = e.values;
    e.validate();
    return e;
  }

  void backward_to_waveform(const Tape& t, const std::vector<double>& grad_embedding,
                            std::vector<double>* grad_samples) const {
    const std::vector<double> gp = nn::l2_normalize_backward(t.embedding, t.norm, grad_embedding);
    const Mat<double> gfeat = nn::mean_pool_backward(t.frames, gp);
    pipeline_.backward(t.frontend, gfeat, grad_samples);
  }

  int min_samples() const { return pipeline_.cfg().frame_length; }
  const FeaturePipeline& pipeline() const { return pipeline_; }

 private:
  FeaturePipeline pipeline_;
};

inline const MfccExtractor& default_mfcc_extractor() {
  static const MfccExtractor instance;
  return instance;
}

inline EmbeddingVector mfcc_embed(const Waveform& w) { return default_mfcc_extractor().embed(w); }

// Character-level CTC recognizer:
//   log-mel -> conv(k5,s2) -> tanh -> conv(k3,s1) -> tanh -> conv(k3,s1)
//   -> tanh -> linear -> log-softmax.
class CtcAsr {
 public:
  struct Tape {
    SpectralTape frontend;
    Mat<double> feat;
    Mat<double> a1, a2, a3;
    Mat<double> log_probs;
  };

  explicit CtcAsr(int sample_rate = kCanonicalSampleRate, int width = 48)
      : width_(width),
        pipeline_(FeatureKind::kLogMel, model_frontend_cfg(), kModelMelBands, kModelMfccCoeffs, sample_rate) {}

  void init_params(uint64_t seed) {
    Rng rng(seed ^ fnv1a64(std::string("ctc_asr")));
    conv1_.init(pipeline_.dim(), width_, 5, 2, rng);
    conv2_.init(width_, width_, 3, 1, rng);
    conv3_.init(width_, width_, 3, 1, rng);
    out_.init(width_, alphabet_.size(), rng);
    seed_ = seed;
  }

  const Alphabet& alphabet() const { return alphabet_; }
  const FeaturePipeline& pipeline() const { return pipeline_; }
  int width() const { return width_; }
  int min_samples() const { return pipeline_.cfg().frame_length; }

  // Output frames for a waveform of the given sample count.
  int frame_count(int64_t num_samples) const {
    const int f = pipeline_.cfg().num_frames(num_samples);
    return conv1_.out_len(f);
  }

  Mat<double> log_probs_from_features(const Mat<double>& feat, Tape* tape) const {
    Tape local;
    Tape& t = tape != nullptr ? *tape : local;
    t.feat = feat;
    t.a1 = nn::tanh_forward(conv1_.forward(feat));
    t.a2 = nn::tanh_forward(conv2_.forward(t.a1));
    t.a3 = nn::tanh_forward(conv3_.forward(t.a2));
    t.log_probs = nn::log_softmax_rows(out_.forward(t.a3));
    return t.log_probs;
  }

  Mat<double> log_probs(const Waveform& w, Tape* tape = nullptr) const {
    Tape local;
    Tape& t = tape != nullptr ? *tape : local;
    const Mat<double> feat = pipeline_.forward(w, &t.frontend);
    return log_probs_from_features(feat, &t);
  }

  Mat<double> backward_features(const Tape& t, const Mat<double>& grad_log_probs, bool train) const {
    const Mat<double> glogits = nn::log_softmax_backward(t.log_probs, grad_log_probs);
    const Mat<double> ga3 = out_.backward(t.a3, glogits, train);
    const Mat<double> gpre3 = nn::tanh_backward(t.a3, ga3);
    const Mat<double> ga2 = conv3_.backward(t.a2, gpre3, train);
    const Mat<double> gpre2 = nn::tanh_backward(t.a2, ga2);
    const Mat<double> ga1 = conv2_.backward(t.a1, gpre2, train);
    const Mat<double> gpre1 = nn::tanh_backward(t.a1, ga1);
    return conv1_.backward(t.feat, gpre1, train);
  }

  void backward_to_waveform(const Tape& t, const Mat<double>& grad_log_probs,
                            std::vector<double>* grad_samples) const {
    const Mat<double> gfeat = backward_features(t, grad_log_probs, false);
    pipeline_.backward(t.frontend, gfeat, grad_samples);
  }

  std::string greedy_decode(const Waveform& w) const {
    return ctc_greedy_decode(log_probs(w), alphabet_);
  }

  std::vector<nn::ParamBlock*> blocks() {
    std::vector<nn::ParamBlock*> out;
    for (auto* b : conv1_.blocks()) out.push_back(b);
    for (auto* b : conv2_.blocks()) out.push_back(b);
    for (auto* b : conv3_.blocks()) out.push_back(b);
    for (auto* b : out_.blocks()) out.push_back(b);
    return out;
  }

  std::vector<const nn::ParamBlock*> blocks() const {
    auto* self = const_cast<CtcAsr*>(this);
    std::vector<const nn::ParamBlock*> out;
    for (auto* b : self->blocks()) out.push_back(b);
    return out;
  }

  size_t param_count() const {
    size_t n = 0;
    for (const auto* b : blocks()) n += b->w.size();
    return n;
  }

  uint64_t params_hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto* b : blocks()) h = fnv1a64(b->w.data(), b->w.size() * sizeof(double), h);
    return h;
  }

  uint64_t seed() const { return seed_; }
  void set_seed(uint64_t s) { seed_ = s; }

 private:
  int width_;
  Alphabet alphabet_;
  FeaturePipeline pipeline_;
  nn::Conv1d conv1_, conv2_, conv3_;
  nn::Linear out_;
  uint64_t seed_ = 0;
};

inline Mat<double> asr_log_probs(const CtcAsr& asr, const Waveform& w) { return asr.log_probs(w); }
inline std::string greedy_decode(const CtcAsr& asr, const Waveform& w) { return asr.greedy_decode(w); }

// ---------------------------------------------------------------------------
// Fixtures corpus
// ---------------------------------------------------------------------------

struct FixtureRecord {
  std::string path;
  std::string transcript;
  std::string speaker_id;
  Waveform audio;
};

struct FixturesCorpus {
  std::vector<FixtureRecord> records;
  std::string manifest_path;

  std::vector<std::string> speakers() const {
    std::set<std::string> s;
    for (const auto& r : records) s.insert(r.speaker_id);
    return {s.begin(), s.end()};
  }

  void validate() const {
    Alphabet alphabet;
    if (records.size() < 40) throw ValidationError("corpus: needs at least 40 utterances");
    if (speakers().size() < 4) throw ValidationError("corpus: needs at least 4 speakers");
    for (const auto& r : records) {
      if (r.transcript.empty() || !alphabet.valid_text(r.transcript)) {
        throw ValidationError("corpus: transcript not alphabet-valid: '" + r.transcript + "'");
      }
      if (r.audio.sample_rate != kCanonicalSampleRate) {
        throw ValidationError("corpus: audio must be at 16 kHz: " + r.path);
      }
      if (r.audio.duration_s() < 0.5) {
        throw ValidationError("corpus: utterance shorter than 0.5 s: " + r.path);
      }
    }
  }
};

namespace corpus_detail {

inline std::string dirname_of(const std::string& path) {
  const size_t pos = path.find_last_of('/');
  return pos == std::string::npos ? std::string(".") : path.substr(0, pos);
}

}  // namespace corpus_detail

// Manifest: CSV with header "path,transcript,speaker_id"; paths are relative
// to the manifest's directory. Transcripts are alphabet-restricted, so the
// first and last comma delimit the three fields.
inline FixturesCorpus load_corpus(const std::string& manifest_path, bool strict = true,
                                  bool allow_empty = false) {
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError("corpus: cannot open manifest " + manifest_path);
  const std::string base = corpus_detail::dirname_of(manifest_path);
  FixturesCorpus corpus;
  corpus.manifest_path = manifest_path;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line == "path,transcript,speaker_id") continue;
    }
    const size_t a = line.find(',');
    const size_t b = line.rfind(',');
    if (a == std::string::npos || b == a) {
      throw ValidationError("corpus: malformed manifest row: " + line);
    }
    FixtureRecord rec;
    rec.path = line.substr(0, a);
    rec.transcript = line.substr(a + 1, b - a - 1);
    rec.speaker_id = line.substr(b + 1);
    const std::string full = rec.path.front() == '/' ? rec.path : base + "/" + rec.path;
    rec.audio = load_wav_canonical(full);
    corpus.records.push_back(std::move(rec));
  }
  if (corpus.records.empty() && !allow_empty) {
    throw ValidationError("corpus: empty manifest " + manifest_path);
  }
  if (strict) corpus.validate();
  return corpus;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EncoderTrainMetrics {
  double final_loss = 0.0;
  double train_accuracy = 0.0;
  int epochs = 0;
};

struct AsrTrainMetrics {
  double final_loss = 0.0;
  double train_wer_percent = 0.0;
  int epochs = 0;
};

struct TrainOptions {
  int encoder_epochs = 60;
  double encoder_lr = 2e-3;
  int asr_epochs = 260;
  double asr_lr = 2e-3;
};

// Speaker-classification training: cross entropy on a linear head over the
// embedding; the head is discarded afterwards. Deterministic given the seed.
inline SpeakerEncoder train_speaker_encoder(const FixturesCorpus& corpus, const EncoderSpec& spec,
                                            uint64_t seed, EncoderTrainMetrics* metrics = nullptr,
                                            const TrainOptions& opts = TrainOptions()) {
  corpus.validate();
  SpeakerEncoder enc(spec);
  enc.init_params(seed);

  const std::vector<std::string> speakers = corpus.speakers();
  std::map<std::string, int> speaker_index;
  for (size_t i = 0; i < speakers.size(); ++i) speaker_index[speakers[i]] = static_cast<int>(i);

  std::vector<Mat<double>> feats;
  std::vector<int> labels;
  feats.reserve(corpus.records.size());
  for (const auto& r : corpus.records) {
    feats.push_back(enc.pipeline().forward(r.audio));
    labels.push_back(speaker_index.at(r.speaker_id));
  }

  nn::Linear head;
  Rng head_rng(seed ^ 0x68656164ull);
  head.init(spec.embed_dim, static_cast<int>(speakers.size()), head_rng);

  std::vector<nn::ParamBlock*> blocks = enc.blocks();
  for (auto* b : head.blocks()) blocks.push_back(b);
  nn::Adam adam;
  adam.lr = opts.encoder_lr;
  adam.attach(blocks);

  double last_epoch_loss = 0.0;
  for (int epoch = 0; epoch < opts.encoder_epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (size_t i = 0; i < feats.size(); ++i) {
      SpeakerEncoder::Tape tape;
      const std::vector<double> e = enc.embed_features(feats[i], &tape);
      Mat<double> em(1, spec.embed_dim);
      for (int d = 0; d < spec.embed_dim; ++d) em.at(0, d) = e[d];
      const Mat<double> logits = head.forward(em);
      std::vector<double> lv(logits.row(0), logits.row(0) + logits.cols);
      std::vector<double> glogits;
      epoch_loss += nn::softmax_cross_entropy(lv, labels[i], &glogits);
      Mat<double> gl(1, logits.cols);
      for (int d = 0; d < logits.cols; ++d) gl.at(0, d) = glogits[d];
      const Mat<double> ge = head.backward(em, gl, true);
      std::vector<double> gev(ge.row(0), ge.row(0) + spec.embed_dim);
      enc.backward_features(tape, gev, true);
      adam.step(blocks);
    }
    last_epoch_loss = epoch_loss / feats.size();
  }

  int correct = 0;
  for (size_t i = 0; i < feats.size(); ++i) {
    const std::vector<double> e = enc.embed_features(feats[i], nullptr);
    Mat<double> em(1, spec.embed_dim);
    for (int d = 0; d < spec.embed_dim; ++d) em.at(0, d) = e[d];
    const Mat<double> logits = head.forward(em);
    int best = 0;
    for (int k = 1; k < logits.cols; ++k) {
      if (logits.at(0, k) > logits.at(0, best)) best = k;
    }
    if (best == labels[i]) ++correct;
  }
  if (metrics != nullptr) {
    metrics->final_loss = last_epoch_loss;
    metrics->train_accuracy = static_cast<double>(correct) / feats.size();
    metrics->epochs = opts.encoder_epochs;
  }
  return enc;
}

// CTC training over the fixtures corpus; reports final greedy-decode WER on
// the train split. Deterministic given the seed.
inline CtcAsr train_asr(const FixturesCorpus& corpus, uint64_t seed,
                        AsrTrainMetrics* metrics = nullptr,
                        const TrainOptions& opts = TrainOptions()) {
  corpus.validate();
  CtcAsr asr;
  asr.init_params(seed);

  std::vector<Mat<double>> feats;
  std::vector<std::vector<int>> labels;
  for (const auto& r : corpus.records) {
    feats.push_back(asr.pipeline().forward(r.audio));
    labels.push_back(asr.alphabet().encode(r.transcript));
    if (asr.frame_count(r.audio.length()) < ctc_min_frames(labels.back())) {
      throw ValidationError("corpus: transcript too long for audio: " + r.path);
    }
  }

  std::vector<nn::ParamBlock*> blocks = asr.blocks();
  nn::Adam adam;
  adam.lr = opts.asr_lr;
  adam.attach(blocks);

  double last_epoch_loss = 0.0;
  for (int epoch = 0; epoch < opts.asr_epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (size_t i = 0; i < feats.size(); ++i) {
      CtcAsr::Tape tape;
      const Mat<double> lp = asr.log_probs_from_features(feats[i], &tape);
      Mat<double> glp;
      epoch_loss += ctc_loss(lp, labels[i], &glp);
      asr.backward_features(tape, glp, true);
      adam.step(blocks);
    }
    last_epoch_loss = epoch_loss / feats.size();
  }

  if (metrics != nullptr) {
    double wer_sum = 0.0;
    for (const auto& r : corpus.records) {
      wer_sum += wer(r.transcript, asr.greedy_decode(r.audio));
    }
    metrics->final_loss = last_epoch_loss;
    metrics->train_wer_percent = wer_sum / corpus.records.size();
    metrics->epochs = opts.asr_epochs;
  }
  return asr;
}

// ---------------------------------------------------------------------------
// Checkpoints: raw little-endian doubles plus a JSON sidecar.
// ---------------------------------------------------------------------------

namespace ckpt_detail {

inline void write_params(const std::string& path, const std::vector<const nn::ParamBlock*>& blocks) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("checkpoint: cannot write " + path);
  for (const auto* b : blocks) {
    out.write(reinterpret_cast<const char*>(b->w.data()),
              static_cast<std::streamsize>(b->w.size() * sizeof(double)));
  }
}

inline void read_params(const std::string& path, const std::vector<nn::ParamBlock*>& blocks) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("checkpoint: cannot open " + path);
  for (auto* b : blocks) {
    in.read(reinterpret_cast<char*>(b->w.data()),
            static_cast<std::streamsize>(b->w.size() * sizeof(double)));
    if (!in) throw ValidationError("checkpoint: truncated parameter file " + path);
  }
}

}  // namespace ckpt_detail

inline void save_checkpoint(const SpeakerEncoder& enc, const std::string& dir, const std::string& name,
                            const EncoderTrainMetrics* metrics = nullptr) {
  ckpt_detail::write_params(dir + "/" + name + ".bin", enc.blocks());
  nlohmann::json j;
  j["kind"] = "speaker_encoder";
  j["id"] = enc.spec().id;
  j["architecture"] = arch_name(enc.spec().arch);
  j["frontend"] = frontend_name(enc.spec().frontend);
  j["width1"] = enc.spec().width1;
  j["width2"] = enc.spec().width2;
  j["embed_dim"] = enc.spec().embed_dim;
  j["sample_rate"] = enc.pipeline().sample_rate();
  j["param_count"] = enc.param_count();
  j["param_hash"] = to_hex(enc.params_hash());
  j["seed"] = enc.seed();
  if (metrics != nullptr) {
    j["metrics"] = {{"final_loss", metrics->final_loss},
                    {"train_accuracy", metrics->train_accuracy},
                    {"epochs", metrics->epochs}};
  }
  std::ofstream out(dir + "/" + name + ".json", std::ios::trunc);
  if (!out) throw RuntimeFailure("checkpoint: cannot write sidecar for " + name);
  out << j.dump(2) << "\n";
}

inline SpeakerEncoder load_encoder_checkpoint(const std::string& dir, const std::string& name) {
  std::ifstream in(dir + "/" + name + ".json");
  if (!in) throw ValidationError("checkpoint: cannot open sidecar " + dir + "/" + name + ".json");
  nlohmann::json j;
  in >> j;
  if (j.at("kind") != "speaker_encoder") throw ValidationError("checkpoint: not a speaker encoder: " + name);
  EncoderSpec spec;
  spec.id = j.at("id");
  spec.arch = arch_from_name(j.at("architecture"));
  spec.frontend = frontend_from_name(j.at("frontend"));
  spec.width1 = j.at("width1");
  spec.width2 = j.at("width2");
  spec.embed_dim = j.at("embed_dim");
  SpeakerEncoder enc(spec, j.at("sample_rate"));
  enc.init_params(0);
  enc.set_seed(j.at("seed"));
  ckpt_detail::read_params(dir + "/" + name + ".bin", enc.blocks());
  if (to_hex(enc.params_hash()) != j.at("param_hash")) {
    throw ValidationError("checkpoint: parameter hash mismatch for " + name);
  }
  return enc;
}

inline void save_checkpoint(const CtcAsr& asr, const std::string& dir, const std::string& name,
                            const AsrTrainMetrics* metrics = nullptr) {
  ckpt_detail::write_params(dir + "/" + name + ".bin", asr.blocks());
  nlohmann::json j;
  j["kind"] = "ctc_asr";
  j["width"] = asr.width();
  j["sample_rate"] = asr.pipeline().sample_rate();
  j["alphabet"] = "abcdefghijklmnopqrstuvwxyz '";
  j["param_count"] = asr.param_count();
  j["param_hash"] = to_hex(asr.params_hash());
  j["seed"] = asr.seed();
  if (metrics != nullptr) {
    j["metrics"] = {{"final_loss", metrics->final_loss},
                    {"train_wer_percent", metrics->train_wer_percent},
                    {"epochs", metrics->epochs}};
  }
  std::ofstream out(dir + "/" + name + ".json", std::ios::trunc);
  if (!out) throw RuntimeFailure("checkpoint: cannot write sidecar for " + name);
  out << j.dump(2) << "\n";
}

inline CtcAsr load_asr_checkpoint(const std::string& dir, const std::string& name) {
  std::ifstream in(dir + "/" + name + ".json");
  if (!in) throw ValidationError("checkpoint: cannot open sidecar " + dir + "/" + name + ".json");
  nlohmann::json j;
  in >> j;
  if (j.at("kind") != "ctc_asr") throw ValidationError("checkpoint: not a CTC ASR: " + name);
  CtcAsr asr(j.at("sample_rate"), j.at("width"));
  asr.init_params(0);
  asr.set_seed(j.at("seed"));
  ckpt_detail::read_params(dir + "/" + name + ".bin", asr.blocks());
  if (to_hex(asr.params_hash()) != j.at("param_hash")) {
    throw ValidationError("checkpoint: parameter hash mismatch for " + name);
  }
  return asr;
}

// The default heterogeneous ensemble: three trained encoders with mixed
// frontends and architectures. The verifier used for SIM scoring is a fourth
// combination that never enters the protection objective.
inline std::vector<EncoderSpec> default_ensemble_specs() {
  EncoderSpec e1{"enc1_logmel_conv", EncoderArch::kConvPool, FeatureKind::kLogMel, 24, 24, kEmbeddingDim};
  EncoderSpec e2{"enc2_mfcc_rnn", EncoderArch::kRecurrentPool, FeatureKind::kMfcc, 24, 32, kEmbeddingDim};
  EncoderSpec e3{"enc3_mfcc_conv", EncoderArch::kConvPool, FeatureKind::kMfcc, 20, 24, kEmbeddingDim};
  return {e1, e2, e3};
}

inline EncoderSpec verifier_spec() {
  return {"verifier_logmel_rnn", EncoderArch::kRecurrentPool, FeatureKind::kLogMel, 24, 32, kEmbeddingDim};
}

}  // namespace voxshield

#endif  // VOXSHIELD_MODELS_HPP_

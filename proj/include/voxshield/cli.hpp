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

#ifndef VOXSHIELD_CLI_HPP_
#define VOXSHIELD_CLI_HPP_

#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include "voxshield/evaluate.hpp"
#include "voxshield/fixtures.hpp"
#include "voxshield/protect.hpp"
#include "voxshield/viz.hpp"

namespace voxshield {

// Everything a command run needs; flags and config-file keys map onto this
// one struct.
struct RunConfig {
  std::string corpus_manifest;      // training corpus
  std::string protect_manifest;     // utterances to protect / evaluate
  std::string speaker_db_manifest;  // defaults to corpus_manifest
  std::string checkpoint_dir = "checkpoints";
  std::string output_dir = "out";
  std::string protected_dir;  // defaults to output_dir

  ProtectionConfig protection;
  std::vector<std::string> kinds;  // battery selection; empty means all
  AugmentParams augment_params;
  TrainOptions train;
  uint64_t seed = 1;
  int jobs = 1;
  bool emit_plots = false;

  std::string db_manifest_or_default() const {
    return speaker_db_manifest.empty() ? corpus_manifest : speaker_db_manifest;
  }
  std::string protected_dir_or_default() const {
    return protected_dir.empty() ? output_dir : protected_dir;
  }
};

namespace cli_detail {

inline std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

inline void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc | std::ios::binary);
    if (!f) throw RuntimeFailure("cannot write " + tmp);
    f << text;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw RuntimeFailure("cannot rename " + tmp);
}

struct EnsembleStack {
  std::vector<SpeakerEncoder> encoders;
  MfccExtractor extractor;
};

inline EnsembleStack load_ensemble(const std::string& dir) {
  EnsembleStack stack;
  for (const EncoderSpec& spec : default_ensemble_specs()) {
    stack.encoders.push_back(load_encoder_checkpoint(dir, spec.id));
  }
  return stack;
}

// Runs fn(i) for i in [0, n) on `jobs` threads; rethrows the first failure.
template <typename Fn>
void parallel_for(int64_t n, int jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int64_t> next{0};
  std::mutex err_mutex;
  std::string first_error;
  bool validation = false;
  auto worker = [&] {
    while (true) {
      const int64_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (first_error.empty()) {
          first_error = e.what();
          validation = dynamic_cast<const ValidationError*>(&e) != nullptr;
        }
      }
    }
  };
  std::vector<std::thread> pool;
  const int count = std::min<int64_t>(jobs, n);
  pool.reserve(count);
  for (int t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (!first_error.empty()) {
    if (validation) throw ValidationError(first_error);
    throw RuntimeFailure(first_error);
  }
}

}  // namespace cli_detail

// Trains the three ensemble encoders, the held-out verifier, and the CTC ASR;
// writes k + 2 checkpoints with JSON sidecars.
inline void cmd_train(const RunConfig& config, std::ostream& log = std::cout) {
  const FixturesCorpus corpus = load_corpus(config.corpus_manifest);
  std::filesystem::create_directories(config.checkpoint_dir);

  for (const EncoderSpec& spec : default_ensemble_specs()) {
    EncoderTrainMetrics metrics;
    const SpeakerEncoder enc = train_speaker_encoder(corpus, spec, config.seed, &metrics, config.train);
    save_checkpoint(enc, config.checkpoint_dir, spec.id, &metrics);
    log << "trained " << spec.id << ": loss=" << metrics.final_loss
        << " train_acc=" << metrics.train_accuracy << "\n";
  }
  {
    EncoderTrainMetrics metrics;
    const EncoderSpec spec = verifier_spec();
    const SpeakerEncoder verifier =
        train_speaker_encoder(corpus, spec, config.seed + 1, &metrics, config.train);
    save_checkpoint(verifier, config.checkpoint_dir, spec.id, &metrics);
    log << "trained " << spec.id << ": loss=" << metrics.final_loss
        << " train_acc=" << metrics.train_accuracy << "\n";
  }
  {
    AsrTrainMetrics metrics;
    const CtcAsr asr = train_asr(corpus, config.seed, &metrics, config.train);
    save_checkpoint(asr, config.checkpoint_dir, "ctc_asr", &metrics);
    log << "trained ctc_asr: loss=" << metrics.final_loss
        << " train_wer=" << metrics.train_wer_percent << "%\n";
  }
}

inline nlohmann::json protection_result_to_json(const ProtectionResult& res, const std::string& source,
                                                const std::string& output_wav,
                                                const ProtectionConfig& cfg) {
  nlohmann::json j;
  j["source"] = source;
  j["output"] = output_wav;
  j["mode"] = mode_name(cfg.mode);
  j["epsilon"] = cfg.epsilon;
  j["iterations"] = cfg.iterations;
  j["alpha"] = cfg.weights.alpha;
  j["beta"] = cfg.weights.beta;
  j["l2_coeff"] = cfg.weights.l2_coeff;
  j["step_rule"] = step_rule_name(cfg.step_rule);
  j["step_size"] = cfg.step_size;
  j["seed"] = cfg.seed;
  j["include_asr_term"] = cfg.include_asr_term;
  j["target_transcript"] = res.y_t.text;
  j["target_origin"] = res.y_t.origin == TargetOrigin::kSlicedFromDictionary
                           ? "sliced-from-dictionary"
                           : "transcript-of-target-speaker";
  if (res.target_speaker_id.has_value()) j["target_speaker_id"] = *res.target_speaker_id;
  j["linf_achieved"] = res.linf_achieved;
  j["best_iteration"] = res.best_iteration;
  if (!res.warning.empty()) j["warning"] = res.warning;
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& it : res.loss_trace) {
    trace.push_back({{"asr", it.asr}, {"fea", it.fea}, {"psy", it.psy}, {"l2", it.l2}, {"total", it.total}});
  }
  j["loss_trace"] = trace;
  return j;
}

// One protected WAV plus one JSON result record per manifest row. The
// perturbation seed is re-randomized per utterance from seed ^ row index.
inline void cmd_protect(const RunConfig& config, std::ostream& log = std::cout) {
  const FixturesCorpus to_protect =
      load_corpus(config.protect_manifest, /*strict=*/false, /*allow_empty=*/true);
  cli_detail::EnsembleStack stack = cli_detail::load_ensemble(config.checkpoint_dir);
  const CtcAsr asr = load_asr_checkpoint(config.checkpoint_dir, "ctc_asr");
  std::filesystem::create_directories(config.output_dir);

  SpeakerDatabase db;
  if (config.protection.mode == ProtectionMode::kTargeted) {
    const FixturesCorpus db_corpus =
        load_corpus(config.db_manifest_or_default(), /*strict=*/false);
    db = build_speaker_database(db_corpus, stack.encoders, stack.extractor);
  }

  std::mutex log_mutex;
  cli_detail::parallel_for(
      static_cast<int64_t>(to_protect.records.size()), config.jobs, [&](int64_t i) {
        const FixtureRecord& rec = to_protect.records[i];
        ProtectionConfig cfg = config.protection;
        cfg.seed = config.seed ^ static_cast<uint64_t>(i);
        const ProtectionResult res = protect(rec.audio, cfg, stack.encoders, stack.extractor, asr,
                                             cfg.mode == ProtectionMode::kTargeted ? &db : nullptr);
        const std::string stem = cli_detail::stem_of(rec.path);
        const std::string wav_path = config.output_dir + "/" + stem + ".wav";
        save_wav(res.x_prime, wav_path);
        const nlohmann::json j = protection_result_to_json(res, rec.path, wav_path, cfg);
        cli_detail::write_text_atomic(config.output_dir + "/" + stem + ".json", j.dump(2) + "\n");
        std::lock_guard<std::mutex> lock(log_mutex);
        log << "protected " << rec.path << " -> " << wav_path << " (linf=" << res.linf_achieved
            << ", best_iter=" << res.best_iteration << ", " << res.runtime_seconds << "s)\n";
      });
}

inline std::vector<AugmentKind> parse_kinds(const std::vector<std::string>& names) {
  if (names.empty()) return all_augment_kinds();
  std::vector<AugmentKind> kinds;
  for (const std::string& n : names) kinds.push_back(augment_from_name(n));
  return kinds;
}

// Runs the robustness battery over clean/protected pairs and writes CSV and
// JSON reports (plus optional SVG charts).
inline void cmd_evaluate(const RunConfig& config, std::ostream& log = std::cout) {
  const FixturesCorpus clean = load_corpus(config.protect_manifest, /*strict=*/false);
  const CtcAsr asr = load_asr_checkpoint(config.checkpoint_dir, "ctc_asr");
  const SpeakerEncoder verifier =
      load_encoder_checkpoint(config.checkpoint_dir, verifier_spec().id);

  std::vector<Waveform> protected_audio;
  for (const auto& rec : clean.records) {
    const std::string path =
        config.protected_dir_or_default() + "/" + cli_detail::stem_of(rec.path) + ".wav";
    protected_audio.push_back(load_wav_canonical(path));
  }

  AugmentParams params = config.augment_params;
  params.seed = config.seed ^ 0xa46;
  const std::vector<MetricReport> reports =
      run_battery(clean.records, protected_audio, asr, verifier, parse_kinds(config.kinds), params);

  std::filesystem::create_directories(config.output_dir);
  cli_detail::write_text_atomic(config.output_dir + "/battery.csv",
                                battery_to_csv(reports, config.seed));
  cli_detail::write_text_atomic(config.output_dir + "/battery.json",
                                battery_to_json(reports, config.seed).dump(2) + "\n");
  for (const auto& r : reports) {
    log << r.kind << ": wer=" << r.mean_wer << "% sim=" << r.mean_sim << " snr=" << r.mean_snr
        << " dB (n=" << r.n << ")\n";
  }
  if (config.emit_plots) {
    std::vector<std::string> labels;
    std::vector<double> wer_means, sim_means;
    for (const auto& r : reports) {
      labels.push_back(r.kind);
      wer_means.push_back(r.mean_wer);
      sim_means.push_back(r.mean_sim);
    }
    svg_bar_chart(labels, wer_means, "WER by transform (%)", config.output_dir + "/battery_wer.svg");
    svg_bar_chart(labels, sim_means, "SIM by transform", config.output_dir + "/battery_sim.svg");
  }
}

// Single-file transform.
inline void cmd_augment(const RunConfig& config, const std::string& kind_name,
                        const std::string& input, const std::string& output) {
  const AugmentKind kind = augment_from_name(kind_name);
  const Waveform w = load_wav(input);
  AugmentParams params = config.augment_params;
  params.seed = config.seed;
  save_wav(augment(w, kind, params), output);
}

// Re-renders the CSV (and optional charts) from a battery JSON report.
inline void cmd_report(const RunConfig& config, const std::string& battery_json_path,
                       std::ostream& log = std::cout) {
  std::ifstream in(battery_json_path);
  if (!in) throw ValidationError("report: cannot open " + battery_json_path);
  nlohmann::json j;
  in >> j;
  std::vector<MetricReport> reports;
  for (const auto& row : j.at("rows")) {
    MetricReport r;
    r.kind = row.at("kind");
    r.mean_wer = row.at("wer");
    r.mean_sim = row.at("sim");
    r.mean_snr = row.at("snr");
    r.n = row.at("n");
    if (row.contains("per_utterance")) {
      r.wer_percent = row["per_utterance"].at("wer").get<std::vector<double>>();
      r.sim_values = row["per_utterance"].at("sim").get<std::vector<double>>();
      r.snr_db = row["per_utterance"].at("snr").get<std::vector<double>>();
    }
    reports.push_back(std::move(r));
  }
  const uint64_t seed = j.at("seed");
  std::filesystem::create_directories(config.output_dir);
  cli_detail::write_text_atomic(config.output_dir + "/battery.csv", battery_to_csv(reports, seed));
  log << "rendered " << reports.size() << " rows\n";
  if (config.emit_plots) {
    std::vector<std::string> labels;
    std::vector<double> wer_means;
    for (const auto& r : reports) {
      labels.push_back(r.kind);
      wer_means.push_back(r.mean_wer);
    }
    svg_bar_chart(labels, wer_means, "WER by transform (%)", config.output_dir + "/battery_wer.svg");
  }
}

// Bundled corpus generator.
inline void cmd_make_fixtures(const std::string& dir, uint64_t seed, int per_speaker,
                              std::ostream& log = std::cout) {
  const FixtureSet set = generate_fixtures(dir, seed, per_speaker);
  log << "wrote " << set.train_count << " training and " << set.heldout_count
      << " held-out fixtures under " << dir << "\n";
}

}  // namespace voxshield

#endif  // VOXSHIELD_CLI_HPP_

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

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "voxshield/cli.hpp"

using namespace voxshield;

int main(int argc, char** argv) {
  CLI::App app{"voxshield: adversarial perturbation toolkit against voice cloning"};
  app.set_config("--config", "", "Key-value config file; every key matches a flag name");
  app.require_subcommand(1);

  RunConfig config;
  std::string mode = "untargeted";
  std::string step_rule = "pgd-accumulate";
  bool no_asr_term = false;

  app.add_option("--manifest", config.corpus_manifest, "Training corpus manifest (CSV)");
  app.add_option("--protect-manifest", config.protect_manifest,
                 "Manifest of utterances to protect/evaluate (defaults to --manifest)");
  app.add_option("--speaker-db", config.speaker_db_manifest,
                 "Speaker database manifest (defaults to --manifest)");
  app.add_option("--checkpoints", config.checkpoint_dir, "Checkpoint directory");
  app.add_option("--out", config.output_dir, "Output directory");
  app.add_option("--protected", config.protected_dir,
                 "Directory of protected WAVs for evaluate (defaults to --out)");
  app.add_option("--mode", mode, "untargeted | targeted")
      ->check(CLI::IsMember({"untargeted", "targeted"}));
  app.add_option("--epsilon", config.protection.epsilon, "L-infinity budget");
  app.add_option("--iterations", config.protection.iterations, "Optimization iterations");
  app.add_option("--alpha", config.protection.weights.alpha, "Feature-loss weight");
  app.add_option("--beta", config.protection.weights.beta, "Perception weight");
  app.add_option("--l2-coeff", config.protection.weights.l2_coeff, "L2 coefficient under beta");
  app.add_option("--step-rule", step_rule, "literal-sign | pgd-accumulate")
      ->check(CLI::IsMember({"literal-sign", "pgd-accumulate"}));
  auto* step_size_opt =
      app.add_option("--step-size", config.protection.step_size, "PGD step (default epsilon/10)");
  app.add_option("--seed", config.seed, "Seed recorded in every output artifact");
  app.add_option("--jobs", config.jobs, "Per-utterance parallelism")->check(CLI::PositiveNumber);
  app.add_option("--kinds", config.kinds, "Battery transform kinds (default: all)")->delimiter(',');
  app.add_flag("--plots", config.emit_plots, "Emit SVG charts");
  app.add_flag("--no-asr-term", no_asr_term, "Drop the ASR term from the objective");
  app.add_option("--encoder-epochs", config.train.encoder_epochs, "Encoder training epochs");
  app.add_option("--asr-epochs", config.train.asr_epochs, "ASR training epochs");
  app.add_option("--encoder-lr", config.train.encoder_lr, "Encoder learning rate");
  app.add_option("--asr-lr", config.train.asr_lr, "ASR learning rate");

  CLI::App* train = app.add_subcommand("train", "Train surrogate encoders, verifier and ASR");
  CLI::App* protect_cmd = app.add_subcommand("protect", "Embed protective perturbations");
  CLI::App* evaluate = app.add_subcommand("evaluate", "Metrics and robustness battery");

  CLI::App* augment_cmd = app.add_subcommand("augment", "Apply one transform to one file");
  std::string aug_kind, aug_in, aug_out;
  augment_cmd->add_option("--kind", aug_kind, "Transform kind")->required();
  augment_cmd->add_option("--in", aug_in, "Input WAV")->required();
  augment_cmd->add_option("--out-file", aug_out, "Output WAV")->required();

  CLI::App* report = app.add_subcommand("report", "Re-render reports from a battery JSON");
  std::string report_in;
  report->add_option("--in", report_in, "battery.json path")->required();

  CLI::App* fixtures = app.add_subcommand("make-fixtures", "Generate the synthetic corpus");
  std::string fixtures_dir = "fixtures";
  int per_speaker = 12;
  fixtures->add_option("--dir", fixtures_dir, "Output directory");
  fixtures->add_option("--per-speaker", per_speaker, "Utterances per speaker");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  config.protection.mode = mode_from_name(mode);
  config.protection.step_rule = step_rule_from_name(step_rule);
  config.protection.include_asr_term = !no_asr_term;
  config.protection.seed = config.seed;
  if (step_size_opt->count() == 0) {
    config.protection.step_size = config.protection.epsilon / 10.0;
  }
  if (config.protect_manifest.empty()) config.protect_manifest = config.corpus_manifest;

  try {
    if (train->parsed()) {
      cmd_train(config);
    } else if (protect_cmd->parsed()) {
      cmd_protect(config);
    } else if (evaluate->parsed()) {
      cmd_evaluate(config);
    } else if (augment_cmd->parsed()) {
      cmd_augment(config, aug_kind, aug_in, aug_out);
    } else if (report->parsed()) {
      cmd_report(config, report_in);
    } else if (fixtures->parsed()) {
      cmd_make_fixtures(fixtures_dir, config.seed, per_speaker);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

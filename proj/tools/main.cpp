/* Copyright 2026 The MirrorNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// mirrornet: command-line front end.
//
// Exit status: 0 on success, 1 on runtime failure, 2 on usage or
// configuration errors.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "mirrornet/config.hpp"

namespace {

using namespace mirrornet;

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

config::RunConfig load_config(const std::string& path) {
  return path.empty() ? config::RunConfig{} : config::load(path);
}

bool parse_on_off(const std::string& v) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw cli::UsageError("--init must be on or off");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MirrorNet: articulatory autoencoder with a synthesizer in the loop"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log per-epoch progress");

  std::string config_path;
  std::optional<std::uint64_t> seed;

  cli::GenSyntheticArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Generate a synthetic oracle dataset");
  gen_cmd->add_option("--n", gen.n, "Number of items")->required();
  gen_cmd->add_option("--duration", gen.duration, "Seconds per item")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--items-per-speaker", gen.items_per_speaker)->capture_default_str();
  gen_cmd->add_option("--splits", gen.splits,
                      "Speaker split ratios, e.g. train=0.8,dev=0.1,test=0.1");
  gen_cmd->add_flag("--audio", gen.audio, "Also write WAVs inverted from the spectrograms");
  gen_cmd->add_option("--inversion-iters", gen.inversion_iters)->capture_default_str();

  cli::TrainSynthArgs ts;
  auto* ts_cmd = app.add_subcommand("train-synth", "Train an articulatory synthesizer");
  ts_cmd->add_option("--config", config_path, "JSON run config");
  ts_cmd->add_option("--manifest", ts.manifest)->required();
  ts_cmd->add_option("--variant", ts.variant, "ft or lt")
      ->check(CLI::IsMember({"ft", "lt"}, CLI::ignore_case))
      ->capture_default_str();
  ts_cmd->add_option("--out", ts.out, "Checkpoint path")->required();
  ts_cmd->add_option("--channels", ts.channels, "Input channels: 9, or 6 without source features")
      ->check(CLI::IsMember({std::size_t{6}, std::size_t{9}}))
      ->capture_default_str();
  ts_cmd->add_option("--max-steps", ts.max_steps, "Optimizer step budget (0: epochs only)");
  ts_cmd->add_option("--seed", seed, "Overrides the config seed");

  cli::TrainMirrorNetArgs tm;
  std::string init_flag = "on";
  auto* tm_cmd = app.add_subcommand("train-mirrornet", "Train the MirrorNet against a frozen plant");
  tm_cmd->add_option("--config", config_path, "JSON run config");
  tm_cmd->add_option("--manifest", tm.manifest)->required();
  tm_cmd->add_option("--synth", tm.synth, "Synthesizer checkpoint, or 'oracle'")->required();
  tm_cmd->add_option("--init", init_flag, "on or off")->capture_default_str();
  tm_cmd->add_option("--out", tm.out, "Checkpoint path")->required();
  tm_cmd->add_option("--log", tm.log, "JSON-lines loss log");
  tm_cmd->add_option("--seed", seed, "Overrides the config seed");

  cli::EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "PPMC report on a split");
  ev_cmd->add_option("--model", ev.model, "MirrorNet checkpoint");
  ev_cmd->add_option("--estimates", ev.estimates, "Directory of <id>.csv estimated trajectories");
  ev_cmd->add_option("--manifest", ev.manifest)->required();
  ev_cmd->add_option("--report-dir", ev.report_dir)->required();
  ev_cmd->add_option("--split", ev.split)->capture_default_str();
  ev_cmd->add_option("--label", ev.label, "Row label in table.csv")->capture_default_str();

  cli::InvertArgs inv;
  auto* inv_cmd = app.add_subcommand("invert", "Estimate a trajectory from a WAV");
  inv_cmd->add_option("--model", inv.model)->required();
  inv_cmd->add_option("--wav", inv.wav)->required();
  inv_cmd->add_option("--out-csv", inv.out_csv)->required();

  cli::SynthAudioArgs sa;
  auto* sa_cmd = app.add_subcommand("synth-audio", "Synthesize a WAV from a trajectory");
  sa_cmd->add_option("--synth", sa.synth, "Synthesizer checkpoint, or 'oracle'")->required();
  sa_cmd->add_option("--traj", sa.traj)->required();
  sa_cmd->add_option("--out-wav", sa.out_wav)->required();
  sa_cmd->add_option("--iters", sa.iters, "Inversion iterations")->capture_default_str();
  sa_cmd->add_option("--seed", sa.seed)->capture_default_str();

  cli::PaperStudyArgs ps;
  auto* ps_cmd = app.add_subcommand(
      "paper-study", "Synthetic data, FT/LT synthesizers, MirrorNet with and without init, tables");
  ps_cmd->add_option("--config", config_path, "JSON run config");
  ps_cmd->add_option("--out", ps.out)->required();
  ps_cmd->add_option("--train-items", ps.train_items)->capture_default_str();
  ps_cmd->add_option("--init-items", ps.init_items)->capture_default_str();
  ps_cmd->add_option("--dev-items", ps.dev_items)->capture_default_str();
  ps_cmd->add_option("--test-items", ps.test_items)->capture_default_str();
  ps_cmd->add_option("--duration", ps.duration)->capture_default_str();
  ps_cmd->add_option("--seed", seed, "Overrides the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    auto with_seed = [&](config::RunConfig cfg) {
      if (seed) cfg.seed = *seed;
      return cfg;
    };
    if (*gen_cmd) {
      cli::gen_synthetic(gen);
    } else if (*ts_cmd) {
      ts.config = with_seed(load_config(config_path));
      cli::train_synth(ts);
    } else if (*tm_cmd) {
      tm.config = with_seed(load_config(config_path));
      tm.init = parse_on_off(init_flag);
      cli::train_mirrornet(tm);
    } else if (*ev_cmd) {
      cli::evaluate(ev);
    } else if (*inv_cmd) {
      cli::invert(inv);
    } else if (*sa_cmd) {
      cli::synth_audio(sa);
    } else if (*ps_cmd) {
      ps.config = with_seed(load_config(config_path));
      cli::paper_study(ps);
    }
  } catch (const cli::UsageError& e) {
    spdlog::error("{}", e.what());
    return kUsageError;
  } catch (const config::ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntimeFailure;
  }
  return EXIT_SUCCESS;
}

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

#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <memory>

#include <spdlog/spdlog.h>

#include "mirrornet/checkpoint.hpp"
#include "mirrornet/data.hpp"
#include "mirrornet/eval.hpp"
#include "mirrornet/mirrornet.hpp"
#include "mirrornet/oracle.hpp"
#include "mirrornet/synth.hpp"
#include "mirrornet/wav.hpp"

namespace mirrornet::cli {
namespace {

using nlohmann::json;

std::vector<data::Utterance> load_dataset(const fs::path& manifest, const config::RunConfig& cfg) {
  const auto items = data::load_manifest(manifest);
  return data::load_utterances(items, 200, cfg.audspec);
}

std::unique_ptr<Plant> make_plant(const std::string& spec) {
  if (spec == "oracle") return std::make_unique<OraclePlant>();
  return std::make_unique<SynthPlant>(synth::load_synth(spec));
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  return fs::path(path.string() + suffix);
}

// Crops to the longest prefix whose frame count is a multiple of `m`.
Tensor<float> crop_cols(const Tensor<float>& t, std::size_t m) {
  const std::size_t cols = t.cols() - t.cols() % m;
  if (cols == 0) throw UsageError("input shorter than " + std::to_string(m) + " frames");
  if (cols == t.cols()) return t;
  Tensor<float> out(Shape{t.rows(), cols});
  for (std::size_t r = 0; r < t.rows(); ++r) std::copy_n(t.row(r).begin(), cols, out.row(r).begin());
  return out;
}

}  // namespace

void gen_synthetic(const GenSyntheticArgs& args) {
  if (args.n == 0) throw UsageError("--n must be at least 1");
  if (!(args.duration >= 0.04)) throw UsageError("--duration must be at least 0.04 s");
  if (args.items_per_speaker == 0) throw UsageError("--items-per-speaker must be at least 1");
  data::SyntheticOptions opts;
  opts.items_per_speaker = args.items_per_speaker;
  auto items = data::gen_synthetic(args.n, args.duration, args.seed, opts);
  if (!args.splits.empty()) {
    const auto ratios = data::parse_split_ratios(args.splits);
    std::vector<std::string> speakers;
    for (const auto& u : items) speakers.push_back(u.speaker);
    std::map<std::string, data::Split> assignment;
    try {
      assignment = data::assign_speaker_splits(speakers, ratios, args.seed);
    } catch (const data::DataError& e) {
      throw UsageError(e.what());
    }
    for (auto& u : items) u.split = assignment.at(u.speaker);
  }
  const auto manifest = data::write_dataset(args.out, items, {args.audio, args.inversion_iters});
  spdlog::info("wrote {} items to {}", items.size(), manifest.string());
}

void train_synth(const TrainSynthArgs& args) {
  const auto variant = synth::parse_variant(args.variant);
  if (args.channels != data::kNumChannels && args.channels != data::kNumTVs) {
    throw UsageError("--channels must be 9 or 6");
  }
  const auto all = load_dataset(args.manifest, args.config);
  // FT uses the full training split; LT only the small supervised split.
  const auto train = data::select(all, variant == synth::Variant::kFT ? data::Split::kTrain
                                                                      : data::Split::kInit);
  const auto dev = data::select(all, data::Split::kDev);
  const auto test = data::select(all, data::Split::kTest);
  if (train.empty()) {
    throw data::DataError(std::string("no ") +
                          (variant == synth::Variant::kFT ? "train" : "init") +
                          " items in " + args.manifest.string());
  }
  auto opts = synth::TrainOptions::from(args.config.train_synth, variant, args.config.seed);
  opts.max_steps = args.max_steps;
  opts.on_epoch = [](const synth::EpochLog& l) {
    spdlog::debug("epoch {} steps {} train {:.6f} monitored {:.6f} lr {:g}", l.epoch, l.steps,
                  l.train_loss, l.dev_loss, l.lr);
  };
  spdlog::info("training {} synthesizer ({} channels) on {} items, batch {}",
               synth::variant_name(variant), args.channels, train.size(), opts.batch);
  auto result =
      synth::train_synthesizer(train, dev, args.config.model, variant, args.channels, opts);

  json metrics = {{"best_monitored_mse", result.best_loss},
                  {"best_epoch", result.best_epoch},
                  {"steps", result.steps},
                  {"train_items", train.size()},
                  {"dev_items", dev.size()}};
  if (!test.empty()) {
    const auto report = synth::eval_synthesizer(result.model, test);
    metrics["test_mse"] = report.mean_mse;
    synth::write_eval_csv(sibling(args.out, ".test.csv"), report);
  }
  synth::save_synth(args.out, result.model, metrics, config::hash(args.config), args.config.seed);
  write_json(sibling(args.out, ".metrics.json"), metrics);
  std::cout << metrics.dump() << '\n';
}

void train_mirrornet(const TrainMirrorNetArgs& args) {
  const auto& cfg = args.config;
  const auto plant = make_plant(args.synth);
  const auto all = load_dataset(args.manifest, cfg);
  const auto supervised = data::select(all, data::Split::kInit);
  const auto dev = data::select(all, data::Split::kDev);
  const auto train = data::select(all, data::Split::kTrain);
  if (train.empty()) throw data::DataError("no train items in " + args.manifest.string());
  if (args.init && supervised.empty()) {
    throw data::DataError("--init on needs init items in " + args.manifest.string());
  }

  const auto stats = latent_stats(args.init ? std::span<const data::Utterance>(supervised)
                                            : std::span<const data::Utterance>(),
                                  plant.get(), cfg.model.latent_channels);
  MirrorNetModel model(cfg.model, stats, cfg.seed);

  const fs::path log_path = args.log.empty() ? sibling(args.out, ".log.jsonl") : args.log;
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("cannot write " + log_path.string());

  json metrics = {{"init", args.init}, {"plant", plant->name()}};
  if (args.init) {
    auto opts = InitPhaseOptions::from(cfg.init, cfg.seed);
    opts.on_epoch = [&](const InitEpochLog& l) {
      log << json{{"phase", "init"},       {"epoch", l.epoch},         {"e_c", l.e_c},
                  {"e_d", l.e_d},          {"dev_e_c", l.dev_e_c},     {"dev_e_d", l.dev_e_d},
                  {"lr_enc", l.lr_enc},    {"lr_dec", l.lr_dec}}
                 .dump()
          << '\n';
    };
    spdlog::info("initialization phase on {} supervised items", supervised.size());
    const auto report = init_phase(model, supervised, dev, opts);
    metrics["init_e_c"] = report.history.back().e_c;
    metrics["init_e_d"] = report.history.back().e_d;
  }

  auto opts = LearningPhaseOptions::from(cfg.learn, cfg.seed);
  opts.on_epoch = [&](const StageLog& l) {
    log << to_json(l).dump() << '\n';
    spdlog::debug("iteration {} {} epoch {} e_c {:.6f} e_d {:.6f}", l.iteration,
                  stage_name(l.stage), l.epoch, l.e_c, l.e_d);
  };
  spdlog::info("learning phase on {} items against the {} plant", train.size(), plant->name());
  const auto report = learning_phase(model, train, *plant, opts);
  if (report.plant_before != report.plant_after) {
    throw std::logic_error("plant parameters changed during the learning phase");
  }
  metrics["e_c"] = report.history.back().e_c;
  metrics["e_d"] = report.history.back().e_d;
  metrics["plant_hash"] = report.plant_after;
  save_mirrornet(args.out, model, metrics, config::hash(cfg), cfg.seed);
  write_json(sibling(args.out, ".metrics.json"), metrics);
  std::cout << metrics.dump() << '\n';
}

eval::PpmcReport evaluate(const EvalArgs& args) {
  if (args.model.empty() == args.estimates.empty()) {
    throw UsageError("give exactly one of --model or --estimates");
  }
  const data::Split split = [&] {
    try {
      return data::parse_split(args.split);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }();
  std::optional<MirrorNetModel> model;
  if (!args.model.empty()) model = load_mirrornet(args.model);
  const auto cfg = config::RunConfig{};
  const auto items = data::select(load_dataset(args.manifest, cfg), split);
  if (items.empty()) {
    throw data::DataError("no " + args.split + " items in " + args.manifest.string());
  }

  std::vector<Tensor<float>> estimates, truths;
  std::vector<std::string> ids;
  for (const auto& u : items) {
    if (!u.trajectory) throw data::DataError(u.id + ": evaluation needs a trajectory");
    Tensor<float> est = model ? infer_articulation(*model, u.spectrogram)
                              : data::read_trajectory_csv(args.estimates / (u.id + ".csv"));
    Tensor<float> truth = *u.trajectory;
    if (est.cols() != truth.cols()) {
      const std::size_t k = std::min(est.cols(), truth.cols());
      Tensor<float> a(Shape{est.rows(), k}), b(Shape{truth.rows(), k});
      for (std::size_t r = 0; r < est.rows(); ++r) std::copy_n(est.row(r).begin(), k, a.row(r).begin());
      for (std::size_t r = 0; r < truth.rows(); ++r) std::copy_n(truth.row(r).begin(), k, b.row(r).begin());
      est = std::move(a);
      truth = std::move(b);
    }
    eval::export_trajectories(args.report_dir / "traj" / (u.id + ".csv"), est, truth);
    estimates.push_back(std::move(est));
    truths.push_back(std::move(truth));
    ids.push_back(u.id);
  }
  const auto report = eval::ppmc_report(estimates, truths, ids);
  eval::write_table_csv(args.report_dir / "table.csv", {{args.label, report}});
  eval::write_items_csv(args.report_dir / "items.csv", report);
  const auto summary = eval::summary_json(report);
  write_json(args.report_dir / "summary.json", summary);
  std::cout << summary.dump() << '\n';
  return report;
}

void invert(const InvertArgs& args) {
  const auto model = load_mirrornet(args.model);
  const auto wav = audio::read_wav(args.wav);
  const auto traj = infer_articulation(model, wav);
  data::write_trajectory_csv(args.out_csv, traj);
  spdlog::info("wrote {} x {} trajectory to {}", traj.rows(), traj.cols(), args.out_csv.string());
}

void synth_audio(const SynthAudioArgs& args) {
  if (args.iters < 1) throw UsageError("--iters must be at least 1");
  const auto plant = make_plant(args.synth);
  const auto traj = crop_cols(data::read_trajectory_csv(args.traj), 4);
  audio::AuditorySpectrogram spec{plant->synthesize(traj), 125.0, {}};
  const auto inv = audio::invert_spectrogram(spec, args.iters, args.seed);
  if (args.out_wav.has_parent_path()) fs::create_directories(args.out_wav.parent_path());
  audio::write_wav(args.out_wav, {audio::kSampleRate, inv.wav});
  spdlog::info("wrote {:.2f} s of audio to {} (re-analysis error {:.4f})",
               static_cast<double>(inv.wav.size()) / audio::kSampleRate, args.out_wav.string(),
               inv.error_trace.back());
}

void paper_study(const PaperStudyArgs& args) {
  const auto& cfg = args.config;
  const std::size_t total = args.train_items + args.init_items + args.dev_items + args.test_items;
  if (args.train_items == 0 || args.init_items == 0 || args.dev_items == 0 ||
      args.test_items == 0) {
    throw UsageError("every split needs at least one item");
  }
  const fs::path data_dir = args.out / "data";
  GenSyntheticArgs gen;
  gen.n = total;
  gen.duration = args.duration;
  gen.seed = cfg.seed;
  gen.out = data_dir;
  gen.splits = "train=" + std::to_string(args.train_items) +
               ",init=" + std::to_string(args.init_items) +
               ",dev=" + std::to_string(args.dev_items) +
               ",test=" + std::to_string(args.test_items);
  gen_synthetic(gen);
  const fs::path manifest = data_dir / "manifest.json";
  config::save(args.out / "config.json", cfg);

  for (const char* variant : {"ft", "lt"}) {
    TrainSynthArgs ts;
    ts.config = cfg;
    ts.manifest = manifest;
    ts.variant = variant;
    ts.out = args.out / "synth" / (std::string(variant) + ".mnc");
    train_synth(ts);
  }

  struct Run {
    std::string label;
    std::string plant;
    bool init;
  };
  const std::vector<Run> runs = {
      {"mirrornet_no_init", "ft", false},
      {"mirrornet_init", "ft", true},
      {"semi_supervised", "lt", true},
  };
  std::vector<std::pair<std::string, eval::PpmcReport>> rows;
  for (const auto& run : runs) {
    TrainMirrorNetArgs tm;
    tm.config = cfg;
    tm.manifest = manifest;
    tm.synth = (args.out / "synth" / (run.plant + ".mnc")).string();
    tm.init = run.init;
    tm.out = args.out / "models" / (run.label + ".mnc");
    train_mirrornet(tm);

    EvalArgs ev;
    ev.model = tm.out;
    ev.manifest = manifest;
    ev.report_dir = args.out / "eval" / run.label;
    ev.label = run.label;
    rows.emplace_back(run.label, evaluate(ev));
  }

  // Initialization ablation with the fully trained plant.
  eval::write_table_csv(args.out / "init_ablation.csv", {rows[0], rows[1]});
  // Fully vs lightly trained plant, both initialized; averages only.
  std::ofstream t2(args.out / "plant_comparison.csv");
  if (!t2) throw std::runtime_error("cannot write plant_comparison.csv");
  t2 << "model,avg_6tvs,avg_all\n";
  t2.precision(6);
  t2 << std::fixed;
  t2 << "pseudo_semi_supervised," << rows[1].second.avg_6tvs << ',' << rows[1].second.avg_all
     << '\n';
  t2 << "semi_supervised," << rows[2].second.avg_6tvs << ',' << rows[2].second.avg_all << '\n';
  spdlog::info("wrote {} and {}", (args.out / "init_ablation.csv").string(),
               (args.out / "plant_comparison.csv").string());
}

}  // namespace mirrornet::cli

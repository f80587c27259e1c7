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

#include "mirrornet/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>

#include "mirrornet/checkpoint.hpp"
#include "mirrornet/optim.hpp"
#include "mirrornet/parallel.hpp"

namespace mirrornet::synth {
namespace {

using Var = ad::Var<float>;

struct Example {
  Tensor<float> input;   // normalized trajectory
  Tensor<float> target;  // spectrogram
};

std::vector<Example> examples(const SynthModel& model, std::span<const data::Utterance> items) {
  std::vector<Example> out;
  out.reserve(items.size());
  for (const auto& u : items) {
    if (!u.trajectory) throw data::DataError(u.id + ": synthesizer training needs a trajectory");
    out.push_back({model.stats.normalize(data::take_channels(*u.trajectory, model.channels())),
                   u.spectrogram});
  }
  return out;
}

Tensor<float> forward_normalized(const SynthModel& model, const Tensor<float>& input) {
  ad::NoGradGuard no_grad;
  return model.net(Var::constant(input)).value();
}

double item_mse(const Tensor<float>& a, const Tensor<float>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("spectrogram shape " + shape_str(a.shape()) + " does not match target " +
                     shape_str(b.shape()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

double mean_loss(const SynthModel& model, const std::vector<Example>& set) {
  std::vector<double> losses(set.size());
  parallel_for(set.size(), [&](std::size_t i) {
    losses[i] = item_mse(forward_normalized(model, set[i].input), set[i].target);
  });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(set.size());
}

}  // namespace

std::string_view variant_name(Variant v) { return v == Variant::kFT ? "ft" : "lt"; }

Variant parse_variant(std::string_view name) {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "ft") return Variant::kFT;
  if (lower == "lt") return Variant::kLT;
  throw std::invalid_argument("unknown synthesizer variant '" + std::string(name) +
                              "' (expected ft or lt)");
}

SynthModel::SynthModel(const ArchConfig& arch_cfg, Variant v, data::ChannelStats s,
                       std::uint64_t seed)
    : arch(arch_cfg), variant(v), stats(std::move(s)) {
  Rng rng(seed);
  net = Decoder<float>(arch, rng, stats.channels());
}

Tensor<float> synth_forward(const SynthModel& model, const Tensor<float>& artic) {
  if (artic.rank() != 2 || artic.rows() != model.channels()) {
    throw ShapeError("synth_forward: expected " + std::to_string(model.channels()) +
                     " x k trajectory, got " + shape_str(artic.shape()));
  }
  return forward_normalized(model, model.stats.normalize(artic));
}

TrainOptions TrainOptions::from(const config::TrainSynthConfig& cfg, Variant variant,
                                std::uint64_t seed) {
  TrainOptions o;
  o.lr = cfg.lr;
  o.batch = variant == Variant::kFT ? cfg.batch_ft : cfg.batch_lt;
  o.decay = cfg.decay;
  o.patience = cfg.patience;
  o.epochs = cfg.epochs;
  o.seed = seed;
  return o;
}

TrainResult train_synthesizer(std::span<const data::Utterance> train,
                              std::span<const data::Utterance> dev, const ArchConfig& arch,
                              Variant variant, std::size_t channels, const TrainOptions& opts) {
  if (train.empty()) throw data::DataError("train_synthesizer: empty training set");
  if (opts.batch == 0) throw std::invalid_argument("train_synthesizer: batch must be positive");
  std::vector<Tensor<float>> trajs;
  for (const auto& u : train) {
    if (!u.trajectory) throw data::DataError(u.id + ": synthesizer training needs a trajectory");
    trajs.push_back(data::take_channels(*u.trajectory, channels));
  }

  TrainResult result;
  result.model = SynthModel(arch, variant, data::ChannelStats::fit(trajs), opts.seed);
  SynthModel& model = result.model;
  const auto train_set = examples(model, train);
  const auto dev_set = examples(model, dev);

  const auto params = model.parameters();
  nn::AdamState<float> adam(params);
  nn::LrScheduler sched(opts.lr, opts.decay, opts.patience);
  Rng shuffle_rng(opts.seed + 1);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = std::min(opts.batch, train_set.size());
  auto& tape = ad::Tape<float>::local();

  auto best = ckpt::snapshot(params);
  result.best_loss = std::numeric_limits<double>::infinity();
  bool out_of_steps = false;
  for (std::size_t epoch = 1; epoch <= opts.epochs && !out_of_steps; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(start + batch, order.size());
      const float inv = 1.0f / static_cast<float>(end - start);
      nn::zero_grads(params);
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = train_set[order[b]];
        tape.clear();
        const Var loss = ad::mse(model.net(Var::constant(ex.input)), Var::constant(ex.target));
        const double value = loss.value()[0];
        if (!std::isfinite(value)) throw nn::NonFiniteGradient("train_synthesizer: non-finite loss");
        loss_sum += value;
        ++seen;
        ad::backward(ad::scale(loss, inv));
      }
      tape.clear();
      nn::adam_step(params, adam, sched.lr());
      ++result.steps;
      if (opts.max_steps != 0 && result.steps >= opts.max_steps) {
        out_of_steps = true;
        break;
      }
    }

    EpochLog log;
    log.epoch = epoch;
    log.steps = result.steps;
    log.train_loss = loss_sum / static_cast<double>(seen);
    log.dev_loss = mean_loss(model, dev_set.empty() ? train_set : dev_set);
    log.lr = sched.lr();
    if (!std::isfinite(log.dev_loss)) {
      throw nn::NonFiniteGradient("train_synthesizer: non-finite monitored loss");
    }
    if (log.dev_loss < result.best_loss) {
      result.best_loss = log.dev_loss;
      result.best_epoch = epoch;
      best = ckpt::snapshot(params);
    }
    sched.step(log.dev_loss);
    result.history.push_back(log);
    if (opts.on_epoch) opts.on_epoch(log);
    if (opts.stop_below > 0.0 && log.dev_loss <= opts.stop_below) break;
  }
  ckpt::restore(best, params);
  return result;
}

EvalReport eval_synthesizer(const SynthModel& model, std::span<const data::Utterance> items) {
  if (items.empty()) throw data::DataError("eval_synthesizer: empty test set");
  EvalReport report;
  report.item_mse.resize(items.size());
  parallel_for(items.size(), [&](std::size_t i) {
    const auto& u = items[i];
    if (!u.trajectory) throw data::DataError(u.id + ": evaluation needs a trajectory");
    const auto pred = synth_forward(model, data::take_channels(*u.trajectory, model.channels()));
    report.item_mse[i] = item_mse(pred, u.spectrogram);
  });
  double sum = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    report.ids.push_back(items[i].id);
    sum += report.item_mse[i];
  }
  report.mean_mse = sum / static_cast<double>(items.size());
  return report;
}

void write_eval_csv(const std::filesystem::path& path, const EvalReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(9);
  out << "id,mse\n";
  for (std::size_t i = 0; i < report.ids.size(); ++i) {
    out << report.ids[i] << ',' << report.item_mse[i] << '\n';
  }
  out << "mean," << report.mean_mse << '\n';
}

void save_synth(const std::filesystem::path& path, SynthModel& model,
                const nlohmann::json& metrics, const std::string& config_hash,
                std::uint64_t seed) {
  ckpt::Checkpoint c;
  c.model_kind = "synth";
  c.meta = {{"arch", config::arch_to_json(model.arch)},
            {"variant", std::string(variant_name(model.variant))},
            {"channels", model.channels()},
            {"stats", ckpt::stats_to_json(model.stats)},
            {"config_hash", config_hash},
            {"seed", seed},
            {"metrics", metrics}};
  c.tensors = ckpt::snapshot(model.parameters());
  ckpt::save(path, c);
}

SynthModel load_synth(const std::filesystem::path& path) {
  const auto c = ckpt::load(path);
  if (c.model_kind != "synth") {
    throw ckpt::CheckpointError(path.string() + ": holds a '" + c.model_kind +
                                "' model, not a synthesizer");
  }
  try {
    SynthModel model(config::arch_from_json(c.meta.at("arch")),
                     parse_variant(c.meta.at("variant").get<std::string>()),
                     ckpt::stats_from_json(c.meta.at("stats")), 0);
    ckpt::restore(c.tensors, model.parameters());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ckpt::CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace mirrornet::synth

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

#include "mirrornet/mirrornet.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "mirrornet/checkpoint.hpp"
#include "mirrornet/optim.hpp"

namespace mirrornet {
namespace {

using Var = ad::Var<float>;

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw nn::NonFiniteGradient(std::string(what) + ": non-finite loss");
}

double mse_value(const Tensor<float>& a, const Tensor<float>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
}

// Contiguous batches over a shuffled order.
template <typename Fn>
void for_each_batch(const std::vector<std::size_t>& order, std::size_t batch, Fn&& fn) {
  for (std::size_t start = 0; start < order.size(); start += batch) {
    const std::size_t end = std::min(start + batch, order.size());
    fn(std::span<const std::size_t>(order).subspan(start, end - start));
  }
}

}  // namespace

Tensor<float> OraclePlant::synthesize(const Tensor<float>& traj) const {
  data::OracleDiagnostics diag;
  auto out = data::oracle_synth(params_, traj, &diag).values;
  clamped_ += diag.clamped;
  return out;
}

std::string OraclePlant::fingerprint() const {
  const auto& p = params_;
  const nlohmann::json j = {
      {"f1", {p.f1_lo, p.f1_hi, p.f1_gain, p.f1_width}},
      {"f2", {p.f2_lo, p.f2_hi, p.f2_gain, p.f2_width}},
      {"f3", {p.f3_lo, p.f3_hi, p.f3_gain, p.f3_width}},
      {"source", {p.modulation, p.base, p.harmonic_level, p.rolloff, p.noise, p.floor}},
      {"audspec", config::audspec_to_json(p.audspec)}};
  return ckpt::sha256_hex(j.dump());
}

Tensor<float> SynthPlant::synthesize(const Tensor<float>& traj) const {
  return synth::synth_forward(model_, data::take_channels(traj, model_.channels()));
}

std::string SynthPlant::fingerprint() const {
  return ckpt::params_hash(const_cast<synth::SynthModel&>(model_).parameters());
}

std::string SynthPlant::name() const {
  return "synth-" + std::string(synth::variant_name(model_.variant)) + "-" +
         std::to_string(model_.channels());
}

MirrorNetModel::MirrorNetModel(const ArchConfig& arch_cfg, data::ChannelStats s,
                               std::uint64_t seed)
    : arch(arch_cfg), stats(std::move(s)) {
  arch.validate();
  if (stats.channels() != arch.latent_channels) {
    throw ShapeError("MirrorNetModel: stats cover " + std::to_string(stats.channels()) +
                     " channels, latent has " + std::to_string(arch.latent_channels));
  }
  Rng rng(seed);
  encoder = Encoder<float>(arch, rng);
  decoder = Decoder<float>(arch, rng);
}

nn::ParamList<float> MirrorNetModel::parameters() {
  auto out = encoder.parameters();
  for (auto& p : decoder.parameters()) out.push_back(p);
  return out;
}

Tensor<float> encode(const MirrorNetModel& model, const Tensor<float>& spec) {
  ad::NoGradGuard no_grad;
  return model.encoder(Var::constant(spec)).value();
}

Tensor<float> decode(const MirrorNetModel& model, const Tensor<float>& latent) {
  ad::NoGradGuard no_grad;
  return model.decoder(Var::constant(latent)).value();
}

Tensor<float> infer_articulation(const MirrorNetModel& model, const Tensor<float>& spec) {
  return model.stats.denormalize(encode(model, spec));
}

Tensor<float> infer_articulation(const MirrorNetModel& model, const audio::Wav& wav,
                                 const audio::AudSpecConfig& cfg) {
  const auto spec = audio::auditory_spectrogram(wav.samples, wav.sample_rate, cfg).values;
  const std::size_t frames = spec.cols() - spec.cols() % model.arch.down;
  if (frames == 0) throw ShapeError("infer_articulation: audio shorter than one latent block");
  Tensor<float> cropped(Shape{spec.rows(), frames});
  for (std::size_t c = 0; c < spec.rows(); ++c) {
    std::copy_n(spec.row(c).begin(), frames, cropped.row(c).begin());
  }
  return infer_articulation(model, cropped);
}

data::ChannelStats latent_stats(std::span<const data::Utterance> supervised, const Plant* plant,
                                std::size_t latent_channels) {
  std::vector<Tensor<float>> trajs;
  for (const auto& u : supervised) {
    if (u.trajectory) trajs.push_back(data::take_channels(*u.trajectory, latent_channels));
  }
  if (!trajs.empty()) return data::ChannelStats::fit(trajs);
  if (const auto* sp = dynamic_cast<const SynthPlant*>(plant)) {
    if (sp->model().channels() == latent_channels) return sp->model().stats;
  }
  auto nominal = data::nominal_stats();
  if (latent_channels > nominal.channels()) {
    throw ShapeError("latent_stats: no statistics for " + std::to_string(latent_channels) +
                     " latent channels");
  }
  nominal.mean.resize(latent_channels);
  nominal.stddev.resize(latent_channels);
  return nominal;
}

// --- Initialization phase ----------------------------------------------------

InitPhaseOptions InitPhaseOptions::from(const config::InitConfig& cfg, std::uint64_t seed) {
  InitPhaseOptions o;
  o.lr = cfg.lr;
  o.epochs = cfg.epochs;
  o.batch = cfg.batch;
  o.decay = cfg.decay;
  o.patience = cfg.patience;
  o.seed = seed;
  return o;
}

InitReport init_phase(MirrorNetModel& model, std::span<const data::Utterance> supervised,
                      std::span<const data::Utterance> dev, const InitPhaseOptions& opts) {
  if (supervised.empty()) throw data::DataError("init_phase: no supervised items");
  if (opts.batch == 0) throw std::invalid_argument("init_phase: batch must be positive");
  struct Pair {
    Tensor<float> spec;
    Tensor<float> latent;  // normalized ground truth
  };
  auto pairs = [&](std::span<const data::Utterance> items) {
    std::vector<Pair> out;
    for (const auto& u : items) {
      if (!u.trajectory) {
        throw data::DataError(u.id + ": initialization needs a ground-truth trajectory");
      }
      out.push_back({u.spectrogram, model.stats.normalize(
                                        data::take_channels(*u.trajectory, model.arch.latent_channels))});
    }
    return out;
  };
  const auto train = pairs(supervised);
  const auto held = pairs(dev);

  const auto enc_params = model.encoder_parameters();
  const auto dec_params = model.decoder_parameters();
  nn::AdamState<float> enc_adam(enc_params), dec_adam(dec_params);
  nn::LrScheduler enc_sched(opts.lr, opts.decay, opts.patience);
  nn::LrScheduler dec_sched(opts.lr, opts.decay, opts.patience);
  auto enc_best = ckpt::snapshot(enc_params);
  auto dec_best = ckpt::snapshot(dec_params);
  double enc_best_loss = std::numeric_limits<double>::infinity();
  double dec_best_loss = enc_best_loss;

  Rng rng(opts.seed + 2);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto& tape = ad::Tape<float>::local();
  InitReport report;

  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    shuffle(order, rng);
    double ec_sum = 0.0, ed_sum = 0.0;
    for_each_batch(order, opts.batch, [&](std::span<const std::size_t> idx) {
      const float inv = 1.0f / static_cast<float>(idx.size());
      nn::zero_grads(enc_params);
      nn::zero_grads(dec_params);
      for (std::size_t i : idx) {
        tape.clear();
        const Var ec = ad::mse(model.encoder(Var::constant(train[i].spec)),
                               Var::constant(train[i].latent));
        ec_sum += ec.value()[0];
        ad::backward(ad::scale(ec, inv));
        tape.clear();
        const Var ed = ad::mse(model.decoder(Var::constant(train[i].latent)),
                               Var::constant(train[i].spec));
        ed_sum += ed.value()[0];
        ad::backward(ad::scale(ed, inv));
      }
      tape.clear();
      nn::adam_step(enc_params, enc_adam, enc_sched.lr());
      nn::adam_step(dec_params, dec_adam, dec_sched.lr());
    });

    InitEpochLog log;
    log.epoch = epoch;
    log.e_c = ec_sum / static_cast<double>(train.size());
    log.e_d = ed_sum / static_cast<double>(train.size());
    check_finite(log.e_c + log.e_d, "init_phase");
    log.lr_enc = enc_sched.lr();
    log.lr_dec = dec_sched.lr();
    double enc_monitor = log.e_c, dec_monitor = log.e_d;
    if (!held.empty()) {
      for (const auto& p : held) {
        log.dev_e_c += mse_value(encode(model, p.spec), p.latent);
        log.dev_e_d += mse_value(decode(model, p.latent), p.spec);
      }
      log.dev_e_c /= static_cast<double>(held.size());
      log.dev_e_d /= static_cast<double>(held.size());
      check_finite(log.dev_e_c + log.dev_e_d, "init_phase");
      enc_monitor = log.dev_e_c;
      dec_monitor = log.dev_e_d;
      if (enc_monitor < enc_best_loss) {
        enc_best_loss = enc_monitor;
        enc_best = ckpt::snapshot(enc_params);
      }
      if (dec_monitor < dec_best_loss) {
        dec_best_loss = dec_monitor;
        dec_best = ckpt::snapshot(dec_params);
      }
    }
    enc_sched.step(enc_monitor);
    dec_sched.step(dec_monitor);
    report.history.push_back(log);
    if (opts.on_epoch) opts.on_epoch(log);
  }
  if (!held.empty()) {
    ckpt::restore(enc_best, enc_params);
    ckpt::restore(dec_best, dec_params);
  }
  return report;
}

// --- Learning phase ----------------------------------------------------------

std::string_view stage_name(Stage s) { return s == Stage::kDecoder ? "decoder" : "encoder"; }

nlohmann::json to_json(const StageLog& log) {
  return {{"iteration", log.iteration}, {"stage", std::string(stage_name(log.stage))},
          {"epoch", log.epoch},         {"e_c", log.e_c},
          {"e_d", log.e_d},             {"lr", log.lr}};
}

LearningPhaseOptions LearningPhaseOptions::from(const config::LearnConfig& cfg,
                                                std::uint64_t seed) {
  LearningPhaseOptions o;
  o.lr_enc = cfg.lr_enc;
  o.lr_dec = cfg.lr_dec;
  o.decoder_epochs = cfg.decoder_epochs;
  o.encoder_epochs = cfg.encoder_epochs;
  o.iterations = cfg.iterations;
  o.batch = cfg.batch;
  o.decay = cfg.decay;
  o.patience = cfg.patience;
  o.seed = seed;
  return o;
}

LearningReport learning_phase(MirrorNetModel& model, std::span<const data::Utterance> items,
                              const Plant& plant, const LearningPhaseOptions& opts) {
  if (items.empty()) throw data::DataError("learning_phase: no items");
  if (opts.batch == 0) throw std::invalid_argument("learning_phase: batch must be positive");
  for (const auto& u : items) {
    if (u.spectrogram.rows() != model.arch.spec_channels) {
      throw ShapeError(u.id + ": spectrogram has " + std::to_string(u.spectrogram.rows()) +
                       " channels, model expects " + std::to_string(model.arch.spec_channels));
    }
  }
  const auto enc_params = model.encoder_parameters();
  const auto dec_params = model.decoder_parameters();
  nn::AdamState<float> enc_adam(enc_params), dec_adam(dec_params);
  nn::LrScheduler enc_sched(opts.lr_enc, opts.decay, opts.patience);
  nn::LrScheduler dec_sched(opts.lr_dec, opts.decay, opts.patience);

  // Plant output for the current encoder estimate of item i.
  auto plant_out = [&](const data::Utterance& u, const Tensor<float>& latent) {
    auto xs = plant.synthesize(model.stats.denormalize(latent));
    if (xs.shape() != u.spectrogram.shape()) {
      throw ShapeError("learning_phase: plant output " + shape_str(xs.shape()) +
                       " does not match spectrogram " + shape_str(u.spectrogram.shape()) +
                       " of " + u.id);
    }
    return xs;
  };

  LearningReport report;
  report.plant_before = plant.fingerprint();
  Rng rng(opts.seed + 3);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto& tape = ad::Tape<float>::local();
  const auto n = static_cast<double>(items.size());

  for (std::size_t it = 1; it <= opts.iterations; ++it) {
    // Decoder stage: l^ and x_s are fixed while the encoder is untouched.
    if (opts.on_stage) opts.on_stage(it, Stage::kDecoder, false);
    std::vector<Tensor<float>> latent(items.size()), xs(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      latent[i] = encode(model, items[i].spectrogram);
      xs[i] = plant_out(items[i], latent[i]);
    }
    for (std::size_t epoch = 1; epoch <= opts.decoder_epochs; ++epoch) {
      shuffle(order, rng);
      double ec_sum = 0.0, ed_sum = 0.0;
      for_each_batch(order, opts.batch, [&](std::span<const std::size_t> idx) {
        const float inv = 1.0f / static_cast<float>(idx.size());
        nn::zero_grads(dec_params);
        for (std::size_t i : idx) {
          tape.clear();
          const Var xd = model.decoder(Var::constant(latent[i]));
          const Var ed = ad::mse(Var::constant(xs[i]), xd);
          ed_sum += ed.value()[0];
          ec_sum += mse_value(xd.value(), items[i].spectrogram);
          ad::backward(ad::scale(ed, inv));
        }
        tape.clear();
        nn::adam_step(dec_params, dec_adam, dec_sched.lr());
      });
      StageLog log{it, Stage::kDecoder, epoch, ec_sum / n, ed_sum / n, dec_sched.lr()};
      check_finite(log.e_c + log.e_d, "learning_phase");
      dec_sched.step(log.e_d);
      report.history.push_back(log);
      if (opts.on_epoch) opts.on_epoch(log);
    }
    if (opts.on_stage) opts.on_stage(it, Stage::kDecoder, true);

    // Encoder stage: gradients pass through the decoder, whose parameters
    // stay fixed.
    if (opts.on_stage) opts.on_stage(it, Stage::kEncoder, false);
    nn::set_trainable(dec_params, false);
    try {
      for (std::size_t epoch = 1; epoch <= opts.encoder_epochs; ++epoch) {
        shuffle(order, rng);
        double ec_sum = 0.0, ed_sum = 0.0;
        for_each_batch(order, opts.batch, [&](std::span<const std::size_t> idx) {
          const float inv = 1.0f / static_cast<float>(idx.size());
          nn::zero_grads(enc_params);
          for (std::size_t i : idx) {
            tape.clear();
            const Var lhat = model.encoder(Var::constant(items[i].spectrogram));
            const Var xd = model.decoder(lhat);
            const Var ec = ad::mse(xd, Var::constant(items[i].spectrogram));
            ec_sum += ec.value()[0];
            ed_sum += mse_value(plant_out(items[i], lhat.value()), xd.value());
            ad::backward(ad::scale(ec, inv));
          }
          tape.clear();
          nn::adam_step(enc_params, enc_adam, enc_sched.lr());
        });
        StageLog log{it, Stage::kEncoder, epoch, ec_sum / n, ed_sum / n, enc_sched.lr()};
        check_finite(log.e_c + log.e_d, "learning_phase");
        enc_sched.step(log.e_c);
        report.history.push_back(log);
        if (opts.on_epoch) opts.on_epoch(log);
      }
    } catch (...) {
      nn::set_trainable(dec_params, true);
      throw;
    }
    nn::set_trainable(dec_params, true);
    if (opts.on_stage) opts.on_stage(it, Stage::kEncoder, true);
  }
  report.plant_after = plant.fingerprint();
  return report;
}

// --- Checkpoints -------------------------------------------------------------

void save_mirrornet(const std::filesystem::path& path, MirrorNetModel& model,
                    const nlohmann::json& metrics, const std::string& config_hash,
                    std::uint64_t seed) {
  ckpt::Checkpoint c;
  c.model_kind = "mirrornet";
  c.meta = {{"arch", config::arch_to_json(model.arch)},
            {"stats", ckpt::stats_to_json(model.stats)},
            {"config_hash", config_hash},
            {"seed", seed},
            {"metrics", metrics}};
  c.tensors = ckpt::snapshot(model.parameters());
  ckpt::save(path, c);
}

MirrorNetModel load_mirrornet(const std::filesystem::path& path) {
  const auto c = ckpt::load(path);
  if (c.model_kind != "mirrornet") {
    throw ckpt::CheckpointError(path.string() + ": holds a '" + c.model_kind +
                                "' model, not a MirrorNet");
  }
  try {
    MirrorNetModel model(config::arch_from_json(c.meta.at("arch")),
                         ckpt::stats_from_json(c.meta.at("stats")), 0);
    ckpt::restore(c.tensors, model.parameters());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ckpt::CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace mirrornet

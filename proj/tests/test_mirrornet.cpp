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

#include <doctest.h>

#include <algorithm>
#include <limits>

#include "mirrornet/checkpoint.hpp"
#include "mirrornet/mirrornet.hpp"
#include "mirrornet/optim.hpp"
#include "test_util.hpp"

using namespace mirrornet;

namespace {

ArchConfig narrow_arch() {
  ArchConfig a;
  a.pre_post_filters = {128, 32, 32};
  a.enc_filters = {32, 16, 9};
  return a;
}

class BrokenPlant final : public Plant {
 public:
  explicit BrokenPlant(bool nan) : nan_(nan) {}
  Tensor<float> synthesize(const Tensor<float>& traj) const override {
    if (nan_) return Tensor<float>(Shape{128, traj.cols() * 5 / 4}, std::numeric_limits<float>::quiet_NaN());
    return Tensor<float>(Shape{128, traj.cols()});
  }
  std::string fingerprint() const override { return "broken"; }
  std::string name() const override { return "broken"; }

 private:
  bool nan_;
};

double median3(double a, double b, double c) { return std::max(std::min(a, b), std::min(std::max(a, b), c)); }

}  // namespace

TEST_CASE("model shapes and inference") {
  MirrorNetModel model(ArchConfig{}, data::nominal_stats(), 1);
  const auto items = data::gen_synthetic(1, 2.0, 1);
  const auto& spec = items[0].spectrogram;
  CHECK(encode(model, spec).shape() == Shape{9, 200});
  CHECK(decode(model, encode(model, spec)).shape() == spec.shape());
  CHECK(infer_articulation(model, spec).shape() == Shape{9, 200});
  CHECK(infer_articulation(model, spec) == infer_articulation(model, spec));
  CHECK_THROWS_AS(encode(model, Tensor<float>(Shape{128, 251})), ShapeError);
  CHECK_THROWS_AS(decode(model, Tensor<float>(Shape{9, 201})), ShapeError);
  CHECK_THROWS_AS(MirrorNetModel(ArchConfig{}, data::ChannelStats{{0.0}, {1.0}}, 1), std::invalid_argument);

  audio::Wav wav;
  wav.samples.assign(32000, 0.0f);
  for (std::size_t i = 0; i < wav.samples.size(); ++i) wav.samples[i] = 0.1f * std::sin(0.05f * i);
  CHECK(infer_articulation(model, wav).shape() == Shape{9, 200});
}

TEST_CASE("latent statistics source") {
  const auto items = data::gen_synthetic(4, 0.4, 2);
  CHECK(latent_stats(items, nullptr, 9) == data::ChannelStats::fit([&] {
          std::vector<Tensor<float>> t;
          for (const auto& u : items) t.push_back(*u.trajectory);
          return t;
        }()));
  CHECK(latent_stats({}, nullptr, 9) == data::nominal_stats());
  OraclePlant oracle;
  CHECK(latent_stats({}, &oracle, 9) == data::nominal_stats());
  auto stats = data::nominal_stats();
  stats.mean[0] = 0.25;
  SynthPlant plant(synth::SynthModel(narrow_arch(), synth::Variant::kFT, stats, 1));
  CHECK(latent_stats({}, &plant, 9) == stats);
}

TEST_CASE("plants") {
  const auto items = data::gen_synthetic(1, 0.4, 3);
  OraclePlant oracle;
  CHECK(oracle.synthesize(*items[0].trajectory) == items[0].spectrogram);
  data::OracleParams other;
  other.noise = 0.02;
  CHECK(OraclePlant(other).fingerprint() != oracle.fingerprint());
  CHECK(OraclePlant().fingerprint() == oracle.fingerprint());

  synth::SynthModel six(narrow_arch(), synth::Variant::kFT,
                        data::ChannelStats{{0, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1}}, 1);
  SynthPlant plant(six);
  CHECK(plant.synthesize(*items[0].trajectory).shape() == Shape{128, 50});
}

TEST_CASE("init phase trains each network on its own loss") {
  const auto items = data::gen_synthetic(8, 0.4, 4);
  MirrorNetModel model(ArchConfig{}, latent_stats(items, nullptr, 9), 4);
  InitPhaseOptions opts;
  opts.epochs = 80;
  opts.batch = 4;
  const auto report = init_phase(model, items, {}, opts);
  REQUIRE(report.history.size() == 80);
  CHECK(report.history.back().e_c <= 0.2 * report.history.front().e_c);
  CHECK(report.history.back().e_d < report.history.front().e_d);

  auto unsupervised = items;
  unsupervised[0].trajectory.reset();
  CHECK_THROWS_AS(init_phase(model, unsupervised, {}, opts), data::DataError);
  CHECK_THROWS_AS(init_phase(model, {}, {}, opts), data::DataError);
}

TEST_CASE("init phase losses share no gradients") {
  // Swapping in a different decoder must not change the trained encoder, and
  // swapping the encoder must not change the trained decoder.
  const auto items = data::gen_synthetic(4, 0.4, 10);
  const auto stats = latent_stats(items, nullptr, 9);
  MirrorNetModel a(narrow_arch(), stats, 1), b = a, c = a;
  b.decoder = MirrorNetModel(narrow_arch(), stats, 2).decoder;
  c.encoder = MirrorNetModel(narrow_arch(), stats, 3).encoder;
  InitPhaseOptions opts;
  opts.epochs = 3;
  opts.batch = 2;
  for (auto* m : {&a, &b, &c}) init_phase(*m, items, {}, opts);
  CHECK(ckpt::params_hash(a.encoder_parameters()) == ckpt::params_hash(b.encoder_parameters()));
  CHECK(ckpt::params_hash(a.decoder_parameters()) == ckpt::params_hash(c.decoder_parameters()));
  CHECK(ckpt::params_hash(a.decoder_parameters()) != ckpt::params_hash(b.decoder_parameters()));
}

TEST_CASE("init phase with dev items keeps the best dev weights") {
  const auto items = data::gen_synthetic(4, 0.4, 5);
  const auto dev = data::gen_synthetic(2, 0.4, 6);
  MirrorNetModel model(narrow_arch(), latent_stats(items, nullptr, 9), 5);
  InitPhaseOptions opts;
  opts.epochs = 8;
  opts.batch = 2;
  const auto report = init_phase(model, items, dev, opts);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : report.history) best = std::min(best, e.dev_e_c);
  double acc = 0.0;
  for (const auto& u : dev) {
    const auto z = encode(model, u.spectrogram);
    const auto l = model.stats.normalize(*u.trajectory);
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += (double(z[i]) - l[i]) * (double(z[i]) - l[i]);
    acc += s / z.size();
  }
  CHECK(acc / dev.size() == doctest::Approx(best).epsilon(1e-5));
}

namespace {

struct StageWatch {
  std::size_t stages = 0;
  std::size_t violations = 0;
  std::string enc_before, dec_before;

  // A stage must change its own network and leave the other bit-identical.
  void attach(LearningPhaseOptions& opts, const MirrorNetModel& model) {
    opts.on_stage = [this, &model](std::size_t, Stage stage, bool done) {
      auto m = model;
      const auto enc = ckpt::params_hash(m.encoder_parameters());
      const auto dec = ckpt::params_hash(m.decoder_parameters());
      if (!done) {
        enc_before = enc;
        dec_before = dec;
        return;
      }
      ++stages;
      const bool own_changed = stage == Stage::kDecoder ? dec != dec_before : enc != enc_before;
      const bool other_kept = stage == Stage::kDecoder ? enc == enc_before : dec == dec_before;
      violations += !own_changed || !other_kept;
    };
  }
};

}  // namespace

TEST_CASE("toy learning phase: stage isolation and falling losses") {
  const auto items = data::gen_synthetic(8, 0.4, 7);
  MirrorNetModel model(ArchConfig{}, data::nominal_stats(), 7);
  OraclePlant plant;

  LearningPhaseOptions opts;
  opts.lr_enc = opts.lr_dec = 1e-3;
  opts.iterations = 20;
  opts.batch = 4;
  StageWatch watch;
  watch.attach(opts, model);
  std::vector<double> e_c, e_d;
  opts.on_epoch = [&](const StageLog& log) {
    CHECK(log.e_c >= 0.0);
    CHECK(log.e_d >= 0.0);
    if (log.epoch != opts.decoder_epochs) return;
    if (log.stage == Stage::kDecoder) e_d.push_back(log.e_d);
    if (log.stage == Stage::kEncoder) e_c.push_back(log.e_c);
  };
  const auto report = learning_phase(model, items, plant, opts);
  CHECK(watch.stages == 40);
  CHECK(watch.violations == 0);
  CHECK(report.plant_before == report.plant_after);
  CHECK(report.history.size() == 20 * (opts.decoder_epochs + opts.encoder_epochs));

  const auto& first = report.history.front();
  const auto& last = report.history.back();
  CHECK(last.e_c <= 0.5 * first.e_c);
  CHECK(last.e_d <= 0.5 * first.e_d);
  REQUIRE(e_c.size() == 20);
  REQUIRE(e_d.size() == 20);
  for (const auto* series : {&e_c, &e_d}) {
    std::vector<double> smooth;
    for (std::size_t i = 1; i + 1 < series->size(); ++i) {
      smooth.push_back(median3((*series)[i - 1], (*series)[i], (*series)[i + 1]));
    }
    std::size_t rises = 0;
    for (std::size_t i = 1; i < smooth.size(); ++i) rises += smooth[i] > smooth[i - 1] * 1.05;
    CHECK(rises == 0);
  }
}

TEST_CASE("learning phase leaves a synthesizer plant bit-identical") {
  const auto items = data::gen_synthetic(4, 0.4, 8);
  MirrorNetModel model(narrow_arch(), data::nominal_stats(), 8);
  synth::SynthModel g(narrow_arch(), synth::Variant::kFT, data::nominal_stats(), 9);
  SynthPlant plant(g);
  auto g_params = g.parameters();
  const std::string g_hash = ckpt::params_hash(g_params);

  LearningPhaseOptions opts;
  opts.lr_enc = opts.lr_dec = 1e-3;
  opts.iterations = 3;
  opts.batch = 2;
  StageWatch watch;
  watch.attach(opts, model);
  const auto report = learning_phase(model, items, plant, opts);
  CHECK(watch.stages == 6);
  CHECK(watch.violations == 0);
  CHECK(report.plant_before == report.plant_after);
  auto g_after = plant.model();
  CHECK(ckpt::params_hash(g_after.parameters()) == g_hash);
}

TEST_CASE("learning phase errors") {
  const auto items = data::gen_synthetic(2, 0.4, 9);
  MirrorNetModel model(narrow_arch(), data::nominal_stats(), 9);
  LearningPhaseOptions opts;
  opts.iterations = 1;
  opts.decoder_epochs = opts.encoder_epochs = 1;
  CHECK_THROWS_AS(learning_phase(model, items, BrokenPlant(false), opts), ShapeError);
  CHECK_THROWS_AS(learning_phase(model, items, BrokenPlant(true), opts), nn::NonFiniteGradient);
  CHECK_THROWS_AS(learning_phase(model, {}, OraclePlant(), opts), data::DataError);
}

TEST_CASE("stage log json") {
  StageLog log{3, Stage::kEncoder, 2, 0.5, 0.25, 1e-3};
  const auto j = to_json(log);
  CHECK(j["iteration"] == 3);
  CHECK(j["stage"] == "encoder");
  CHECK(j["e_c"] == 0.5);
}

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

#include "mirrornet/config.hpp"

#include <fstream>
#include <set>

#include "mirrornet/checkpoint.hpp"

namespace mirrornet::config {
namespace {

using nlohmann::json;

// Reads one section of a JSON object, rejecting keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }
  // Call once every expected key has been read.
  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!used_.count(key)) throw ConfigError("unknown key '" + key_path(key) + "'");
    }
  }
  template <typename T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw type_error(key, "a number");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_unsigned()) throw type_error(key, "a non-negative integer");
    } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
      if (!v.is_array()) throw type_error(key, "an array of integers");
      for (const auto& e : v) {
        if (!e.is_number_unsigned()) throw type_error(key, "an array of integers");
      }
    }
    out = v.get<T>();
  }

  const json* child(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  ConfigError type_error(const std::string& key, const char* what) const {
    return ConfigError("'" + key_path(key) + "' must be " + what);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

ArchConfig read_arch(const json& j, const std::string& path) {
  ArchConfig a;
  Section s(j, path);
  s.get("latent_channels", a.latent_channels);
  s.get("spec_channels", a.spec_channels);
  s.get("pre_post_filters", a.pre_post_filters);
  s.get("enc_filters", a.enc_filters);
  s.get("dilations", a.dilations);
  s.get("kernel", a.kernel);
  std::vector<std::size_t> up_down{a.up, a.down};
  s.get("up_down", up_down);
  if (up_down.size() != 2) throw ConfigError("'" + s.key_path("up_down") + "' needs two entries");
  a.up = up_down[0];
  a.down = up_down[1];
  s.finish();
  return a;
}

audio::AudSpecConfig read_audspec(const json& j, const std::string& path) {
  audio::AudSpecConfig a;
  Section s(j, path);
  s.get("channels", a.channels);
  s.get("frame_rate", a.frame_rate);
  s.get("fmin", a.fmin);
  s.get("fmax", a.fmax);
  s.finish();
  return a;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

void RunConfig::validate() const {
  try {
    model.validate();
    audspec.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  require(model.spec_channels == audspec.channels,
          "model.spec_channels must equal audspec.channels");
  require(train_synth.lr > 0 && init.lr > 0 && learn.lr_enc > 0 && learn.lr_dec > 0,
          "learning rates must be positive");
  for (double d : {train_synth.decay, init.decay, learn.decay}) {
    require(d > 0 && d <= 1, "decay factors must lie in (0, 1]");
  }
  require(train_synth.batch_ft > 0 && train_synth.batch_lt > 0 && init.batch > 0 &&
              learn.batch > 0,
          "batch sizes must be positive");
  require(train_synth.patience > 0 && init.patience > 0 && learn.patience > 0,
          "patience must be positive");
  require(train_synth.epochs > 0 && init.epochs > 0, "epoch budgets must be positive");
  require(learn.decoder_epochs > 0 && learn.encoder_epochs > 0 && learn.iterations > 0,
          "learn.stage_epochs and learn.iterations must be positive");
}

RunConfig from_json(const json& j) {
  RunConfig cfg;
  {
    Section root(j, "");
    if (const auto* m = root.child("model")) cfg.model = read_arch(*m, "model");
    if (const auto* a = root.child("audspec")) cfg.audspec = read_audspec(*a, "audspec");
    if (const auto* t = root.child("train_synth")) {
      Section s(*t, "train_synth");
      s.get("lr", cfg.train_synth.lr);
      if (const auto* b = s.child("batch")) {
        Section bs(*b, "train_synth.batch");
        bs.get("ft", cfg.train_synth.batch_ft);
        bs.get("lt", cfg.train_synth.batch_lt);
        bs.finish();
      }
      s.get("decay", cfg.train_synth.decay);
      s.get("patience", cfg.train_synth.patience);
      s.get("epochs", cfg.train_synth.epochs);
      s.finish();
    }
    if (const auto* i = root.child("init")) {
      Section s(*i, "init");
      s.get("lr", cfg.init.lr);
      s.get("epochs", cfg.init.epochs);
      s.get("batch", cfg.init.batch);
      s.get("decay", cfg.init.decay);
      s.get("patience", cfg.init.patience);
      s.finish();
    }
    if (const auto* l = root.child("learn")) {
      Section s(*l, "learn");
      s.get("lr_enc", cfg.learn.lr_enc);
      s.get("lr_dec", cfg.learn.lr_dec);
      std::vector<std::size_t> stages{cfg.learn.decoder_epochs, cfg.learn.encoder_epochs};
      s.get("stage_epochs", stages);
      require(stages.size() == 2, "'learn.stage_epochs' needs two entries");
      cfg.learn.decoder_epochs = stages[0];
      cfg.learn.encoder_epochs = stages[1];
      s.get("iterations", cfg.learn.iterations);
      s.get("batch", cfg.learn.batch);
      s.get("decay", cfg.learn.decay);
      s.get("patience", cfg.learn.patience);
      s.finish();
    }
    root.get("seed", cfg.seed);
    root.finish();
  }
  cfg.validate();
  return cfg;
}

json arch_to_json(const ArchConfig& a) {
  return {{"latent_channels", a.latent_channels},
          {"spec_channels", a.spec_channels},
          {"pre_post_filters", a.pre_post_filters},
          {"enc_filters", a.enc_filters},
          {"dilations", a.dilations},
          {"kernel", a.kernel},
          {"up_down", {a.up, a.down}}};
}

ArchConfig arch_from_json(const json& j) {
  auto a = read_arch(j, "model");
  a.validate();
  return a;
}

json audspec_to_json(const audio::AudSpecConfig& a) {
  return {{"channels", a.channels}, {"frame_rate", a.frame_rate}, {"fmin", a.fmin},
          {"fmax", a.fmax}};
}

audio::AudSpecConfig audspec_from_json(const json& j) { return read_audspec(j, "audspec"); }

json to_json(const RunConfig& cfg) {
  json j;
  j["model"] = arch_to_json(cfg.model);
  j["audspec"] = audspec_to_json(cfg.audspec);
  j["train_synth"] = {{"lr", cfg.train_synth.lr},
                      {"batch", {{"ft", cfg.train_synth.batch_ft}, {"lt", cfg.train_synth.batch_lt}}},
                      {"decay", cfg.train_synth.decay},
                      {"patience", cfg.train_synth.patience},
                      {"epochs", cfg.train_synth.epochs}};
  j["init"] = {{"lr", cfg.init.lr},
               {"epochs", cfg.init.epochs},
               {"batch", cfg.init.batch},
               {"decay", cfg.init.decay},
               {"patience", cfg.init.patience}};
  j["learn"] = {{"lr_enc", cfg.learn.lr_enc},
                {"lr_dec", cfg.learn.lr_dec},
                {"stage_epochs", {cfg.learn.decoder_epochs, cfg.learn.encoder_epochs}},
                {"iterations", cfg.learn.iterations},
                {"batch", cfg.learn.batch},
                {"decay", cfg.learn.decay},
                {"patience", cfg.learn.patience}};
  j["seed"] = cfg.seed;
  return j;
}

RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return from_json(j);
}

void save(const std::filesystem::path& path, const RunConfig& cfg) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(cfg).dump(2) << '\n';
}

std::string hash(const RunConfig& cfg) { return ckpt::sha256_hex(to_json(cfg).dump()); }

}  // namespace mirrornet::config

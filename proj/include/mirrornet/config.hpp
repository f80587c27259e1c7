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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "mirrornet/audfront.hpp"
#include "mirrornet/network.hpp"

namespace mirrornet::config {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TrainSynthConfig {
  double lr = 1e-3;
  std::size_t batch_ft = 16;
  std::size_t batch_lt = 64;
  double decay = 0.5;
  std::size_t patience = 5;
  std::size_t epochs = 100;

  bool operator==(const TrainSynthConfig&) const = default;
};

struct InitConfig {
  double lr = 1e-3;
  std::size_t epochs = 300;
  std::size_t batch = 16;
  double decay = 0.5;
  std::size_t patience = 5;

  bool operator==(const InitConfig&) const = default;
};

struct LearnConfig {
  double lr_enc = 1e-6;
  double lr_dec = 1e-6;
  std::size_t decoder_epochs = 5;
  std::size_t encoder_epochs = 5;
  std::size_t iterations = 5;
  std::size_t batch = 16;
  double decay = 0.5;
  std::size_t patience = 5;

  bool operator==(const LearnConfig&) const = default;
};

struct RunConfig {
  ArchConfig model;
  audio::AudSpecConfig audspec;
  TrainSynthConfig train_synth;
  InitConfig init;
  LearnConfig learn;
  std::uint64_t seed = 0;

  // Throws ConfigError for the first invalid value.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// Missing keys keep their defaults; unknown keys and wrongly typed values
// throw ConfigError naming the offending key path.
RunConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);
RunConfig load(const std::filesystem::path& path);
void save(const std::filesystem::path& path, const RunConfig& cfg);

// SHA-256 of the canonical (sorted-key, compact) JSON form.
std::string hash(const RunConfig& cfg);

nlohmann::json arch_to_json(const ArchConfig& arch);
ArchConfig arch_from_json(const nlohmann::json& j);
nlohmann::json audspec_to_json(const audio::AudSpecConfig& cfg);
audio::AudSpecConfig audspec_from_json(const nlohmann::json& j);

}  // namespace mirrornet::config

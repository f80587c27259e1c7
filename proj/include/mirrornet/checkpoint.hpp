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

// Portable parameter files.
//
//   "MNC1" | u32 LE header length | JSON header | f32 LE payload | u32 LE CRC32
//
// The header lists every tensor (name, shape, dtype) in payload order
// together with model metadata; the CRC covers header and payload.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mirrornet/data.hpp"
#include "mirrornet/layers.hpp"

namespace mirrornet::ckpt {

inline constexpr int kFormatVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The stored CRC does not match the file contents.
class CorruptCheckpoint : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

struct Checkpoint {
  std::string model_kind;
  // Free-form fields stored next to the tensor manifest: architecture,
  // normalization stats, config hash, seed, metrics.
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;
};

void save(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws CorruptCheckpoint on CRC mismatch and CheckpointError on any other
// structural problem.
Checkpoint load(const std::filesystem::path& path);

std::vector<NamedTensor> snapshot(const nn::ParamList<float>& params);
// Copies stored tensors into params; names and shapes must match in order.
void restore(const std::vector<NamedTensor>& tensors, const nn::ParamList<float>& params);

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(const std::string& text);
// SHA-256 over parameter names, shapes and raw values.
std::string params_hash(const nn::ParamList<float>& params);

nlohmann::json stats_to_json(const data::ChannelStats& stats);
data::ChannelStats stats_from_json(const nlohmann::json& j);

}  // namespace mirrornet::ckpt

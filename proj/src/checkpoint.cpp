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

#include "mirrornet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <openssl/evp.h>
#include <zlib.h>

namespace mirrornet::ckpt {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'M', 'N', 'C', '1'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint32_t crc32_of(const unsigned char* p, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = ::crc32(crc, p, chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("sha256: OpenSSL initialisation failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* p, std::size_t n) { EVP_DigestUpdate(ctx_, p, n); }

  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md, &len);
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(kDigits[md[i] >> 4]);
      out.push_back(kDigits[md[i] & 15]);
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

void save(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json header;
  header["format_version"] = kFormatVersion;
  header["model_kind"] = ckpt.model_kind;
  json layers = json::array();
  std::size_t floats = 0;
  for (const auto& t : ckpt.tensors) {
    layers.push_back({{"name", t.name}, {"shape", t.value.shape()}, {"dtype", "f32"}});
    floats += t.value.size();
  }
  header["layers"] = std::move(layers);
  header["meta"] = ckpt.meta;
  const std::string text = header.dump();

  std::vector<unsigned char> bytes(kMagic, kMagic + 4);
  bytes.reserve(12 + text.size() + 4 * floats);
  put_u32(bytes, static_cast<std::uint32_t>(text.size()));
  bytes.insert(bytes.end(), text.begin(), text.end());
  for (const auto& t : ckpt.tensors) {
    for (float v : t.value.data()) put_u32(bytes, std::bit_cast<std::uint32_t>(v));
  }
  put_u32(bytes, crc32_of(bytes.data() + 8, bytes.size() - 8));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed for " + path.string());
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(where + "not a MirrorNet checkpoint");
  }
  const std::size_t header_len = get_u32(bytes.data() + 4);
  if (8 + header_len + 4 > bytes.size()) throw CheckpointError(where + "truncated header");
  const std::uint32_t stored = get_u32(bytes.data() + bytes.size() - 4);
  if (crc32_of(bytes.data() + 8, bytes.size() - 12) != stored) {
    throw CorruptCheckpoint(where + "CRC32 mismatch");
  }

  json header;
  try {
    header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    throw CheckpointError(where + "bad header: " + e.what());
  }
  Checkpoint ckpt;
  try {
    if (header.at("format_version").get<int>() != kFormatVersion) {
      throw CheckpointError(where + "unsupported format version");
    }
    ckpt.model_kind = header.at("model_kind").get<std::string>();
    ckpt.meta = header.value("meta", json::object());
    const unsigned char* p = bytes.data() + 8 + header_len;
    const unsigned char* end = bytes.data() + bytes.size() - 4;
    for (const auto& layer : header.at("layers")) {
      if (layer.at("dtype").get<std::string>() != "f32") {
        throw CheckpointError(where + "unsupported dtype");
      }
      Tensor<float> value(layer.at("shape").get<Shape>());
      if (static_cast<std::size_t>(end - p) < 4 * value.size()) {
        throw CheckpointError(where + "payload shorter than the layer manifest");
      }
      for (float& v : value.data()) {
        v = std::bit_cast<float>(get_u32(p));
        p += 4;
      }
      ckpt.tensors.push_back({layer.at("name").get<std::string>(), std::move(value)});
    }
    if (p != end) throw CheckpointError(where + "payload longer than the layer manifest");
  } catch (const json::exception& e) {
    throw CheckpointError(where + "bad header: " + e.what());
  } catch (const ShapeError& e) {
    throw CheckpointError(where + e.what());
  }
  return ckpt;
}

std::vector<NamedTensor> snapshot(const nn::ParamList<float>& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back({p.name, p.var->value()});
  return out;
}

void restore(const std::vector<NamedTensor>& tensors, const nn::ParamList<float>& params) {
  if (tensors.size() != params.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(tensors.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (tensors[i].name != params[i].name || tensors[i].value.shape() != params[i].var->shape()) {
      throw CheckpointError("checkpoint tensor " + tensors[i].name + " " +
                            shape_str(tensors[i].value.shape()) + " does not match " +
                            params[i].name + " " + shape_str(params[i].var->shape()));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].var->mutable_value() = tensors[i].value;
  }
}

std::string sha256_hex(std::span<const unsigned char> bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_hex(const std::string& text) {
  Sha256 h;
  h.update(text.data(), text.size());
  return h.hex();
}

std::string params_hash(const nn::ParamList<float>& params) {
  Sha256 h;
  for (const auto& p : params) {
    h.update(p.name.data(), p.name.size() + 1);
    for (std::size_t extent : p.var->shape()) {
      const auto e = static_cast<std::uint64_t>(extent);
      h.update(&e, sizeof e);
    }
    const auto& v = p.var->value();
    h.update(v.raw(), v.size() * sizeof(float));
  }
  return h.hex();
}

json stats_to_json(const data::ChannelStats& stats) {
  return {{"mean", stats.mean}, {"std", stats.stddev}};
}

data::ChannelStats stats_from_json(const json& j) {
  data::ChannelStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("std").get<std::vector<double>>();
  if (s.mean.size() != s.stddev.size() || s.mean.empty()) {
    throw CheckpointError("normalization stats are inconsistent");
  }
  return s;
}

}  // namespace mirrornet::ckpt

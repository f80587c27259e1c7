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

#include "mirrornet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mirrornet/random.hpp"
#include "mirrornet/wav.hpp"

namespace mirrornet::data {
namespace {

using nlohmann::json;

constexpr std::string_view kTrajectoryHeader =
    "time_s,LA,LP,TBCL,TBCD,TTCL,TTCD,ap,per,pitch_hz";

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

double parse_number(std::string_view field, const fs::path& path, std::size_t line) {
  field = trim(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": malformed number '" +
                    std::string(field) + "'");
  }
  return v;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

// Shortest text that reads back as the same float.
std::string exact(float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string sig6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

bool is_pitch_row(std::size_t channel, std::size_t channels) {
  return channels == kNumChannels && channel == kPitchChannel;
}

}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
    case Split::kInit: return "init";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  if (name == "init") return Split::kInit;
  throw std::invalid_argument("unknown split '" + std::string(name) +
                              "' (expected train, dev, test or init)");
}

Tensor<float> read_trajectory_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kTrajectoryHeader) {
    throw DataError(path.string() + ": expected header '" + std::string(kTrajectoryHeader) + "'");
  }
  std::vector<std::vector<float>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != kNumChannels + 1) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(kNumChannels + 1) + " columns");
    }
    const double t = parse_number(fields[0], path, lineno);
    const double expected = static_cast<double>(rows.size()) / kTrajectoryRate;
    if (std::abs(t - expected) > 1e-3) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": time_s does not follow the 100 Hz grid");
    }
    std::vector<float> row(kNumChannels);
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      row[c] = static_cast<float>(parse_number(fields[c + 1], path, lineno));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + ": no trajectory rows");
  Tensor<float> out(Shape{kNumChannels, rows.size()});
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t c = 0; c < kNumChannels; ++c) out.at(c, t) = rows[t][c];
  }
  return out;
}

void write_trajectory_csv(const fs::path& path, const Tensor<float>& traj) {
  if (traj.rank() != 2 || traj.rows() != kNumChannels) {
    throw ShapeError("write_trajectory_csv: expected 9 x k, got " + shape_str(traj.shape()));
  }
  auto out = open_out(path);
  out << kTrajectoryHeader << '\n';
  for (std::size_t t = 0; t < traj.cols(); ++t) {
    char tbuf[32];
    std::snprintf(tbuf, sizeof tbuf, "%.2f", static_cast<double>(t) / kTrajectoryRate);
    out << tbuf;
    for (std::size_t c = 0; c < kNumChannels; ++c) out << ',' << exact(traj.at(c, t));
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

Tensor<float> read_spectrogram_csv(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<float>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (!rows.empty() && fields.size() != rows.front().size()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": ragged row");
    }
    std::vector<float> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      row[c] = static_cast<float>(parse_number(fields[c], path, lineno));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + ": no spectrogram rows");
  Tensor<float> out(Shape{rows.front().size(), rows.size()});
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t c = 0; c < rows[t].size(); ++c) out.at(c, t) = rows[t][c];
  }
  return out;
}

void write_spectrogram_csv(const fs::path& path, const Tensor<float>& spec) {
  if (spec.rank() != 2) throw ShapeError("write_spectrogram_csv: expected channels x frames");
  auto out = open_out(path);
  for (std::size_t t = 0; t < spec.cols(); ++t) {
    for (std::size_t c = 0; c < spec.rows(); ++c) {
      if (c) out << ',';
      out << sig6(spec.at(c, t));
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<UtteranceItem> load_manifest(const fs::path& path) {
  json doc;
  {
    auto in = open_in(path);
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": invalid JSON: " + e.what());
    }
  }
  if (!doc.is_array()) throw DataError(path.string() + ": manifest must be a JSON array");
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  auto resolve = [&](const std::string& p) {
    const fs::path rel(p);
    return (rel.is_absolute() ? rel : base / rel).lexically_normal();
  };

  static const std::set<std::string> kKnown{"id", "speaker", "wav", "trajectory",
                                            "spectrogram", "split"};
  std::vector<UtteranceItem> items;
  std::vector<std::string> problems;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& entry = doc[i];
    std::string where = "item " + std::to_string(i);
    std::vector<std::string> issues;
    UtteranceItem item;
    if (!entry.is_object()) {
      problems.push_back(where + ": not an object");
      continue;
    }
    for (const auto& [key, value] : entry.items()) {
      if (!kKnown.count(key)) issues.push_back("unknown field '" + key + "'");
      else if (!value.is_string()) issues.push_back("field '" + key + "' must be a string");
    }
    if (!issues.empty()) {
      for (const auto& msg : issues) problems.push_back(where + ": " + msg);
      continue;
    }
    item.id = entry.value("id", "");
    if (!item.id.empty()) where += " (" + item.id + ")";
    item.speaker = entry.value("speaker", "");
    if (item.id.empty()) issues.push_back("missing id");
    else if (!seen.insert(item.id).second) issues.push_back("duplicate id");
    if (item.speaker.empty()) issues.push_back("missing speaker");
    try {
      item.split = parse_split(entry.value("split", ""));
    } catch (const std::invalid_argument& e) {
      issues.push_back(e.what());
    }
    for (const char* key : {"wav", "trajectory", "spectrogram"}) {
      if (!entry.contains(key)) continue;
      const fs::path p = resolve(entry[key].get<std::string>());
      if (!fs::exists(p)) issues.push_back(std::string(key) + " file not found: " + p.string());
      if (std::string_view(key) == "wav") item.wav = p;
      else if (std::string_view(key) == "trajectory") item.trajectory = p;
      else item.spectrogram = p;
    }
    if (!item.wav && !item.spectrogram) issues.push_back("needs a wav or spectrogram file");

    if (issues.empty() && item.trajectory) {
      try {
        const auto traj = read_trajectory_csv(*item.trajectory);
        const double traj_s = static_cast<double>(traj.cols()) / kTrajectoryRate;
        double audio_s = -1.0;
        if (item.wav) {
          const auto wav = audio::read_wav(*item.wav);
          audio_s = static_cast<double>(wav.samples.size()) / wav.sample_rate;
        } else {
          const auto spec = read_spectrogram_csv(*item.spectrogram);
          audio_s = static_cast<double>(spec.cols()) / 125.0;
        }
        if (std::abs(traj_s - audio_s) >= 0.02) {
          issues.push_back("trajectory lasts " + sig6(traj_s) + " s but audio lasts " +
                           sig6(audio_s) + " s");
        }
      } catch (const std::exception& e) {
        issues.push_back(e.what());
      }
    }
    for (const auto& msg : issues) problems.push_back(where + ": " + msg);
    if (issues.empty()) items.push_back(std::move(item));
  }
  if (!problems.empty()) {
    std::string msg = path.string() + ": invalid manifest";
    for (const auto& p : problems) msg += "\n  " + p;
    throw DataError(msg);
  }
  return items;
}

void save_manifest(const fs::path& path, const std::vector<UtteranceItem>& items) {
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  auto rel = [&](const fs::path& p) {
    const auto r = p.lexically_proximate(base);
    return r.generic_string();
  };
  json doc = json::array();
  for (const auto& item : items) {
    json entry;
    entry["id"] = item.id;
    entry["speaker"] = item.speaker;
    entry["split"] = std::string(split_name(item.split));
    if (item.wav) entry["wav"] = rel(*item.wav);
    if (item.trajectory) entry["trajectory"] = rel(*item.trajectory);
    if (item.spectrogram) entry["spectrogram"] = rel(*item.spectrogram);
    doc.push_back(std::move(entry));
  }
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

std::vector<Utterance> load_utterances(const std::vector<UtteranceItem>& items,
                                       std::size_t max_latent_frames,
                                       const audio::AudSpecConfig& cfg) {
  std::vector<Utterance> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    Utterance u{item.id, item.speaker, item.split, {}, std::nullopt};
    Tensor<float> spec;
    if (item.spectrogram) {
      spec = read_spectrogram_csv(*item.spectrogram);
    } else {
      const auto wav = audio::read_wav(*item.wav);
      spec = audio::auditory_spectrogram(wav.samples, wav.sample_rate, cfg).values;
    }
    if (spec.rows() != cfg.channels) {
      throw DataError(item.id + ": spectrogram has " + std::to_string(spec.rows()) +
                      " channels, expected " + std::to_string(cfg.channels));
    }
    std::size_t k = spec.cols() * 4 / 5;
    std::optional<Tensor<float>> traj;
    if (item.trajectory) {
      traj = read_trajectory_csv(*item.trajectory);
      k = std::min(k, traj->cols());
    }
    k = std::min(k, max_latent_frames);
    k -= k % 4;
    if (k == 0) throw DataError(item.id + ": shorter than one latent block");
    const std::size_t frames = k * 5 / 4;
    u.spectrogram = Tensor<float>(Shape{spec.rows(), frames});
    for (std::size_t c = 0; c < spec.rows(); ++c) {
      std::copy_n(spec.row(c).begin(), frames, u.spectrogram.row(c).begin());
    }
    if (traj) {
      Tensor<float> cropped(Shape{traj->rows(), k});
      for (std::size_t c = 0; c < traj->rows(); ++c) {
        std::copy_n(traj->row(c).begin(), k, cropped.row(c).begin());
      }
      u.trajectory = std::move(cropped);
    }
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<Utterance> select(const std::vector<Utterance>& all, Split split) {
  std::vector<Utterance> out;
  for (const auto& u : all) {
    if (u.split == split) out.push_back(u);
  }
  return out;
}

ChannelStats ChannelStats::fit(std::span<const Tensor<float>> trajectories) {
  if (trajectories.empty()) throw DataError("ChannelStats::fit: no trajectories");
  const std::size_t channels = trajectories.front().rows();
  ChannelStats stats;
  stats.mean.assign(channels, 0.0);
  stats.stddev.assign(channels, 0.0);
  std::vector<double> sum(channels, 0.0), sq(channels, 0.0);
  std::size_t count = 0;
  for (const auto& traj : trajectories) {
    if (traj.rows() != channels) throw ShapeError("ChannelStats::fit: channel count differs");
    for (std::size_t c = 0; c < channels; ++c) {
      const double s = is_pitch_row(c, channels) ? 1.0 / kPitchScale : 1.0;
      for (float v : traj.row(c)) sum[c] += v * s;
    }
    count += traj.cols();
  }
  for (std::size_t c = 0; c < channels; ++c) stats.mean[c] = sum[c] / static_cast<double>(count);
  for (const auto& traj : trajectories) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double s = is_pitch_row(c, channels) ? 1.0 / kPitchScale : 1.0;
      for (float v : traj.row(c)) {
        const double d = v * s - stats.mean[c];
        sq[c] += d * d;
      }
    }
  }
  for (std::size_t c = 0; c < channels; ++c) {
    stats.stddev[c] = std::sqrt(sq[c] / static_cast<double>(count));
  }
  return stats;
}

template <typename T>
Tensor<T> ChannelStats::normalize(const Tensor<T>& traj) const {
  if (traj.rank() != 2 || traj.rows() != channels()) {
    throw ShapeError("normalize: expected " + std::to_string(channels()) + " x k, got " +
                     shape_str(traj.shape()));
  }
  Tensor<T> out(traj.shape());
  for (std::size_t c = 0; c < channels(); ++c) {
    const double s = is_pitch_row(c, channels()) ? 1.0 / kPitchScale : 1.0;
    const double sd = std::max(stddev[c], kStdFloor);
    for (std::size_t t = 0; t < traj.cols(); ++t) {
      out.at(c, t) = static_cast<T>((static_cast<double>(traj.at(c, t)) * s - mean[c]) / sd);
    }
  }
  return out;
}

template <typename T>
Tensor<T> ChannelStats::denormalize(const Tensor<T>& normalized) const {
  if (normalized.rank() != 2 || normalized.rows() != channels()) {
    throw ShapeError("denormalize: expected " + std::to_string(channels()) + " x k, got " +
                     shape_str(normalized.shape()));
  }
  Tensor<T> out(normalized.shape());
  for (std::size_t c = 0; c < channels(); ++c) {
    const double s = is_pitch_row(c, channels()) ? kPitchScale : 1.0;
    const double sd = std::max(stddev[c], kStdFloor);
    for (std::size_t t = 0; t < normalized.cols(); ++t) {
      out.at(c, t) = static_cast<T>((static_cast<double>(normalized.at(c, t)) * sd + mean[c]) * s);
    }
  }
  return out;
}

template Tensor<float> ChannelStats::normalize(const Tensor<float>&) const;
template Tensor<double> ChannelStats::normalize(const Tensor<double>&) const;
template Tensor<float> ChannelStats::denormalize(const Tensor<float>&) const;
template Tensor<double> ChannelStats::denormalize(const Tensor<double>&) const;

ChannelStats nominal_stats() {
  ChannelStats s;
  s.mean.assign(kNumChannels, 0.0);
  s.stddev.assign(kNumChannels, 0.5);
  s.mean[kApChannel] = 0.35;
  s.stddev[kApChannel] = 0.35;
  s.mean[kPerChannel] = 0.65;
  s.stddev[kPerChannel] = 0.35;
  s.mean[kPitchChannel] = 110.0 / kPitchScale;
  s.stddev[kPitchChannel] = 80.0 / kPitchScale;
  return s;
}

Tensor<float> take_channels(const Tensor<float>& traj, std::size_t channels) {
  if (traj.rank() != 2 || channels == 0 || channels > traj.rows()) {
    throw ShapeError("take_channels: cannot take " + std::to_string(channels) + " rows of " +
                     shape_str(traj.shape()));
  }
  if (channels == traj.rows()) return traj;
  Tensor<float> out(Shape{channels, traj.cols()});
  std::copy_n(traj.data().begin(), channels * traj.cols(), out.data().begin());
  return out;
}

std::map<std::string, Split> assign_speaker_splits(
    std::vector<std::string> speakers, const std::vector<std::pair<Split, double>>& ratios,
    std::uint64_t seed) {
  if (ratios.empty()) throw DataError("split: no splits requested");
  std::sort(speakers.begin(), speakers.end());
  speakers.erase(std::unique(speakers.begin(), speakers.end()), speakers.end());
  double total = 0.0;
  for (const auto& [split, r] : ratios) {
    if (!(r > 0.0)) throw DataError("split: ratios must be positive");
    total += r;
  }
  const std::size_t n = speakers.size();
  std::vector<std::size_t> counts(ratios.size(), 0);
  std::size_t assigned = 0;
  for (std::size_t i = 1; i < ratios.size(); ++i) {
    const double want = static_cast<double>(n) * ratios[i].second / total;
    counts[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(want)));
    assigned += counts[i];
  }
  if (assigned >= n) {
    throw DataError("split: too few speakers (" + std::to_string(n) + ") for " +
                    std::to_string(ratios.size()) + " splits");
  }
  counts[0] = n - assigned;

  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(speakers[i - 1], speakers[rng.below(i)]);
  std::map<std::string, Split> out;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    for (std::size_t j = 0; j < counts[i]; ++j) out[speakers[pos++]] = ratios[i].first;
  }
  return out;
}

std::vector<UtteranceItem> split_by_speaker(std::vector<UtteranceItem> items,
                                            const std::vector<std::pair<Split, double>>& ratios,
                                            std::uint64_t seed) {
  std::vector<std::string> speakers;
  for (const auto& item : items) speakers.push_back(item.speaker);
  const auto assignment = assign_speaker_splits(std::move(speakers), ratios, seed);
  for (auto& item : items) item.split = assignment.at(item.speaker);
  return items;
}

std::vector<std::pair<Split, double>> parse_split_ratios(std::string_view text) {
  std::vector<std::pair<Split, double>> out;
  for (auto field : split_fields(text)) {
    field = trim(field);
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("split ratio '" + std::string(field) + "' needs name=value");
    }
    const auto name = field.substr(0, eq);
    const auto value = field.substr(eq + 1);
    double r = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), r);
    if (ec != std::errc() || ptr != value.data() + value.size() || !(r > 0.0)) {
      throw std::invalid_argument("split ratio for '" + std::string(name) + "' must be positive");
    }
    const Split s = parse_split(name);
    for (const auto& [existing, _] : out) {
      if (existing == s) throw std::invalid_argument("split '" + std::string(name) + "' repeated");
    }
    out.emplace_back(s, r);
  }
  if (out.empty()) throw std::invalid_argument("no split ratios given");
  return out;
}

}  // namespace mirrornet::data

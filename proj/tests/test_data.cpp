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
#include <cmath>
#include <fstream>
#include <set>

#include "mirrornet/data.hpp"
#include "mirrornet/oracle.hpp"
#include "test_util.hpp"

using namespace mirrornet;
using namespace mirrornet::data;
using mirrornet::testing::scratch_dir;

namespace {

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

bool is_local_max(const Tensor<float>& spec, std::size_t c, std::size_t frame) {
  return spec.at(c, frame) > spec.at(c - 1, frame) && spec.at(c, frame) > spec.at(c + 1, frame);
}

std::size_t peak_between(const Tensor<float>& spec, std::size_t frame, double lo_hz, double hi_hz) {
  const audio::Filterbank fb;
  std::size_t best = fb.nearest_channel(lo_hz);
  for (std::size_t c = best; c <= fb.nearest_channel(hi_hz); ++c) {
    if (spec.at(c, frame) > spec.at(best, frame)) best = c;
  }
  return best;
}

}  // namespace

TEST_CASE("split names round trip") {
  for (Split s : {Split::kTrain, Split::kDev, Split::kTest, Split::kInit}) {
    CHECK(parse_split(split_name(s)) == s);
  }
  CHECK_THROWS_AS(parse_split("validation"), std::invalid_argument);
}

TEST_CASE("trajectory and spectrogram CSV round trip") {
  const auto dir = scratch_dir("csv");
  const auto items = gen_synthetic(1, 0.4, 3);
  const Tensor<float>& traj = *items[0].trajectory;
  write_trajectory_csv(dir / "t.csv", traj);
  CHECK(read_trajectory_csv(dir / "t.csv") == traj);
  CHECK(mirrornet::testing::slurp(dir / "t.csv").rfind("time_s,LA,LP,TBCL,TBCD,TTCL,TTCD,ap,per,pitch_hz\n", 0) == 0);

  write_spectrogram_csv(dir / "s.csv", items[0].spectrogram);
  const auto spec = read_spectrogram_csv(dir / "s.csv");
  REQUIRE(spec.shape() == items[0].spectrogram.shape());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    CHECK(std::abs(spec[i] - items[0].spectrogram[i]) <= 1e-5f * std::max(1.0f, std::abs(spec[i])));
  }
}

TEST_CASE("trajectory CSV schema violations") {
  const auto dir = scratch_dir("csv_bad");
  write_text(dir / "hdr.csv", "t,a,b\n0,1,2\n");
  CHECK_THROWS_AS(read_trajectory_csv(dir / "hdr.csv"), DataError);
  write_text(dir / "rate.csv",
             "time_s,LA,LP,TBCL,TBCD,TTCL,TTCD,ap,per,pitch_hz\n"
             "0.00,0,0,0,0,0,0,0,0,0\n0.05,0,0,0,0,0,0,0,0,0\n");
  CHECK_THROWS_AS(read_trajectory_csv(dir / "rate.csv"), DataError);
  write_text(dir / "num.csv",
             "time_s,LA,LP,TBCL,TBCD,TTCL,TTCD,ap,per,pitch_hz\n0.00,0,x,0,0,0,0,0,0,0\n");
  CHECK_THROWS_AS(read_trajectory_csv(dir / "num.csv"), DataError);
  CHECK_THROWS_AS(read_trajectory_csv(dir / "missing.csv"), DataError);
}

TEST_CASE("manifest round trip keeps order and resolves relative paths") {
  const auto dir = scratch_dir("manifest");
  auto items = gen_synthetic(3, 0.4, 5);
  items[1].split = Split::kTest;
  const auto path = write_dataset(dir, items);
  const auto loaded = load_manifest(path);
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded[i].id == items[i].id);
    CHECK(loaded[i].split == items[i].split);
    REQUIRE(loaded[i].spectrogram);
    CHECK(loaded[i].spectrogram->is_absolute());
    CHECK(fs::exists(*loaded[i].spectrogram));
  }
  const auto utts = load_utterances(loaded);
  CHECK(utts[2].trajectory->shape() == Shape{9, 40});
  CHECK(utts[2].spectrogram.shape() == Shape{128, 50});
  CHECK(*utts[2].trajectory == *items[2].trajectory);

  const auto copy = dir / "sub" / "again.json";
  fs::create_directories(copy.parent_path());
  save_manifest(copy, loaded);
  const auto reloaded = load_manifest(copy);
  CHECK(reloaded[0].trajectory == loaded[0].trajectory);
  CHECK(mirrornet::testing::slurp(copy).find(dir.string()) == std::string::npos);
}

TEST_CASE("manifest violations are reported together, per item") {
  const auto dir = scratch_dir("manifest_bad");
  const auto items = gen_synthetic(2, 0.4, 6);
  write_dataset(dir, items);
  write_text(dir / "short.csv",
             "time_s,LA,LP,TBCL,TBCD,TTCL,TTCD,ap,per,pitch_hz\n0.00,0,0,0,0,0,0,0,0,0\n");
  write_text(dir / "bad.json", R"([
    {"id": "a", "speaker": "s1", "spectrogram": "spec/syn00000.csv", "split": "train"},
    {"id": "a", "speaker": "s1", "spectrogram": "spec/syn00001.csv", "split": "train"},
    {"id": "b", "speaker": "", "spectrogram": "nowhere.csv", "split": "holdout"},
    {"id": "c", "speaker": "s2", "trajectory": "traj/syn00000.csv", "split": "dev"},
    {"id": "d", "speaker": "s2", "spectrogram": "spec/syn00000.csv", "trajectory": "short.csv", "split": "dev"},
    {"id": "e", "speaker": "s3", "spectrogram": "spec/syn00000.csv", "color": "red", "split": "dev"}
  ])");
  std::string msg;
  try {
    load_manifest(dir / "bad.json");
  } catch (const DataError& e) {
    msg = e.what();
  }
  REQUIRE_FALSE(msg.empty());
  CHECK(msg.find("item 1 (a): duplicate id") != std::string::npos);
  CHECK(msg.find("item 2 (b): missing speaker") != std::string::npos);
  CHECK(msg.find("item 2 (b): spectrogram file not found") != std::string::npos);
  CHECK(msg.find("holdout") != std::string::npos);
  CHECK(msg.find("item 3 (c): needs a wav or spectrogram file") != std::string::npos);
  CHECK(msg.find("item 4 (d): trajectory lasts") != std::string::npos);
  CHECK(msg.find("item 5: unknown field 'color'") != std::string::npos);
  CHECK(msg.find("item 0") == std::string::npos);

  write_text(dir / "notjson.json", "{");
  CHECK_THROWS_AS(load_manifest(dir / "notjson.json"), DataError);
}

TEST_CASE("speaker splits") {
  auto speakers = [](std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("spk" + std::to_string(i));
    return out;
  };
  const std::vector<std::pair<Split, double>> three{
      {Split::kTrain, 0.8}, {Split::kDev, 0.1}, {Split::kTest, 0.1}};
  auto count = [](const std::map<std::string, Split>& m, Split s) {
    return std::count_if(m.begin(), m.end(), [s](const auto& kv) { return kv.second == s; });
  };
  const auto m46 = assign_speaker_splits(speakers(46), three, 1);
  CHECK(count(m46, Split::kTrain) == 36);
  CHECK(count(m46, Split::kDev) == 5);
  CHECK(count(m46, Split::kTest) == 5);
  const auto m3 = assign_speaker_splits(speakers(3), three, 1);
  CHECK(count(m3, Split::kTrain) == 1);
  CHECK(count(m3, Split::kDev) == 1);
  CHECK(count(m3, Split::kTest) == 1);
  CHECK_THROWS_AS(assign_speaker_splits(speakers(2), three, 1), DataError);
  CHECK(assign_speaker_splits(speakers(46), three, 1) == m46);

  // Items of one speaker never straddle splits.
  std::vector<UtteranceItem> items;
  for (std::size_t i = 0; i < 60; ++i) {
    UtteranceItem it;
    it.id = "u" + std::to_string(i);
    it.speaker = "s" + std::to_string(i % 12);
    items.push_back(it);
  }
  const auto split = split_by_speaker(items, three, 9);
  std::map<std::string, std::set<Split>> seen;
  for (const auto& it : split) seen[it.speaker].insert(it.split);
  for (const auto& kv : seen) CHECK(kv.second.size() == 1);

  const auto r = parse_split_ratios("train=0.8,dev=0.1,test=0.1");
  CHECK(r == three);
  CHECK_THROWS(parse_split_ratios("train=0.8,train=0.2"));
  CHECK_THROWS(parse_split_ratios("train=abc"));
}

TEST_CASE("channel statistics and normalization") {
  const std::vector<Tensor<float>> one{Tensor<float>(Shape{1, 2}, {1.0f, 3.0f})};
  const auto s = ChannelStats::fit(one);
  CHECK(s.mean[0] == doctest::Approx(2.0));
  CHECK(s.stddev[0] == doctest::Approx(1.0));

  const std::vector<Tensor<float>> flat{Tensor<float>(Shape{1, 4}, 5.0f)};
  const auto fs_ = ChannelStats::fit(flat);
  const auto z = fs_.normalize(flat[0]);
  for (float v : z.data()) {
    CHECK(std::isfinite(v));
    CHECK(v == 0.0f);
  }

  const auto items = gen_synthetic(6, 0.8, 4);
  std::vector<Tensor<float>> trajs;
  for (const auto& u : items) trajs.push_back(*u.trajectory);
  const auto stats = ChannelStats::fit(trajs);
  // Pitch is modelled in Hz / 400.
  CHECK(stats.mean[kPitchChannel] < 1.0);
  for (const auto& t : trajs) {
    const auto back = stats.denormalize(stats.normalize(t));
    // Float error is bounded in model units, where pitch is Hz / 400.
    for (std::size_t c = 0; c < t.rows(); ++c) {
      const double unit = c == kPitchChannel ? kPitchScale : 1.0;
      for (std::size_t k = 0; k < t.cols(); ++k) {
        CHECK(std::abs(back.at(c, k) - t.at(c, k)) / unit < 1e-6);
      }
    }
    const auto td = t.cast<double>();
    const auto backd = stats.denormalize(stats.normalize(td));
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::abs(backd[i] - td[i]) < 1e-9);
  }
  CHECK_THROWS_AS(stats.normalize(Tensor<float>(Shape{6, 4})), ShapeError);
  CHECK(take_channels(trajs[0], 6).shape() == Shape{6, trajs[0].cols()});
  CHECK(nominal_stats().channels() == 9);
}

TEST_CASE("oracle: zero excitation gives the floor everywhere") {
  Tensor<float> traj(Shape{9, 8}, 0.0f);
  OracleParams p;
  OracleDiagnostics diag;
  const auto s = oracle_synth(p, traj, &diag);
  CHECK(s.values.shape() == Shape{128, 10});
  const float floor = static_cast<float>(audio::compress(p.floor));
  for (float v : s.values.data()) CHECK(v == doctest::Approx(floor).epsilon(1e-6));
  CHECK(diag.clamped == 0);
}

TEST_CASE("oracle: a 125 Hz voiced source peaks on its harmonics") {
  Tensor<float> traj(Shape{9, 8}, 0.0f);
  for (std::size_t t = 0; t < 8; ++t) {
    traj.at(kPerChannel, t) = 1.0f;
    traj.at(kPitchChannel, t) = 125.0f;
  }
  const auto s = oracle_synth(OracleParams{}, traj).values;
  const audio::Filterbank fb;
  // Harmonics 2-5 resolve into separate peaks; higher ones merge with F1.
  for (int h = 2; h <= 5; ++h) {
    CAPTURE(h);
    CHECK(is_local_max(s, fb.nearest_channel(125.0 * h), 3));
  }
}

TEST_CASE("oracle: raising TBCD moves the second formant upward") {
  OracleParams p;
  std::size_t prev = 0;
  for (double v = -1.0; v <= 1.0 + 1e-9; v += 0.25) {
    Tensor<float> traj(Shape{9, 4}, 0.0f);
    for (std::size_t t = 0; t < 4; ++t) {
      traj.at(3, t) = static_cast<float>(v);
      traj.at(kApChannel, t) = 1.0f;
    }
    const std::size_t peak = peak_between(oracle_synth(p, traj).values, 0, p.f2_lo, p.f2_hi);
    CHECK(peak > prev);
    prev = peak;
  }
}

TEST_CASE("oracle: determinism, clamping and shape errors") {
  const auto items = gen_synthetic(1, 0.4, 8);
  OracleParams p;
  CHECK(oracle_synth(p, *items[0].trajectory).values == oracle_synth(p, *items[0].trajectory).values);
  Tensor<float> wild(Shape{9, 4}, 0.0f);
  wild.at(0, 0) = 3.0f;
  wild.at(kPerChannel, 1) = -1.0f;
  wild.at(kPitchChannel, 2) = 900.0f;
  OracleDiagnostics diag;
  oracle_synth(p, wild, &diag);
  CHECK(diag.clamped == 3);
  CHECK_THROWS_AS(oracle_synth(p, Tensor<float>(Shape{9, 6})), ShapeError);
  CHECK_THROWS_AS(oracle_synth(p, Tensor<float>(Shape{6, 8})), ShapeError);
}

TEST_CASE("gen_synthetic shapes and determinism") {
  const auto a = gen_synthetic(8, 2.0, 42);
  REQUIRE(a.size() == 8);
  for (const auto& u : a) {
    CHECK(u.trajectory->shape() == Shape{9, 200});
    CHECK(u.spectrogram.shape() == Shape{128, 250});
  }
  const auto b = gen_synthetic(8, 2.0, 42);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].speaker == b[i].speaker);
    CHECK(*a[i].trajectory == *b[i].trajectory);
    CHECK(a[i].spectrogram == b[i].spectrogram);
  }
  CHECK_FALSE(*gen_synthetic(1, 2.0, 43)[0].trajectory == *a[0].trajectory);

  const auto d1 = scratch_dir("gen_a"), d2 = scratch_dir("gen_b");
  write_dataset(d1, a);
  write_dataset(d2, b);
  for (const auto& entry : fs::recursive_directory_iterator(d1)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), d1);
    CHECK(mirrornet::testing::slurp(entry.path()) == mirrornet::testing::slurp(d2 / rel));
  }
}

TEST_CASE("gen_synthetic trajectories are smooth and voicing-consistent over 100 seeds") {
  // Channel ranges: TVs [-1, 1], ap/per [0, 1]. Pitch is exempt from the step
  // bound because it drops to 0 at voicing offsets.
  const double range[8] = {2, 2, 2, 2, 2, 2, 1, 1};
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto items = gen_synthetic(1, 2.0, seed);
    const auto& t = *items[0].trajectory;
    for (std::size_t c = 0; c < 8; ++c) {
      for (std::size_t k = 1; k < t.cols(); ++k) {
        worst = std::max(worst, std::abs(t.at(c, k) - t.at(c, k - 1)) / range[c]);
      }
    }
    for (std::size_t k = 0; k < t.cols(); ++k) {
      const float per = t.at(kPerChannel, k), pitch = t.at(kPitchChannel, k);
      CHECK((pitch == 0.0f) == (per < audio::kVoicingThreshold));
      CHECK(per + t.at(kApChannel, k) <= 1.0f + 1e-6f);
      if (pitch > 0.0f) {
        CHECK(pitch >= 80.0f);
        CHECK(pitch <= 300.0f);
      }
      for (std::size_t c = 0; c < kNumTVs; ++c) CHECK(std::abs(t.at(c, k)) <= 1.0f);
    }
  }
  CHECK(worst <= 0.2 + 1e-6);
}

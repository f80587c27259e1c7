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

#include "mirrornet/grad_check.hpp"
#include "mirrornet/network.hpp"
#include "test_util.hpp"

using namespace mirrornet;
using ad::Var;
using mirrornet::testing::random_tensor;

namespace {

// Real input/output widths, narrow hidden layers so a 64-bit check stays fast.
ArchConfig narrow_arch() {
  ArchConfig a;
  a.pre_post_filters = {128, 10, 8};
  a.enc_filters = {8, 6, 9};
  return a;
}

std::vector<Var<double>> leaves_of(const nn::ParamList<double>& params) {
  std::vector<Var<double>> out;
  for (const auto& p : params) out.push_back(*p.var);
  return out;
}

}  // namespace

TEST_CASE("encoder and decoder shapes at the default widths") {
  Rng rng(0);
  const ArchConfig arch;
  Encoder<float> enc(arch, rng);
  Decoder<float> dec(arch, rng);
  ad::NoGradGuard no_grad;
  const auto latent = enc(Var<float>::constant(random_tensor<float>({128, 250}, rng)));
  CHECK(latent.shape() == Shape{9, 200});
  CHECK(dec(latent).shape() == Shape{128, 250});
  CHECK(enc(Var<float>::constant(random_tensor<float>({128, 125}, rng))).shape() == Shape{9, 100});
  CHECK(dec(Var<float>::constant(random_tensor<float>({9, 100}, rng))).shape() == Shape{128, 125});
}

TEST_CASE("frame arithmetic") {
  const ArchConfig arch;
  CHECK(arch.latent_frames(250) == 200);
  CHECK(arch.spec_frames(200) == 250);
  for (std::size_t k = 4; k <= 400; k += 4) CHECK(arch.latent_frames(arch.spec_frames(k)) == k);
  CHECK_THROWS_AS(arch.latent_frames(251), ShapeError);
  CHECK_THROWS_AS(arch.spec_frames(201), ShapeError);
  Rng rng(0);
  Encoder<float> enc(arch, rng);
  CHECK_THROWS_AS(enc(Var<float>::constant(Tensor<float>(Shape{64, 250}))), ShapeError);
}

TEST_CASE("invalid widths are rejected") {
  ArchConfig a;
  a.enc_filters = {256, 128, 7};
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  ArchConfig b;
  b.dilations = {};
  CHECK_THROWS_AS(b.validate(), std::invalid_argument);
}

TEST_CASE("all-zero weights give a constant output equal to the last bias") {
  Rng rng(1);
  Decoder<float> dec(ArchConfig{}, rng);
  auto params = dec.parameters();
  for (auto& p : params) p.var->mutable_value().fill(0.0f);
  params.back().var->mutable_value().fill(0.25f);
  ad::NoGradGuard no_grad;
  const auto out = dec(Var<float>::constant(random_tensor<float>({9, 40}, rng)));
  for (float v : out.value().data()) CHECK(v == 0.25f);
}

TEST_CASE("forward is deterministic for a given seed") {
  Rng a(3), b(3), in(4);
  Encoder<float> e1(ArchConfig{}, a), e2(ArchConfig{}, b);
  const auto x = Var<float>::constant(random_tensor<float>({128, 50}, in));
  ad::NoGradGuard no_grad;
  CHECK(e1(x).value() == e2(x).value());
}

TEST_CASE("full network gradients match finite differences at 64-bit") {
  for (std::uint64_t seed : {1, 2, 3}) {
    CAPTURE(seed);
    Rng rng(seed);
    const ArchConfig arch = narrow_arch();
    Encoder<double> enc(arch, rng);
    Decoder<double> dec(arch, rng);
    mirrornet::testing::jitter_biases(enc.parameters(), rng);
    mirrornet::testing::jitter_biases(dec.parameters(), rng);
    auto spec = Var<double>::leaf(random_tensor<double>({128, 50}, rng));
    auto latent = Var<double>::leaf(random_tensor<double>({9, 40}, rng));
    const auto spec_target = Var<double>::constant(random_tensor<double>({128, 50}, rng));
    const auto latent_target = Var<double>::constant(random_tensor<double>({9, 40}, rng));

    auto enc_leaves = leaves_of(enc.parameters());
    enc_leaves.push_back(spec);
    const auto re = ad::grad_check_leaves([&] { return ad::mse(enc(spec), latent_target); },
                                          enc_leaves, 1e-5, 1e-4, 6, seed);
    CHECK(re.pass);
    CHECK(re.max_rel_err < 1e-4);

    auto dec_leaves = leaves_of(dec.parameters());
    dec_leaves.push_back(latent);
    const auto rd = ad::grad_check_leaves([&] { return ad::mse(dec(latent), spec_target); },
                                          dec_leaves, 1e-5, 1e-4, 6, seed);
    CHECK(rd.pass);
    CHECK(rd.max_rel_err < 1e-4);
  }
}

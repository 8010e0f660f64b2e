// Copyright 2026 The caebench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>
#include <random>

#include "caebench/adam.hpp"
#include "caebench/density.hpp"
#include "caebench/error.hpp"
#include "caebench/model.hpp"
#include "caebench/train.hpp"
#include "doctest.h"
#include "gradcheck.hpp"
#include "synthetic.hpp"
#include "toy_model.hpp"

using namespace caebench;
using namespace caebench::codec;
using ad::Shape;
using ad::Tape;
using ad::Tensor;

namespace {

Architecture Small(std::size_t units = 2, std::size_t filters = 6, std::size_t k = 4) {
  Architecture a;
  a.units = units;
  a.filters = filters;
  a.latent_channels = k;
  return a;
}

// Fits the density to `data` (one channel) by minimising the mean rate.
FactorizedDensity Fit(FactorizedDensity density, const std::vector<double>& data, int steps, double lr) {
  std::vector<Tensor> params = density.Parameters();
  for (auto& p : params) p.set_requires_grad(true);
  ad::AdamConfig cfg;
  cfg.learning_rate = lr;
  ad::AdamState state(cfg, params);
  Tensor latent = Tensor::FromData({1, 1, 1, data.size()}, data);
  for (int i = 0; i < steps; ++i) {
    for (auto& p : params) p.zero_grad();
    Tape tape;
    Tensor r = ad::MulScalar(tape, density.RateBits(tape, latent), 1.0 / static_cast<double>(data.size()));
    tape.Backward(r);
    ad::AdamStep(params, state);
  }
  return density;
}

}  // namespace

TEST_CASE("density cdf is monotone with the right limits") {
  FactorizedDensity d(3, 5);
  for (std::size_t c = 0; c < 3; ++c) {
    double prev = 0.0;
    for (double x = -200.0; x <= 200.0; x += 0.37) {
      const double v = d.Cdf(c, x);
      CHECK(v >= prev);
      prev = v;
    }
    CHECK(d.Cdf(c, -1e4) < 1e-6);
    CHECK(d.Cdf(c, 1e4) > 1.0 - 1e-6);
    CHECK(d.Cdf(c, d.Median(c)) == doctest::Approx(0.5).epsilon(1e-9));
  }
}

TEST_CASE("near-uniform three-point data costs about log2(3) bits") {
  std::vector<double> data;
  for (int i = 0; i < 300; ++i) data.push_back(static_cast<double>(i % 3) - 1.0);
  FactorizedDensity d = Fit(FactorizedDensity(1, 9, 1.0), data, 3000, 1e-2);
  const double bits = d.RateBits(data, 1, data.size()) / static_cast<double>(data.size());
  CHECK(bits == doctest::Approx(std::log2(3.0)).epsilon(0.05 / std::log2(3.0)));
}

TEST_CASE("a density concentrated at zero makes zero nearly free") {
  FactorizedDensity d(1, 1, 0.01);
  auto params = d.Parameters();
  for (std::size_t k = 4; k < params.size(); ++k) {
    auto v = params[k].mutable_data();
    std::fill(v.begin(), v.end(), 0.0);
  }
  const std::vector<double> zero{0.0};
  CHECK(d.RateBits(zero, 1, 1) <= 0.01);
  const auto table = d.BuildTables().at(0);
  CHECK(table.frequency(static_cast<std::size_t>(-table.offset)) >= 65530);
}

TEST_CASE("rate gradient matches finite differences") {
  std::mt19937_64 rng(17);
  FactorizedDensity base(2, 3, 4.0);
  std::vector<Tensor> inputs{testing::RandomTensor({2, 2, 3, 3}, rng, -3.0, 3.0)};
  for (const auto& p : base.Parameters()) inputs.push_back(p.Clone());
  auto f = [base](Tape& tape, const std::vector<Tensor>& in) {
    FactorizedDensity d = base;
    d.SetParameters(std::vector<Tensor>(in.begin() + 1, in.end()));
    return d.RateBits(tape, in[0]);
  };
  const auto r = testing::GradCheck(f, inputs, 1e-5);
  CHECK(r.max_rel_error < 1e-4);
  CHECK(r.checked == 36 + 2 * (3 + 9 + 9 + 3 + 3 + 3 + 3 + 1 + 3 + 3 + 3));
}

TEST_CASE("rate estimate is consistent across overloads") {
  std::mt19937_64 rng(2);
  FactorizedDensity d(2, 4);
  Tensor y = testing::RandomTensor({2, 2, 4, 4}, rng, -5, 5);
  Tape tape(false);
  CHECK(d.RateBits(tape, y).item() == d.RateBits(y));
  const double sum = [&] {
    double s = 0;
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 16; ++i)
          s -= std::log2(std::max(d.Likelihood(c, y.data()[(n * 2 + c) * 16 + i]), kLikelihoodFloor));
    return s;
  }();
  CHECK(d.RateBits(y) == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("inference rounding ties away from zero") {
  CHECK(RoundLatent(1.4) == 1);
  CHECK(RoundLatent(-2.5) == -3);
  CHECK(RoundLatent(2.5) == 3);
  CHECK(RoundLatent(-0.4) == 0);
  CHECK(RoundLatent(1e9) == 32767);
  CHECK(RoundLatent(-1e9) == -32768);
}

TEST_CASE("training noise is bounded and zero-mean") {
  std::mt19937_64 rng(99);
  double sum = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double u = UniformNoise(rng);
    REQUIRE(u > -0.5);
    REQUIRE(u < 0.5);
    sum += u;
  }
  CHECK(std::abs(sum / n) < 0.002);
  Tape tape;
  Tensor y = Tensor::Filled({1, 2, 3, 3}, 1.25);
  Tensor q = AddUniformNoise(tape, y, rng);
  for (std::size_t i = 0; i < q.size(); ++i) CHECK(std::abs(q.data()[i] - 1.25) < 0.5);
}

TEST_CASE("latent and reconstruction shapes follow the downscale formula") {
  CodecModel full = CodecModel::Create(Architecture{}, 1);
  Tape tape(false);
  Tensor y = full.Analyze(tape, Tensor::Zeros({1, 3, 8, 8}));
  CHECK(y.shape() == Shape{1, 48, 1, 1});
  CHECK(full.Synthesize(tape, y).shape() == Shape{1, 3, 8, 8});

  CodecModel m = CodecModel::Create(Small(3, 4, 48), 2);
  Image img = testing::SyntheticImage(256, 256, 1);
  Tensor32 y32 = m.Analyze(img);
  CHECK(y32.shape == Shape{1, 48, 32, 32});
  Image back = m.Synthesize(QuantizeLatent(y32));
  CHECK(back.width == 256);
  CHECK(back.height == 256);
  CHECK_THROWS_AS(m.Analyze(Image(12, 16)), Error);
}

TEST_CASE("inference is deterministic and pure") {
  CodecModel m = CodecModel::Create(Small(), 3);
  const auto before = m.Serialize();
  Image img = testing::SyntheticImage(32, 24, 4);
  auto a = m.Analyze(img);
  auto b = m.Analyze(img);
  CHECK(a.data == b.data);
  CHECK(m.Synthesize(QuantizeLatent(a)) == m.Synthesize(QuantizeLatent(b)));
  CHECK(m.Serialize() == before);
}

TEST_CASE("64-bit training path and 32-bit inference path agree") {
  CodecModel m = CodecModel::Create(Small(), 4);
  Image img = testing::SyntheticImage(32, 32, 5);
  Tape tape(false);
  Tensor y64 = m.Analyze(tape, ToTensor(img));
  Tensor32 y32 = m.Analyze(img);
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < y64.size(); ++i) {
    worst = std::max(worst, std::abs(y64.data()[i] - y32.data[i]));
    scale = std::max(scale, std::abs(y64.data()[i]));
  }
  CHECK(worst <= 1e-3 * scale);
}

TEST_CASE("near-identity toy model keeps mid-gray within quantisation error") {
  for (double s : {20.0, 21.0, 7.3}) {
    CodecModel m = testing::NearIdentityModel(s);
    Image gray(16, 12, 0.5f);
    Image out = m.Synthesize(QuantizeLatent(m.Analyze(gray)));
    REQUIRE(out.width == 16);
    for (float v : out.data) CHECK(std::abs(v - 0.5f) <= 0.5 / s + 1e-6);
  }
  // A scale that makes 0.5 land on an integer gives an exact round trip.
  CodecModel exact = testing::NearIdentityModel(20.0);
  Image gray(8, 8, 0.5f);
  CHECK(exact.Synthesize(QuantizeLatent(exact.Analyze(gray))) == gray);
}

TEST_CASE("rd loss decomposition") {
  std::mt19937_64 rng(8);
  Tensor x = testing::RandomTensor({2, 3, 16, 16}, rng, 0.0, 1.0);
  Tensor rate = Tensor::Scalar(123.0);
  for (Distortion dist : {Distortion::kMse, Distortion::kMsSsim}) {
    Tape tape(false);
    RdLossReport rep;
    Tensor j = RdLoss(tape, x, x, rate, 3.0, dist, &rep);
    CHECK(rep.distortion == 0.0);
    CHECK(rep.rate_bits == doctest::Approx(61.5));
    CHECK(j.item() == doctest::Approx(123.0 / 2.0));
  }
  Tape tape(false);
  RdLossReport a, b;
  Tensor zero = Tensor::Zeros({1, 3, 10, 10});
  Tensor half = Tensor::Filled({1, 3, 10, 10}, 0.5);
  RdLoss(tape, zero, half, Tensor::Scalar(40.0), 2.0, Distortion::kMse, &a);
  CHECK(a.distortion == 0.25);
  CHECK(a.loss - a.lambda * a.distortion - a.rate_bits == 0.0);
  CHECK(a.bits_per_pixel == doctest::Approx(0.4));
  RdLoss(tape, zero, half, Tensor::Scalar(40.0), 4.0, Distortion::kMse, &b);
  CHECK(b.loss - a.loss == doctest::Approx(2.0 * a.distortion));
  CHECK_THROWS_AS(RdLoss(tape, zero, half, Tensor::Scalar(std::nan("")), 2.0, Distortion::kMse, &b), Error);
}

TEST_CASE("checkpoint round trip is bit exact") {
  CodecModel m = CodecModel::Create(Small(), 6);
  m.meta().lambda = 0.0125;
  m.meta().distortion = Distortion::kMsSsim;
  m.meta().iterations = 77;
  const auto bytes = m.Serialize();
  CodecModel back = CodecModel::Deserialize(bytes);
  CHECK(back.Serialize() == bytes);
  CHECK(back.Hash() == m.Hash());
  CHECK(back.meta().lambda == 0.0125);
  CHECK(back.meta().distortion == Distortion::kMsSsim);
  CHECK(back.arch().filters == 6);

  const auto path = std::filesystem::temp_directory_path() / "caebench_ckpt_test.caem";
  m.Save(path);
  CHECK(CodecModel::Load(path).Hash() == m.Hash());
  std::filesystem::remove(path);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(CodecModel::Deserialize(bad), Error);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(CodecModel::Deserialize(truncated), Error);

  CodecModel other = m.Clone();
  other.encoder()[0].weight.mutable_data()[0] += 1.0f;
  CHECK(other.Hash() != m.Hash());
}

TEST_CASE("distortion names parse") {
  CHECK(ParseDistortion("mse") == Distortion::kMse);
  CHECK(ParseDistortion("msssim") == Distortion::kMsSsim);
  CHECK(ParseDistortion("ms-ssim") == Distortion::kMsSsim);
  CHECK_THROWS_AS(ParseDistortion("psnr"), Error);
}

TEST_CASE("training is seed deterministic and lowers the loss") {
  std::vector<Image> images;
  for (int i = 0; i < 4; ++i) images.push_back(testing::SyntheticImage(48, 48, 100 + i));
  TrainConfig cfg;
  cfg.lambda = 200.0;
  cfg.iterations = 60;
  cfg.batch = 2;
  cfg.crop = 16;
  cfg.learning_rate = 1e-3;
  cfg.seed = 5;
  CodecModel init = CodecModel::Create(Small(1, 4, 2), 1);
  TrainResult a = Train(init, images, cfg);
  TrainResult b = Train(init, images, cfg);
  REQUIRE(a.log.size() == 60);
  CHECK(a.model.Serialize() == b.model.Serialize());
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].report.loss == b.log[i].report.loss);
  CHECK(!a.aborted);
  CHECK(a.model.meta().iterations == 60);
  auto avg = [&](std::size_t from, std::size_t to) {
    double s = 0;
    for (std::size_t i = from; i < to; ++i) s += a.log[i].report.loss;
    return s / static_cast<double>(to - from);
  };
  CHECK(avg(50, 60) < avg(0, 10));
}

TEST_CASE("training rejects invalid configuration") {
  std::vector<Image> images{testing::SyntheticImage(32, 32, 1)};
  CodecModel init = CodecModel::Create(Small(1, 4, 2), 1);
  TrainConfig cfg;
  cfg.lambda = 1.0;
  cfg.crop = 15;
  CHECK_THROWS_AS(Train(init, images, cfg), Error);
  cfg.crop = 16;
  cfg.iterations = 0;
  CHECK_THROWS_AS(Train(init, images, cfg), Error);
  cfg.iterations = 1;
  cfg.crop = 64;  // larger than every image
  CHECK_THROWS_AS(Train(init, images, cfg), Error);
}

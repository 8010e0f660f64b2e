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
#include <numeric>
#include <random>

#include "caebench/adam.hpp"
#include "caebench/error.hpp"
#include "caebench/tensor.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace caebench;
using namespace caebench::ad;
using testing::GradCheck;
using testing::Project;
using testing::RandomAwayFrom;
using testing::RandomTensor;

namespace {

constexpr double kStep = 1e-5;
constexpr double kTol = 1e-4;

double Dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

TEST_CASE("conv2d of ones has full-support sum at the centre") {
  Tape tape;
  Tensor x = Tensor::Filled({1, 1, 4, 4}, 1.0);
  Tensor w = Tensor::Filled({1, 1, 3, 3}, 1.0);
  Tensor b = Tensor::Zeros({1});
  Tensor y = Conv2d(tape, x, w, b, {1, 1, 1, 0});
  CHECK(y.shape() == Shape{1, 1, 4, 4});
  CHECK(y.data()[1 * 4 + 1] == 9.0);
  CHECK(y.data()[0] == 4.0);  // corner sees a 2x2 patch
}

TEST_CASE("conv2d output geometry") {
  Tape tape;
  Tensor y = Conv2d(tape, Tensor::Zeros({1, 1, 8, 8}), Tensor::Zeros({1, 1, 3, 3}), Tensor::Zeros({1}), {2, 1, 1, 0});
  CHECK(y.shape() == Shape{1, 1, 4, 4});
  Tensor z = Conv2d(tape, Tensor::Zeros({2, 3, 7, 5}), Tensor::Zeros({4, 3, 3, 3}), Tensor::Zeros({4}), {2, 0, 0, 0});
  CHECK(z.shape() == Shape{2, 4, 3, 2});
}

TEST_CASE("conv2d names the offending axis") {
  Tape tape;
  try {
    Conv2d(tape, Tensor::Zeros({1, 2, 4, 4}), Tensor::Zeros({1, 3, 3, 3}), Tensor::Zeros({1}), {1, 1, 1, 0});
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
    CHECK(std::string(e.what()).find("channel") != std::string::npos);
  }
  CHECK_THROWS_AS(Conv2d(tape, Tensor::Zeros({1, 1, 4, 4}), Tensor::Zeros({1, 1, 3, 3}), Tensor::Zeros({2}),
                         {1, 1, 1, 0}),
                  Error);
  CHECK_THROWS_AS(Conv2d(tape, Tensor::Zeros({1, 1, 4, 4}), Tensor::Zeros({1, 1, 3, 3}), Tensor::Zeros({1}),
                         {0, 1, 1, 0}),
                  Error);
}

TEST_CASE("deconv2d stride 2 doubles spatial dims") {
  Tape tape;
  Tensor y =
      Deconv2d(tape, Tensor::Zeros({1, 1, 4, 4}), Tensor::Zeros({1, 1, 3, 3}), Tensor::Zeros({1}), {2, 1, 1, 1});
  CHECK(y.shape() == Shape{1, 1, 8, 8});
  Tensor z =
      Deconv2d(tape, Tensor::Zeros({2, 5, 3, 6}), Tensor::Zeros({5, 4, 3, 3}), Tensor::Zeros({4}), {1, 1, 1, 0});
  CHECK(z.shape() == Shape{2, 4, 3, 6});
}

TEST_CASE("deconv2d is the adjoint of conv2d") {
  std::mt19937_64 rng(7);
  for (std::size_t stride : {1u, 2u}) {
    const Shape xs{2, 3, 8, 6};
    Tensor x = RandomTensor(xs, rng);
    Tensor w = RandomTensor({4, 3, 3, 3}, rng);
    Tape tape(false);
    Tensor cx = Conv2d(tape, x, w, Tensor::Zeros({4}), {stride, 1, 1, 0});
    Tensor u = RandomTensor(cx.shape(), rng);
    Tensor du = Deconv2d(tape, u, w, Tensor::Zeros({3}), {stride, 1, 1, stride - 1});
    REQUIRE(du.shape() == xs);
    const double lhs = Dot(cx.data(), u.data());
    const double rhs = Dot(x.data(), du.data());
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));

    // forward(deconv) equals backward-input(conv)
    Tensor xg = x.Clone(true);
    Tape t2;
    Tensor y = Conv2d(t2, xg, w, Tensor::Zeros({4}), {stride, 1, 1, 0});
    t2.Backward(Sum(t2, Mul(t2, y, u)));
    for (std::size_t i = 0; i < du.size(); ++i) CHECK(xg.grad()[i] == doctest::Approx(du.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d gradients match finite differences") {
  std::mt19937_64 rng(11);
  auto op = [](std::size_t stride) {
    return [stride](Tape& t, const std::vector<Tensor>& in) { return Conv2d(t, in[0], in[1], in[2], {stride, 1, 1, 0}); };
  };
  for (std::size_t stride : {1u, 2u}) {
    auto r = GradCheck(Project(op(stride), 3),
                       {RandomTensor({2, 3, 5, 5}, rng), RandomTensor({2, 3, 3, 3}, rng), RandomTensor({2}, rng)}, kStep);
    CHECK(r.max_rel_error < kTol);
  }
}

TEST_CASE("deconv2d gradients match finite differences") {
  std::mt19937_64 rng(12);
  for (std::size_t stride : {1u, 2u}) {
    auto op = [stride](Tape& t, const std::vector<Tensor>& in) {
      return Deconv2d(t, in[0], in[1], in[2], {stride, 1, 1, stride - 1});
    };
    auto r = GradCheck(Project(op, 5),
                       {RandomTensor({2, 3, 4, 3}, rng), RandomTensor({3, 2, 3, 3}, rng), RandomTensor({2}, rng)}, kStep);
    CHECK(r.max_rel_error < kTol);
  }
}

TEST_CASE("elementwise forward values") {
  Tape tape(false);
  Tensor r = Relu(tape, Tensor::FromData({2}, {-1.0, 2.0}));
  CHECK(r.data()[0] == 0.0);
  CHECK(r.data()[1] == 2.0);
  Tensor l = LeakyRelu(tape, Tensor::FromData({2}, {-1.0, 2.0}), 0.2);
  CHECK(l.data()[0] == doctest::Approx(-0.2));
  Tensor c = Clamp(tape, Tensor::FromData({3}, {-2.0, 0.5, 9.0}), 0.0, 1.0);
  CHECK(c.data()[0] == 0.0);
  CHECK(c.data()[2] == 1.0);
  CHECK_THROWS_AS(Log(tape, Tensor::FromData({2}, {1.0, 0.0})), Error);
  CHECK_THROWS_AS(Log(tape, Tensor::FromData({1}, {-3.0})), Error);
}

TEST_CASE("square gradient at 3 is 6") {
  Tensor x = Tensor::FromData({1}, {3.0}, true);
  Tape tape;
  tape.Backward(Sum(tape, Square(tape, x)));
  CHECK(x.grad()[0] == 6.0);
}

TEST_CASE("relu subgradient at the kink is zero") {
  Tensor x = Tensor::FromData({1}, {0.0}, true);
  Tape tape;
  tape.Backward(Sum(tape, Relu(tape, x)));
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("unary ops match finite differences") {
  std::mt19937_64 rng(21);
  const Shape s{2, 3, 4};
  struct Case {
    const char* name;
    std::function<Tensor(Tape&, const Tensor&)> f;
    Tensor x;
  };
  std::vector<Case> cases = {
      {"relu", [](Tape& t, const Tensor& x) { return Relu(t, x); }, RandomAwayFrom(s, rng, {0.0})},
      {"lrelu", [](Tape& t, const Tensor& x) { return LeakyRelu(t, x, 0.2); }, RandomAwayFrom(s, rng, {0.0})},
      {"square", [](Tape& t, const Tensor& x) { return Square(t, x); }, RandomTensor(s, rng)},
      {"log", [](Tape& t, const Tensor& x) { return Log(t, x); }, RandomTensor(s, rng, 0.2, 2.0)},
      {"exp", [](Tape& t, const Tensor& x) { return Exp(t, x); }, RandomTensor(s, rng)},
      {"clamp", [](Tape& t, const Tensor& x) { return Clamp(t, x, -0.5, 0.5); },
       RandomAwayFrom(s, rng, {-0.5, 0.5})},
      {"softplus", [](Tape& t, const Tensor& x) { return Softplus(t, x); }, RandomTensor(s, rng, -4, 4)},
      {"tanh", [](Tape& t, const Tensor& x) { return Tanh(t, x); }, RandomTensor(s, rng, -2, 2)},
      {"sigmoid", [](Tape& t, const Tensor& x) { return Sigmoid(t, x); }, RandomTensor(s, rng, -4, 4)},
      {"pow", [](Tape& t, const Tensor& x) { return PowScalar(t, x, 0.3); }, RandomTensor(s, rng, 0.1, 1.0)},
      {"addscalar", [](Tape& t, const Tensor& x) { return AddScalar(t, x, 2.5); }, RandomTensor(s, rng)},
      {"mulscalar", [](Tape& t, const Tensor& x) { return MulScalar(t, x, -1.5); }, RandomTensor(s, rng)},
      {"mean", [](Tape& t, const Tensor& x) { return Mean(t, x); }, RandomTensor(s, rng)},
      {"reshape", [](Tape& t, const Tensor& x) { return Reshape(t, x, {4, 6}); }, RandomTensor(s, rng)},
  };
  for (auto& c : cases) {
    CAPTURE(c.name);
    auto f = c.f;
    auto r = GradCheck(Project([f](Tape& t, const std::vector<Tensor>& in) { return f(t, in[0]); }, 9), {c.x}, kStep);
    CHECK(r.max_rel_error < kTol);
  }
  auto sm = [](Tape& t, const std::vector<Tensor>& in) { return SpatialMean(t, in[0]); };
  CHECK(GradCheck(Project(sm, 4), {RandomTensor({2, 3, 4, 5}, rng)}, kStep).max_rel_error < kTol);
}

TEST_CASE("binary ops broadcast and match finite differences") {
  std::mt19937_64 rng(31);
  using Bin = Tensor (*)(Tape&, const Tensor&, const Tensor&);
  for (Bin op : {static_cast<Bin>(Add), static_cast<Bin>(Sub), static_cast<Bin>(Mul), static_cast<Bin>(Div)}) {
    for (const Shape& bs : {Shape{2, 3, 4}, Shape{1, 3, 1}, Shape{1}}) {
      auto f = [op](Tape& t, const std::vector<Tensor>& in) { return op(t, in[0], in[1]); };
      auto r = GradCheck(Project(f, 2), {RandomTensor({2, 3, 4}, rng), RandomTensor(bs, rng, 0.5, 1.5)}, kStep);
      CHECK(r.max_rel_error < kTol);
    }
  }
  Tape tape(false);
  CHECK_THROWS_AS(Add(tape, Tensor::Zeros({2, 3}), Tensor::Zeros({3, 2})), Error);
}

TEST_CASE("composite chain matches finite differences") {
  std::mt19937_64 rng(41);
  auto f = [](Tape& t, const std::vector<Tensor>& in) {
    Tensor h = Conv2d(t, in[0], in[1], in[2], {2, 1, 1, 0});
    h = LeakyRelu(t, h, 0.2);
    h = Deconv2d(t, h, in[3], in[4], {2, 1, 1, 1});
    Tensor d = Sub(t, Sigmoid(t, h), in[0]);
    return Mean(t, Square(t, d));
  };
  auto r = GradCheck(f,
                     {RandomTensor({1, 2, 6, 6}, rng), RandomTensor({3, 2, 3, 3}, rng), RandomTensor({3}, rng),
                      RandomTensor({3, 2, 3, 3}, rng), RandomTensor({2}, rng)},
                     kStep);
  CHECK(r.max_rel_error < kTol);
}

TEST_CASE("tape is linear: backward of a sum equals sum of backwards") {
  std::mt19937_64 rng(51);
  Tensor x = RandomTensor({3, 4}, rng).Clone(true);
  auto a = [](Tape& t, const Tensor& x) { return Sum(t, Square(t, x)); };
  auto b = [](Tape& t, const Tensor& x) { return Sum(t, Tanh(t, x)); };
  std::vector<double> ga, gb;
  {
    Tape t;
    t.Backward(a(t, x));
    ga.assign(x.grad().begin(), x.grad().end());
    x.zero_grad();
  }
  {
    Tape t;
    t.Backward(b(t, x));
    gb.assign(x.grad().begin(), x.grad().end());
    x.zero_grad();
  }
  Tape t;
  t.Backward(Add(t, a(t, x), b(t, x)));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.grad()[i] == doctest::Approx(ga[i] + gb[i]).epsilon(1e-14));
}

TEST_CASE("a reused tensor accumulates gradient from every use") {
  Tensor x = Tensor::FromData({1}, {2.0}, true);
  Tape t;
  t.Backward(Sum(t, Mul(t, x, x)));
  CHECK(x.grad()[0] == 4.0);
}

TEST_CASE("adam first step moves a unit-gradient scalar by about -lr") {
  Tensor p = Tensor::FromData({1}, {0.5}, true);
  p.mutable_grad()[0] = 1.0;
  std::vector<Tensor> params{p};
  AdamState state(AdamConfig{}, params);
  CHECK(AdamStep(params, state) == StepOutcome::kApplied);
  CHECK(p.data()[0] - 0.5 == doctest::Approx(-1e-4).epsilon(1e-6));
  CHECK(state.step() == 1);
}

TEST_CASE("adam leaves parameters alone for a zero gradient") {
  Tensor p = Tensor::FromData({2}, {0.5, -1.0}, true);
  p.mutable_grad()[0] = 0.0;
  std::vector<Tensor> params{p};
  AdamState state(AdamConfig{}, params);
  AdamStep(params, state);
  CHECK(p.data()[0] == 0.5);
  CHECK(p.data()[1] == -1.0);
}

TEST_CASE("adam rejects a non-finite gradient without touching state") {
  Tensor p = Tensor::FromData({2}, {0.5, -1.0}, true);
  p.mutable_grad()[0] = 1.0;
  p.mutable_grad()[1] = std::nan("");
  std::vector<Tensor> params{p};
  AdamState state(AdamConfig{}, params);
  CHECK(AdamStep(params, state) == StepOutcome::kRejectedNonFinite);
  CHECK(p.data()[0] == 0.5);
  CHECK(state.step() == 0);
}

TEST_CASE("adam is deterministic") {
  auto run = [] {
    std::mt19937_64 rng(3);
    Tensor p = RandomTensor({5}, rng).Clone(true);
    std::vector<Tensor> params{p};
    AdamState state(AdamConfig{}, params);
    for (int i = 0; i < 20; ++i) {
      p.zero_grad();
      Tape t;
      t.Backward(Sum(t, Square(t, p)));
      AdamStep(params, state);
    }
    return std::vector<double>(p.data().begin(), p.data().end());
  };
  CHECK(run() == run());
}

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

#include "caebench/entropy_tables.hpp"
#include "caebench/error.hpp"
#include "caebench/range_coder.hpp"
#include "doctest.h"

using namespace caebench;
using namespace caebench::rc;

namespace {

class Gaussian : public ContinuousDistribution {
 public:
  Gaussian(double mu, double sigma) : mu_(mu), sigma_(sigma) {}
  double Cdf(double x) const override { return 0.5 * std::erfc(-(x - mu_) / (sigma_ * std::sqrt(2.0))); }
  double Survival(double x) const override { return 0.5 * std::erfc((x - mu_) / (sigma_ * std::sqrt(2.0))); }
  double Median() const override { return mu_; }

 private:
  double mu_, sigma_;
};

// Uniform on [c - w/2, c + w/2].
class Box : public ContinuousDistribution {
 public:
  Box(double c, double w) : c_(c), w_(w) {}
  double Cdf(double x) const override { return std::clamp((x - c_) / w_ + 0.5, 0.0, 1.0); }
  double Survival(double x) const override { return 1.0 - Cdf(x); }
  double Median() const override { return c_; }

 private:
  double c_, w_;
};

CdfTable UniformTable(std::int32_t offset, std::size_t symbols) {
  std::vector<double> pmf(symbols, 1.0);
  pmf.push_back(0.0);  // escape, floored to one
  return QuantizePmf(offset, pmf);
}

CdfTable RandomTable(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(1, 40);
  std::uniform_int_distribution<int> off(-50, 50);
  std::exponential_distribution<double> w(1.0);
  std::vector<double> pmf(static_cast<std::size_t>(size(rng)) + 1);
  for (auto& p : pmf) p = w(rng) * (rng() % 4 == 0 ? 1e-6 : 1.0);
  return QuantizePmf(off(rng), pmf);
}

}  // namespace

TEST_CASE("quantized tables are normalised and strictly increasing") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 500; ++t) {
    const CdfTable table = RandomTable(rng);
    CHECK_NOTHROW(table.Validate());
    CHECK(table.cdf.back() == kTotalFrequency);
  }
  std::vector<double> many(70000, 1.0);
  CHECK_THROWS_AS(QuantizePmf(0, many), Error);
  CHECK_THROWS_AS(QuantizePmf(0, std::vector<double>{0.0, 0.0}), Error);
}

TEST_CASE("point-mass density gets almost the whole table") {
  const CdfTable table = BuildCdf(Box(0.0, 1e-9));
  CHECK(table.num_symbols() == 4);  // -1, 0, 1, escape
  CHECK(table.offset == -1);
  CHECK(table.frequency(1) == 65533);
  CHECK(table.frequency(0) == 1);
  CHECK(table.frequency(2) == 1);
  CHECK(table.frequency(3) == 1);
}

TEST_CASE("table built from a smooth density is close in KL") {
  for (double sigma : {0.8, 3.0, 25.0}) {
    Gaussian g(1.3, sigma);
    const CdfTable table = BuildCdf(g);
    double kl = 0.0;
    for (std::int32_t v = table.min_value(); v <= table.max_value(); ++v) {
      const double p = IntervalMass(g, v - 0.5, v + 0.5);
      const double q = table.frequency(static_cast<std::size_t>(v - table.offset)) / 65536.0;
      if (p > 0) kl += p * std::log2(p / q);
    }
    CAPTURE(sigma);
    CHECK(kl < 1e-3);
    // Out-of-support mass is what the escape symbol stands for.
    CHECK(g.Cdf(table.min_value() - 0.5) + g.Survival(table.max_value() + 0.5) < 1.0 / 65536.0);
  }
}

TEST_CASE("wide densities are capped at the maximum half width") {
  const CdfTable table = BuildCdf(Gaussian(0.0, 1e5));
  CHECK(table.min_value() == -kMaxHalfWidth);
  CHECK(table.max_value() == kMaxHalfWidth);
}

TEST_CASE("empty input codes to the flush bytes only") {
  const CdfTable table = UniformTable(0, 3);
  const Payload p = Encode(std::vector<std::int32_t>{}, table);
  CHECK(p.bytes.size() == kFlushBytes);
  CHECK(p.symbol_count == 0);
  CHECK(Decode(p, table).empty());
}

TEST_CASE("exhaustive round trip over three symbols up to length eight") {
  const CdfTable tables[] = {UniformTable(0, 3), QuantizePmf(-1, std::vector<double>{0.7, 0.2, 0.0999, 1e-4})};
  for (const CdfTable& table : tables) {
    std::size_t mismatches = 0;
    for (std::size_t len = 0; len <= 8; ++len) {
      std::size_t combos = 1;
      for (std::size_t i = 0; i < len; ++i) combos *= 3;
      for (std::size_t code = 0; code < combos; ++code) {
        std::vector<std::int32_t> s(len);
        std::size_t c = code;
        for (auto& v : s) {
          v = table.offset + static_cast<std::int32_t>(c % 3);
          c /= 3;
        }
        if (Decode(Encode(s, table), table) != s) ++mismatches;
      }
    }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("fuzz round trip including escapes") {
  std::mt19937_64 rng(2024);
  std::size_t mismatches = 0;
  for (int t = 0; t < 10000; ++t) {
    const CdfTable table = RandomTable(rng);
    std::uniform_int_distribution<int> len(0, 200);
    std::uniform_int_distribution<std::int32_t> inside(table.min_value(), table.max_value());
    std::uniform_int_distribution<std::int32_t> raw(kRawMin, kRawMax);
    std::vector<std::int32_t> s(static_cast<std::size_t>(len(rng)));
    for (auto& v : s) v = rng() % 10 == 0 ? raw(rng) : inside(rng);
    if (Decode(Encode(s, table), table) != s) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("uniform 256-ary source codes to about one byte per symbol") {
  std::mt19937_64 rng(5);
  const CdfTable table = UniformTable(0, 256);
  std::vector<std::int32_t> s(100000);
  for (auto& v : s) v = static_cast<std::int32_t>(rng() % 256);
  const Payload p = Encode(s, table);
  CHECK(std::abs(static_cast<double>(p.bytes.size()) - 1e5) < 1e3);
  CHECK(Decode(p, table) == s);
}

TEST_CASE("coded length is near the Shannon bound and under the per-symbol ceiling") {
  std::mt19937_64 rng(6);
  for (double sigma : {0.3, 1.0, 4.0}) {
    Gaussian g(0.0, sigma);
    const CdfTable table = BuildCdf(g);
    std::vector<double> weights;
    for (std::size_t i = 0; i < table.num_symbols(); ++i) weights.push_back(table.frequency(i));
    weights.back() = 0.0;  // i.i.d. draws from the table itself, no escapes
    std::discrete_distribution<std::size_t> draw(weights.begin(), weights.end());
    std::vector<std::int32_t> s(100000);
    double ideal = 0.0, ceiling = 0.0;
    for (auto& v : s) {
      v = table.offset + static_cast<std::int32_t>(draw(rng));
      ideal += CodeLength(table, v);
      ceiling += std::ceil(CodeLength(table, v));
    }
    const double actual = 8.0 * static_cast<double>(Encode(s, table).bytes.size());
    CAPTURE(sigma);
    CHECK(actual <= ideal * 1.05);
    CHECK(actual >= ideal);
    CHECK(actual <= ceiling + 64.0);
  }
}

TEST_CASE("damaged payloads fail loudly") {
  std::mt19937_64 rng(7);
  const CdfTable table = UniformTable(-4, 9);
  std::vector<std::int32_t> s(300);
  for (auto& v : s) v = static_cast<std::int32_t>(rng() % 9) - 4;
  Payload p = Encode(s, table);

  Payload truncated = p;
  truncated.bytes.resize(p.bytes.size() - 2);
  CHECK_THROWS_AS(Decode(truncated, table), Error);

  Payload padded = p;
  padded.bytes.push_back(0);
  CHECK_THROWS_AS(Decode(padded, table), Error);

  Payload tiny{{1, 2}, 0};
  CHECK_THROWS_AS(Decode(tiny, table), Error);

  Payload longer = p;
  longer.symbol_count += 40;
  CHECK_THROWS_AS(Decode(longer, table), Error);
}

TEST_CASE("out-of-range escapes are refused") {
  const CdfTable table = UniformTable(0, 3);
  CHECK_THROWS_AS(Encode(std::vector<std::int32_t>{40000}, table), Error);
}

TEST_CASE("encoder and decoder walk the same state trajectory") {
  std::mt19937_64 rng(8);
  const CdfTable table = BuildCdf(Gaussian(0.0, 2.0));
  std::vector<std::int32_t> s(5000);
  std::normal_distribution<double> n(0.0, 2.0);
  for (auto& v : s) v = static_cast<std::int32_t>(std::lround(n(rng) * (rng() % 50 == 0 ? 1000 : 1)));

  std::vector<std::pair<std::uint32_t, std::size_t>> enc_trace, dec_trace;
  RangeEncoder enc;
  enc.trace = [&](std::uint32_t r, std::size_t b) { enc_trace.emplace_back(r, b); };
  for (auto v : s) enc.EncodeValue(table, v);
  const auto bytes = enc.Finish();

  RangeDecoder dec(bytes);
  dec.trace = [&](std::uint32_t r, std::size_t b) { dec_trace.emplace_back(r, b); };
  for (auto v : s) REQUIRE(dec.DecodeValue(table) == v);
  dec.Finish();
  CHECK(enc_trace == dec_trace);
}

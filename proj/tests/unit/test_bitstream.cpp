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

#include "caebench/bitstream.hpp"
#include "caebench/error.hpp"
#include "doctest.h"
#include "synthetic.hpp"
#include "toy_model.hpp"

using namespace caebench;
using namespace caebench::codec;

namespace {

CodecModel SmallModel(std::uint64_t seed = 1) {
  Architecture a;
  a.units = 2;
  a.filters = 4;
  a.latent_channels = 3;
  return CodecModel::Create(a, seed);
}

ErrorKind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kInvalidArgument;
}

}  // namespace

TEST_CASE("encode then decode preserves dimensions") {
  const CodecModel m = SmallModel();
  for (auto [w, h] : {std::pair<std::size_t, std::size_t>{1, 1}, {37, 61}, {64, 64}, {130, 70}}) {
    Image img = testing::SyntheticImage(w, h, w + h);
    for (std::size_t ov : {0u, 8u}) {
      EncodeOptions opt;
      opt.tile_size = 32;
      opt.overlap = ov;
      const EncodeResult enc = EncodeImage(m, img, opt);
      Image out = DecodeImage(m, enc.bytes);
      CHECK(out.width == w);
      CHECK(out.height == h);
    }
  }
}

TEST_CASE("header records the coding parameters") {
  const CodecModel m = SmallModel();
  EncodeOptions opt;
  opt.tile_size = 32;
  opt.overlap = 8;
  const EncodeResult enc = EncodeImage(m, testing::SyntheticImage(70, 40, 1), opt);
  const BitstreamHeader h = ReadHeader(enc.bytes);
  CHECK(h.width == 70);
  CHECK(h.height == 40);
  CHECK(h.tile_size == 32);
  CHECK(h.overlap == 8);
  CHECK(h.units == 2);
  CHECK(h.latent_channels == 3);
  CHECK(h.model_hash == m.Hash());
  CHECK(h.tile_count == 6);
  CHECK(enc.bytes[0] == 'C');
  CHECK(enc.bytes[3] == 'B');
  CHECK(enc.payload_bits > 0);
  CHECK(enc.bits_per_pixel == doctest::Approx(8.0 * enc.bytes.size() / (70.0 * 40.0)));
}

TEST_CASE("a near-identity model round-trips mid-gray exactly") {
  const CodecModel m = testing::NearIdentityModel(20.0);
  Image gray(50, 34, 0.5f);
  EncodeOptions opt;
  opt.tile_size = 16;
  opt.overlap = 4;
  CHECK(DecodeImage(m, EncodeImage(m, gray, opt).bytes) == gray);
}

TEST_CASE("decoding with a different model is refused") {
  const CodecModel a = SmallModel(1), b = SmallModel(2);
  const EncodeResult enc = EncodeImage(a, testing::SyntheticImage(32, 32, 2));
  CHECK(KindOf([&] { DecodeImage(b, enc.bytes); }) == ErrorKind::kModelMismatch);
}

TEST_CASE("damaged containers are refused") {
  const CodecModel m = SmallModel();
  EncodeOptions opt;
  opt.tile_size = 16;
  const EncodeResult enc = EncodeImage(m, testing::SyntheticImage(40, 24, 3), opt);

  auto flipped = enc.bytes;
  flipped[kHeaderBytes + 12] ^= 0x10;
  CHECK(KindOf([&] { DecodeImage(m, flipped); }) == ErrorKind::kFormat);

  auto truncated = enc.bytes;
  truncated.pop_back();
  CHECK(KindOf([&] { DecodeImage(m, truncated); }) == ErrorKind::kFormat);

  auto longer = enc.bytes;
  longer.push_back(7);
  CHECK(KindOf([&] { DecodeImage(m, longer); }) == ErrorKind::kFormat);

  auto magic = enc.bytes;
  magic[0] = 'X';
  CHECK(KindOf([&] { DecodeImage(m, magic); }) == ErrorKind::kFormat);
}

TEST_CASE("thread count does not change the bytes") {
  const CodecModel m = SmallModel();
  Image img = testing::SyntheticImage(100, 90, 4);
  EncodeOptions one, many;
  one.tile_size = many.tile_size = 16;
  one.overlap = many.overlap = 8;
  one.threads = 1;
  many.threads = 4;
  const auto a = EncodeImage(m, img, one).bytes;
  const auto b = EncodeImage(m, img, many).bytes;
  CHECK(a == b);
  DecodeOptions d1, d4;
  d1.threads = 1;
  d4.threads = 4;
  CHECK(DecodeImage(m, a, d1) == DecodeImage(m, a, d4));
}

TEST_CASE("overlap costs extra bits") {
  const CodecModel m = SmallModel();
  Image img = testing::SyntheticImage(128, 128, 5);
  EncodeOptions abut, overlap;
  abut.tile_size = overlap.tile_size = 32;
  overlap.overlap = 32;
  CHECK(EncodeImage(m, img, overlap).bytes.size() > EncodeImage(m, img, abut).bytes.size());
}

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

#ifndef CAEBENCH_BITSTREAM_HPP_
#define CAEBENCH_BITSTREAM_HPP_

// Whole-image coding: tile, analyze, quantize, range-code each latent
// channel, and the inverse. The container layout is described in
// docs/bitstream.md.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "caebench/image.hpp"
#include "caebench/model.hpp"
#include "caebench/tiler.hpp"

namespace caebench::codec {

inline constexpr std::uint16_t kBitstreamVersion = 1;
inline constexpr std::size_t kHeaderBytes = 4 + 2 + 4 * 4 + 1 + 2 + 8 + 4;

struct BitstreamHeader {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t tile_size = 0;
  std::uint32_t overlap = 0;
  std::uint8_t units = 0;
  std::uint16_t latent_channels = 0;
  std::uint64_t model_hash = 0;
  std::uint32_t tile_count = 0;
};

struct EncodeOptions {
  std::size_t tile_size = 256;
  std::size_t overlap = 0;
  std::size_t threads = 0;  // 0: hardware concurrency
};

struct EncodeResult {
  std::vector<std::uint8_t> bytes;
  BitstreamHeader header;
  std::uint64_t payload_bits = 0;  // range-coded bytes only, times 8
  double estimated_bits = 0.0;     // model likelihood of the coded symbols
  double bits_per_pixel = 0.0;     // whole container bits / pixels
};

EncodeResult EncodeImage(const CodecModel& model, const Image& image, const EncodeOptions& options = {});

struct DecodeOptions {
  tiling::StitchMode mode = tiling::StitchMode::kOverlapBlend;
  std::size_t threads = 0;
};

// Refuses streams made with a different model (kModelMismatch) and damaged
// or truncated containers (kFormat).
Image DecodeImage(const CodecModel& model, std::span<const std::uint8_t> bytes, const DecodeOptions& options = {});

BitstreamHeader ReadHeader(std::span<const std::uint8_t> bytes);

}  // namespace caebench::codec

#endif  // CAEBENCH_BITSTREAM_HPP_

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

#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "caebench/error.hpp"
#include "caebench/range_coder.hpp"
#include "common/bytes.hpp"

namespace caebench::codec {
namespace {

constexpr char kMagic[4] = {'C', 'A', 'E', 'B'};

std::uint32_t Crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; tiles stay far below 4 GiB but chunk anyway.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = crc32(crc, bytes.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

// Runs fn(i) for i in [0, count) on a small pool. The first exception wins
// and is rethrown once every worker has stopped.
template <typename Fn>
void ParallelFor(std::size_t count, std::size_t threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= count) return;
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error) error = std::current_exception();
            next.store(count);
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

void WriteHeader(ByteWriter& w, const BitstreamHeader& h) {
  w.Raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
  w.U16(kBitstreamVersion);
  w.U32(h.width);
  w.U32(h.height);
  w.U32(h.tile_size);
  w.U32(h.overlap);
  w.U8(h.units);
  w.U16(h.latent_channels);
  w.U64(h.model_hash);
  w.U32(h.tile_count);
}

BitstreamHeader ParseHeader(ByteReader& r) {
  const auto magic = r.Raw(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) Fail(ErrorKind::kFormat, "not a CAEB bitstream");
  const std::uint16_t version = r.U16();
  if (version != kBitstreamVersion) {
    Fail(ErrorKind::kFormat, "unsupported bitstream version " + std::to_string(version));
  }
  BitstreamHeader h;
  h.width = r.U32();
  h.height = r.U32();
  h.tile_size = r.U32();
  h.overlap = r.U32();
  h.units = r.U8();
  h.latent_channels = r.U16();
  h.model_hash = r.U64();
  h.tile_count = r.U32();
  return h;
}

struct CodedTile {
  std::vector<std::uint8_t> body;  // K x (u32 length, payload)
  std::uint64_t payload_bytes = 0;
  double estimated_bits = 0.0;
};

}  // namespace

BitstreamHeader ReadHeader(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "bitstream");
  return ParseHeader(r);
}

EncodeResult EncodeImage(const CodecModel& model, const Image& image, const EncodeOptions& options) {
  const Architecture& arch = model.arch();
  const tiling::TileGrid grid =
      tiling::Plan(image.width, image.height, options.tile_size, options.overlap, arch.downscale());
  const std::vector<rc::CdfTable> tables = model.density().BuildTables();

  std::vector<CodedTile> coded(grid.tiles.size());
  ParallelFor(grid.tiles.size(), options.threads, [&](std::size_t i) {
    const Image source = tiling::ExtractTile(image, grid.tiles[i]);
    const QuantizedLatent latent = QuantizeLatent(model.Analyze(source));
    const std::size_t plane = latent.height * latent.width;
    ByteWriter w;
    for (std::size_t c = 0; c < latent.channels; ++c) {
      const std::span<const std::int32_t> values(latent.values.data() + c * plane, plane);
      const rc::Payload payload = rc::Encode(values, tables[c]);
      w.U32(static_cast<std::uint32_t>(payload.bytes.size()));
      w.Raw(payload.bytes);
      coded[i].payload_bytes += payload.bytes.size();
    }
    coded[i].estimated_bits = EstimateBits(model.density(), latent);
    coded[i].body = std::move(w.bytes());
  });

  EncodeResult result;
  result.header = {static_cast<std::uint32_t>(image.width),
                   static_cast<std::uint32_t>(image.height),
                   static_cast<std::uint32_t>(options.tile_size),
                   static_cast<std::uint32_t>(options.overlap),
                   static_cast<std::uint8_t>(arch.units),
                   static_cast<std::uint16_t>(arch.latent_channels),
                   model.Hash(),
                   static_cast<std::uint32_t>(grid.tiles.size())};
  ByteWriter w;
  WriteHeader(w, result.header);
  for (const CodedTile& t : coded) {
    w.U32(static_cast<std::uint32_t>(t.body.size()));
    w.U32(Crc32(t.body));
    w.Raw(t.body);
    result.payload_bits += 8 * t.payload_bytes;
    result.estimated_bits += t.estimated_bits;
  }
  result.bytes = std::move(w.bytes());
  result.bits_per_pixel =
      8.0 * static_cast<double>(result.bytes.size()) / static_cast<double>(image.width * image.height);
  return result;
}

Image DecodeImage(const CodecModel& model, std::span<const std::uint8_t> bytes, const DecodeOptions& options) {
  ByteReader r(bytes, "bitstream");
  const BitstreamHeader h = ParseHeader(r);
  if (h.model_hash != model.Hash()) {
    Fail(ErrorKind::kModelMismatch, "bitstream was encoded with a different model");
  }
  const Architecture& arch = model.arch();
  if (h.units != arch.units || h.latent_channels != arch.latent_channels) {
    Fail(ErrorKind::kModelMismatch, "bitstream architecture does not match the model");
  }
  if (h.width == 0 || h.height == 0 || h.tile_size == 0 || h.tile_size % arch.downscale() != 0) {
    Fail(ErrorKind::kFormat, "bitstream header has invalid geometry");
  }
  const tiling::TileGrid grid = tiling::Plan(h.width, h.height, h.tile_size, h.overlap, arch.downscale());
  if (h.tile_count != grid.tiles.size()) {
    Fail(ErrorKind::kFormat, "tile count " + std::to_string(h.tile_count) + " does not match the grid (" +
                                 std::to_string(grid.tiles.size()) + ")");
  }

  std::vector<std::span<const std::uint8_t>> bodies(grid.tiles.size());
  for (std::size_t i = 0; i < grid.tiles.size(); ++i) {
    const std::uint32_t length = r.U32();
    const std::uint32_t crc = r.U32();
    bodies[i] = r.Raw(length);
    if (Crc32(bodies[i]) != crc) Fail(ErrorKind::kFormat, "checksum mismatch in tile " + std::to_string(i));
  }
  if (r.remaining() != 0) Fail(ErrorKind::kFormat, "trailing bytes after the last tile");

  const std::vector<rc::CdfTable> tables = model.density().BuildTables();
  std::vector<Image> decoded(grid.tiles.size());
  ParallelFor(grid.tiles.size(), options.threads, [&](std::size_t i) {
    const tiling::Tile& tile = grid.tiles[i];
    QuantizedLatent latent;
    latent.channels = arch.latent_channels;
    latent.height = tile.padded_height / arch.downscale();
    latent.width = tile.padded_width / arch.downscale();
    const std::size_t plane = latent.height * latent.width;
    latent.values.reserve(latent.channels * plane);
    ByteReader tr(bodies[i], "tile payload");
    for (std::size_t c = 0; c < latent.channels; ++c) {
      const std::uint32_t length = tr.U32();
      const auto raw = tr.Raw(length);
      rc::Payload payload{std::vector<std::uint8_t>(raw.begin(), raw.end()), plane};
      const auto values = rc::Decode(payload, tables[c]);
      latent.values.insert(latent.values.end(), values.begin(), values.end());
    }
    if (tr.remaining() != 0) Fail(ErrorKind::kFormat, "tile " + std::to_string(i) + " has trailing bytes");
    decoded[i] = model.Synthesize(latent);
  });
  return tiling::Stitch(decoded, grid, options.mode);
}

}  // namespace caebench::codec

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

#ifndef CAEBENCH_TILER_HPP_
#define CAEBENCH_TILER_HPP_

// Splitting large images into independently coded tiles and putting the
// reconstructions back together.
//
// Every tile owns a core rectangle; the cores partition the image. With an
// overlap of V pixels the tile's source region extends up to V pixels past
// its core on each side that has a neighbour. When stitching in blend mode,
// the two tiles on either side of a core boundary are mixed with a linear
// ramp over a band of up to V pixels centred on that boundary; elsewhere a
// pixel comes from its core tile alone.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "caebench/image.hpp"

namespace caebench::tiling {

struct Rect {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  bool operator==(const Rect&) const = default;
};

struct Tile {
  std::size_t col = 0;
  std::size_t row = 0;
  Rect core;
  Rect source;
  // Source dimensions rounded up to the alignment; the extra pixels are
  // reflection padding on the right/bottom.
  std::size_t padded_width = 0;
  std::size_t padded_height = 0;
};

// One axis of the blend: at each pixel, the covering tile index (`first`)
// and, inside a band, the neighbour (`second`) whose weight is
// second_num / den. The first tile's weight is (den - second_num) / den.
struct AxisBlend {
  std::size_t first = 0;
  std::size_t second = 0;
  std::int64_t second_num = 0;
  std::int64_t den = 1;
};

struct TileGrid {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t tile_size = 0;
  std::size_t overlap = 0;
  std::size_t alignment = 8;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::vector<Tile> tiles;  // row-major
  // Half width of the blend band at each internal column / row boundary.
  std::vector<std::size_t> half_band_x;
  std::vector<std::size_t> half_band_y;

  const Tile& at(std::size_t col, std::size_t row) const { return tiles[row * cols + col]; }
};

TileGrid Plan(std::size_t width, std::size_t height, std::size_t tile_size = 256, std::size_t overlap = 0,
              std::size_t alignment = 8);

// Source region of a tile, reflection-padded to its padded size.
Image ExtractTile(const Image& image, const Tile& tile);

// Per-pixel blend weights along one axis, exact rationals.
std::vector<AxisBlend> AxisWeights(const TileGrid& grid, bool horizontal);

struct BlendWeights {
  std::vector<AxisBlend> x;
  std::vector<AxisBlend> y;
  // Weight of tile (col, row) at pixel (px, py) as numerator / denominator.
  std::pair<std::int64_t, std::int64_t> Weight(std::size_t col, std::size_t row, std::size_t px,
                                               std::size_t py) const;
};
BlendWeights ComputeBlendWeights(const TileGrid& grid);

enum class StitchMode { kOverlapBlend, kAbut };

// `tiles` holds one decoded image per grid tile (row-major) at the tile's
// padded size.
Image Stitch(std::span<const Image> tiles, const TileGrid& grid, StitchMode mode);

}  // namespace caebench::tiling

#endif  // CAEBENCH_TILER_HPP_

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

#include "caebench/tiler.hpp"

#include <algorithm>
#include <string>

#include "caebench/error.hpp"

namespace caebench::tiling {
namespace {

std::size_t RoundUp(std::size_t v, std::size_t a) { return (v + a - 1) / a * a; }

// Index into [0, n) for a position past the end, mirroring about the last
// sample without repeating it.
std::size_t Reflect(std::size_t i, std::size_t n) {
  if (n == 1) return 0;
  const std::size_t period = 2 * (n - 1);
  const std::size_t m = i % period;
  return m < n ? m : period - m;
}

std::vector<std::size_t> CoreStarts(std::size_t extent, std::size_t tile) {
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s < extent; s += tile) starts.push_back(s);
  return starts;
}

std::vector<std::size_t> HalfBands(std::size_t extent, std::size_t tile, std::size_t overlap) {
  const auto starts = CoreStarts(extent, tile);
  std::vector<std::size_t> bands;
  for (std::size_t k = 0; k + 1 < starts.size(); ++k) {
    const std::size_t left = starts[k + 1] - starts[k];
    const std::size_t right = (k + 2 < starts.size() ? starts[k + 2] : extent) - starts[k + 1];
    bands.push_back(std::min({overlap / 2, left / 2, right / 2}));
  }
  return bands;
}

std::size_t CoreIndex(std::size_t pos, std::size_t tile) { return pos / tile; }

}  // namespace

TileGrid Plan(std::size_t width, std::size_t height, std::size_t tile_size, std::size_t overlap,
              std::size_t alignment) {
  if (width == 0 || height == 0) Fail(ErrorKind::kInvalidArgument, "image dimensions must be positive");
  if (tile_size == 0 || alignment == 0 || tile_size % alignment != 0) {
    Fail(ErrorKind::kInvalidArgument, "tile size must be a positive multiple of " + std::to_string(alignment));
  }
  TileGrid grid;
  grid.width = width;
  grid.height = height;
  grid.tile_size = tile_size;
  grid.overlap = overlap;
  grid.alignment = alignment;
  const auto xs = CoreStarts(width, tile_size);
  const auto ys = CoreStarts(height, tile_size);
  grid.cols = xs.size();
  grid.rows = ys.size();
  grid.half_band_x = HalfBands(width, tile_size, overlap);
  grid.half_band_y = HalfBands(height, tile_size, overlap);
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      Tile t;
      t.col = c;
      t.row = r;
      t.core = {xs[c], ys[r], std::min(tile_size, width - xs[c]), std::min(tile_size, height - ys[r])};
      const std::size_t x0 = t.core.x >= overlap ? t.core.x - overlap : 0;
      const std::size_t y0 = t.core.y >= overlap ? t.core.y - overlap : 0;
      const std::size_t x1 = std::min(width, t.core.x + t.core.width + overlap);
      const std::size_t y1 = std::min(height, t.core.y + t.core.height + overlap);
      t.source = {x0, y0, x1 - x0, y1 - y0};
      t.padded_width = RoundUp(t.source.width, alignment);
      t.padded_height = RoundUp(t.source.height, alignment);
      grid.tiles.push_back(t);
    }
  }
  return grid;
}

Image ExtractTile(const Image& image, const Tile& tile) {
  if (tile.source.x + tile.source.width > image.width || tile.source.y + tile.source.height > image.height) {
    Fail(ErrorKind::kShape, "tile source region lies outside the image");
  }
  Image out(tile.padded_width, tile.padded_height);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < tile.padded_height; ++y) {
      const std::size_t sy = tile.source.y + Reflect(y, tile.source.height);
      for (std::size_t x = 0; x < tile.padded_width; ++x) {
        out.at(c, y, x) = image.at(c, sy, tile.source.x + Reflect(x, tile.source.width));
      }
    }
  }
  return out;
}

std::vector<AxisBlend> AxisWeights(const TileGrid& grid, bool horizontal) {
  const std::size_t extent = horizontal ? grid.width : grid.height;
  const auto& bands = horizontal ? grid.half_band_x : grid.half_band_y;
  std::vector<AxisBlend> out(extent);
  for (std::size_t p = 0; p < extent; ++p) {
    const std::size_t core = CoreIndex(p, grid.tile_size);
    out[p].first = core;
    out[p].second = core;
  }
  for (std::size_t k = 0; k < bands.size(); ++k) {
    const std::size_t h = bands[k];
    if (h == 0) continue;
    const std::size_t boundary = (k + 1) * grid.tile_size;
    // Band [boundary - h, boundary + h): the right tile's weight climbs
    // through (2j + 1) / (4h), j = 0 .. 2h - 1.
    for (std::size_t j = 0; j < 2 * h; ++j) {
      AxisBlend& b = out[boundary - h + j];
      b.first = k;
      b.second = k + 1;
      b.second_num = static_cast<std::int64_t>(2 * j + 1);
      b.den = static_cast<std::int64_t>(4 * h);
    }
  }
  return out;
}

std::pair<std::int64_t, std::int64_t> BlendWeights::Weight(std::size_t col, std::size_t row, std::size_t px,
                                                           std::size_t py) const {
  auto axis = [](const AxisBlend& b, std::size_t idx) -> std::int64_t {
    std::int64_t w = 0;
    if (idx == b.first) w += b.den - b.second_num;
    if (idx == b.second) w += b.second_num;
    return w;
  };
  const AxisBlend& bx = x.at(px);
  const AxisBlend& by = y.at(py);
  return {axis(bx, col) * axis(by, row), bx.den * by.den};
}

BlendWeights ComputeBlendWeights(const TileGrid& grid) {
  return {AxisWeights(grid, true), AxisWeights(grid, false)};
}

Image Stitch(std::span<const Image> tiles, const TileGrid& grid, StitchMode mode) {
  if (tiles.size() != grid.tiles.size()) {
    Fail(ErrorKind::kInvalidArgument, "stitch needs " + std::to_string(grid.tiles.size()) + " tiles, got " +
                                          std::to_string(tiles.size()));
  }
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    if (tiles[i].width != grid.tiles[i].padded_width || tiles[i].height != grid.tiles[i].padded_height) {
      Fail(ErrorKind::kShape, "tile " + std::to_string(i) + " does not match its planned size");
    }
  }
  Image out(grid.width, grid.height);
  auto sample = [&](std::size_t col, std::size_t row, std::size_t c, std::size_t px, std::size_t py) {
    const Tile& t = grid.at(col, row);
    return tiles[row * grid.cols + col].at(c, py - t.source.y, px - t.source.x);
  };

  if (mode == StitchMode::kAbut) {
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t py = 0; py < grid.height; ++py)
        for (std::size_t px = 0; px < grid.width; ++px)
          out.at(c, py, px) = sample(CoreIndex(px, grid.tile_size), CoreIndex(py, grid.tile_size), c, px, py);
    return out;
  }

  const BlendWeights w = ComputeBlendWeights(grid);
  // a + t (b - a), kept inside [min(a, b), max(a, b)]; exact when a == b.
  auto lerp = [](float a, float b, double t) {
    const double v = static_cast<double>(a) + t * (static_cast<double>(b) - static_cast<double>(a));
    return static_cast<float>(std::clamp(v, static_cast<double>(std::min(a, b)),
                                         static_cast<double>(std::max(a, b))));
  };
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t py = 0; py < grid.height; ++py) {
      const AxisBlend& by = w.y[py];
      const double ty = static_cast<double>(by.second_num) / static_cast<double>(by.den);
      for (std::size_t px = 0; px < grid.width; ++px) {
        const AxisBlend& bx = w.x[px];
        const double tx = static_cast<double>(bx.second_num) / static_cast<double>(bx.den);
        const float top = lerp(sample(bx.first, by.first, c, px, py), sample(bx.second, by.first, c, px, py), tx);
        const float bottom =
            by.second == by.first
                ? top
                : lerp(sample(bx.first, by.second, c, px, py), sample(bx.second, by.second, c, px, py), tx);
        out.at(c, py, px) = lerp(top, bottom, ty);
      }
    }
  }
  return out;
}

}  // namespace caebench::tiling

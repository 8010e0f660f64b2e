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

#include "synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace caebench::testing {

Image SyntheticImage(std::size_t width, std::size_t height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(width, height);
  const double w = static_cast<double>(width);
  const double h = static_cast<double>(height);

  std::array<double, 3> c0{}, cx{}, cy{};
  for (int c = 0; c < 3; ++c) {
    c0[c] = 0.2 + 0.6 * u(rng);
    cx[c] = 0.4 * (u(rng) - 0.5);
    cy[c] = 0.4 * (u(rng) - 0.5);
  }
  for (int c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x)
        img.at(c, y, x) = static_cast<float>(c0[c] + cx[c] * x / w + cy[c] * y / h);

  const int shapes = 3 + static_cast<int>(rng() % 4);
  for (int s = 0; s < shapes; ++s) {
    const double cxp = u(rng) * w, cyp = u(rng) * h;
    const double r = (0.08 + 0.2 * u(rng)) * std::min(w, h);
    const bool disc = u(rng) < 0.5;
    std::array<double, 3> col{u(rng), u(rng), u(rng)};
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double dx = x - cxp, dy = y - cyp;
        const bool inside = disc ? dx * dx + dy * dy < r * r : std::abs(dx) < r && std::abs(dy) < 0.6 * r;
        if (!inside) continue;
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(col[c]);
      }
    }
  }

  const double fx = 2.0 * std::numbers::pi / (4.0 + 12.0 * u(rng));
  const double fy = 2.0 * std::numbers::pi / (4.0 + 12.0 * u(rng));
  const double tx = u(rng) * w, ty = u(rng) * h, tr = 0.25 * std::min(w, h);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double dx = x - tx, dy = y - ty;
      const double t = dx * dx + dy * dy < tr * tr ? 0.15 * std::sin(fx * x) * std::cos(fy * y) : 0.0;
      for (int c = 0; c < 3; ++c) {
        img.at(c, y, x) = static_cast<float>(std::clamp(img.at(c, y, x) + t + noise(rng), 0.0, 1.0));
      }
    }
  }
  return img;
}

Image UniformNoiseImage(std::size_t width, std::size_t height, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(width, height);
  for (auto& v : img.data) v = u(rng);
  return img;
}

}  // namespace caebench::testing

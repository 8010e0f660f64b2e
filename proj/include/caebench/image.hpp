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

#ifndef CAEBENCH_IMAGE_HPP_
#define CAEBENCH_IMAGE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "caebench/tensor.hpp"

namespace caebench {

// Planar RGB, samples nominally in [0, 1] (8-bit code values / 255).
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> data;  // channel-major: [c][y][x]

  static constexpr std::size_t kChannels = 3;

  Image() = default;
  Image(std::size_t w, std::size_t h, float fill = 0.0f)
      : width(w), height(h), data(kChannels * w * h, fill) {}

  std::size_t plane() const { return width * height; }
  float& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }
  bool operator==(const Image&) const = default;
};

// 8-bit binary PPM (P6) and PNG, chosen by extension.
Image ReadImage(const std::filesystem::path& path);
void WriteImage(const Image& image, const std::filesystem::path& path);

// Round-to-nearest 8-bit code values, interleaved RGB.
std::vector<std::uint8_t> ToInterleaved8(const Image& image);
Image FromInterleaved8(std::size_t width, std::size_t height, const std::uint8_t* rgb);

// [1, 3, H, W] double tensor and back.
ad::Tensor ToTensor(const Image& image, bool requires_grad = false);
Image FromTensor(const ad::Tensor& t, std::size_t batch_index = 0);

// Copy of a rectangle; the rectangle must lie inside the image.
Image Crop(const Image& image, std::size_t x, std::size_t y, std::size_t w, std::size_t h);

}  // namespace caebench

#endif  // CAEBENCH_IMAGE_HPP_

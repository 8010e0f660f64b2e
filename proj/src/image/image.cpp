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

#include "caebench/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "caebench/error.hpp"

namespace caebench {
namespace {

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool IsPng(const std::filesystem::path& path) { return Lower(path.extension().string()) == ".png"; }

// Next whitespace-separated header token, skipping '#' comments.
std::string PpmToken(std::istream& in) {
  std::string token;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(c));
  }
  return token;
}

Image ReadPpm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string());
  if (PpmToken(in) != "P6") Fail(ErrorKind::kFormat, path.string() + ": not a binary PPM (P6)");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(PpmToken(in));
    h = std::stoul(PpmToken(in));
    maxval = std::stoul(PpmToken(in));
  } catch (const std::exception&) {
    Fail(ErrorKind::kFormat, path.string() + ": malformed PPM header");
  }
  if (maxval != 255) Fail(ErrorKind::kFormat, path.string() + ": only 8-bit PPM is supported");
  if (w == 0 || h == 0) Fail(ErrorKind::kFormat, path.string() + ": empty image");
  std::vector<std::uint8_t> rgb(3 * w * h);
  in.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(rgb.size())) {
    Fail(ErrorKind::kFormat, path.string() + ": truncated pixel data");
  }
  return FromInterleaved8(w, h, rgb.data());
}

void WritePpm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  const auto rgb = ToInterleaved8(image);
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) Fail(ErrorKind::kIo, "write failed: " + path.string());
}

Image ReadPng(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    Fail(ErrorKind::kFormat, path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, rgb.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    Fail(ErrorKind::kFormat, path.string() + ": " + msg);
  }
  return FromInterleaved8(png.width, png.height, rgb.data());
}

void WritePng(const Image& image, const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  const auto rgb = ToInterleaved8(image);
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, rgb.data(), 0, nullptr)) {
    Fail(ErrorKind::kIo, path.string() + ": " + png.message);
  }
}

}  // namespace

Image ReadImage(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) Fail(ErrorKind::kIo, "no such file: " + path.string());
  return IsPng(path) ? ReadPng(path) : ReadPpm(path);
}

void WriteImage(const Image& image, const std::filesystem::path& path) {
  if (IsPng(path)) {
    WritePng(image, path);
  } else {
    WritePpm(image, path);
  }
}

std::vector<std::uint8_t> ToInterleaved8(const Image& image) {
  std::vector<std::uint8_t> rgb(3 * image.plane());
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < image.plane(); ++i) {
      const float v = std::clamp(image.data[c * image.plane() + i], 0.0f, 1.0f);
      rgb[3 * i + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  }
  return rgb;
}

Image FromInterleaved8(std::size_t width, std::size_t height, const std::uint8_t* rgb) {
  Image image(width, height);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < image.plane(); ++i) {
      image.data[c * image.plane() + i] = static_cast<float>(rgb[3 * i + c]) / 255.0f;
    }
  }
  return image;
}

ad::Tensor ToTensor(const Image& image, bool requires_grad) {
  std::vector<double> v(image.data.begin(), image.data.end());
  return ad::Tensor::FromData({1, 3, image.height, image.width}, std::move(v), requires_grad);
}

Image FromTensor(const ad::Tensor& t, std::size_t batch_index) {
  if (t.rank() != 4 || t.dim(1) != 3) {
    Fail(ErrorKind::kShape, "expected [N,3,H,W] tensor, got " + ad::ShapeString(t.shape()));
  }
  Image image(t.dim(3), t.dim(2));
  const std::size_t n = image.data.size();
  auto v = t.data().subspan(batch_index * n, n);
  std::transform(v.begin(), v.end(), image.data.begin(), [](double d) { return static_cast<float>(d); });
  return image;
}

Image Crop(const Image& image, std::size_t x, std::size_t y, std::size_t w, std::size_t h) {
  if (x + w > image.width || y + h > image.height) {
    Fail(ErrorKind::kInvalidArgument, "crop rectangle outside image");
  }
  Image out(w, h);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t r = 0; r < h; ++r)
      std::copy_n(&image.data[(c * image.height + y + r) * image.width + x], w, &out.at(c, r, 0));
  return out;
}

}  // namespace caebench

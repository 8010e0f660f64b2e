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

#include "media_tree.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <unistd.h>

#include "caebench/image.hpp"

namespace caebench::testing {
namespace {

Image Swatch(std::size_t salt) {
  Image img(6, 4);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>((salt * 37 + i * 11) % 256) / 255.0f;
  return img;
}

}  // namespace

MediaShape StudyMediaShape() {
  MediaShape s;
  s.codecs = {"cae_mse", "cae_msssim", "hevc", "jpegxt", "j2k_psnr", "j2k_visual"};
  s.contents = {"bike", "cafe", "p08", "p26", "woman", "p06", "p10"};
  s.rates = {"R1", "R2", "R3", "R4"};
  return s;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  path_ = std::filesystem::temp_directory_path() /
          ("caebench_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(stamp) + "_" +
           std::to_string(counter++));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void WriteMediaTree(const std::filesystem::path& root, const MediaShape& shape) {
  std::filesystem::create_directories(root);
  std::ofstream bpp(root / "bitrates.csv");
  bpp << "codec,content,rate_id,actual_bpp\n";
  std::size_t salt = 0;
  for (const auto& codec : shape.codecs)
    for (const auto& content : shape.contents)
      for (std::size_t r = 0; r < shape.rates.size(); ++r) {
        const auto dir = root / codec / content;
        std::filesystem::create_directories(dir);
        WriteImage(Swatch(++salt), dir / (shape.rates[r] + ".ppm"));
        bpp << codec << ',' << content << ',' << shape.rates[r] << ',' << 0.125 * static_cast<double>(r + 1) << '\n';
      }
  if (shape.references) {
    std::filesystem::create_directories(root / "reference");
    for (const auto& content : shape.contents) WriteImage(Swatch(++salt), root / "reference" / (content + ".ppm"));
  }
}

session::InventoryConfig InventoryFor(const std::filesystem::path& root, const MediaShape& shape) {
  session::InventoryConfig c;
  c.codecs = shape.codecs;
  c.contents = shape.contents;
  c.rates = shape.rates;
  c.media_root = root;
  c.include_references = shape.references;
  return c;
}

}  // namespace caebench::testing

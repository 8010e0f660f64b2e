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

#ifndef CAEBENCH_MODEL_HPP_
#define CAEBENCH_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "caebench/density.hpp"
#include "caebench/image.hpp"
#include "caebench/tensor.hpp"

namespace caebench::codec {

enum class Distortion : std::uint8_t { kMse = 0, kMsSsim = 1 };

const char* DistortionName(Distortion d);
// Accepts "mse", "msssim" and "ms-ssim".
Distortion ParseDistortion(const std::string& name);

struct Architecture {
  std::size_t units = 3;             // down/upsampling units, n
  std::size_t filters = 128;         // channels inside the transforms
  std::size_t latent_channels = 48;  // K
  std::size_t downscale() const { return std::size_t{1} << units; }
};

struct TrainingMeta {
  double lambda = 0.0;
  Distortion distortion = Distortion::kMse;
  std::uint64_t iterations = 0;
};

inline constexpr double kLeakySlope = 0.2;

struct ConvLayer {
  std::string name;
  ad::Tensor weight;  // conv: [O, I, 3, 3]; transposed: [I, O, 3, 3]
  ad::Tensor bias;
  std::size_t stride = 1;
  bool transposed = false;
  bool activation = true;
};

// 32-bit inference tensor.
struct Tensor32 {
  ad::Shape shape;
  AlignedVector<float> data;
};

// Integer latent of one image: [K, h, w].
struct QuantizedLatent {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> values;
};

// Rounds half away from zero.
std::int32_t RoundLatent(double v);

class CodecModel {
 public:
  CodecModel() = default;
  // Fan-in scaled uniform weights, zero biases.
  static CodecModel Create(const Architecture& arch, std::uint64_t seed);

  const Architecture& arch() const { return arch_; }
  TrainingMeta& meta() { return meta_; }
  const TrainingMeta& meta() const { return meta_; }
  FactorizedDensity& density() { return density_; }
  const FactorizedDensity& density() const { return density_; }
  std::vector<ConvLayer>& encoder() { return encoder_; }
  std::vector<ConvLayer>& decoder() { return decoder_; }
  const std::vector<ConvLayer>& encoder() const { return encoder_; }
  const std::vector<ConvLayer>& decoder() const { return decoder_; }

  // Training path (64-bit, taped). x is [N, 3, H, W] with H, W divisible by
  // 2^n; the latent is [N, K, H / 2^n, W / 2^n].
  ad::Tensor Analyze(ad::Tape& tape, const ad::Tensor& x) const;
  // Unclamped reconstruction [N, 3, h * 2^n, w * 2^n].
  ad::Tensor Synthesize(ad::Tape& tape, const ad::Tensor& latent) const;

  // Inference path (32-bit).
  Tensor32 Analyze(const Image& image) const;
  // Reconstruction clamped to [0, 1].
  Image Synthesize(const QuantizedLatent& latent) const;

  std::vector<ad::Tensor> Parameters() const;
  std::vector<std::string> ParameterNames() const;

  // Deep copy with independent parameter storage.
  CodecModel Clone() const;

  // Checkpoint ("CAEM") serialisation; parameters stored as little-endian
  // float32.
  std::vector<std::uint8_t> Serialize() const;
  static CodecModel Deserialize(std::span<const std::uint8_t> bytes);
  void Save(const std::filesystem::path& path) const;
  static CodecModel Load(const std::filesystem::path& path);
  // FNV-1a 64 of the serialised checkpoint.
  std::uint64_t Hash() const;

 private:
  Architecture arch_;
  TrainingMeta meta_;
  std::vector<ConvLayer> encoder_;
  std::vector<ConvLayer> decoder_;
  FactorizedDensity density_;
};

// Quantisation. Inference rounds; training adds i.i.d. U(-1/2, 1/2) noise.
QuantizedLatent QuantizeLatent(const Tensor32& latent);
ad::Tensor AddUniformNoise(ad::Tape& tape, const ad::Tensor& latent, std::mt19937_64& rng);
// Draw in the open interval (-1/2, 1/2).
double UniformNoise(std::mt19937_64& rng);

// Bits the density assigns to an integer latent.
double EstimateBits(const FactorizedDensity& density, const QuantizedLatent& latent);

struct RdLossReport {
  double loss = 0.0;            // J = lambda * D + R
  double distortion = 0.0;      // D
  double rate_bits = 0.0;       // R, bits per image
  double bits_per_pixel = 0.0;
  double lambda = 0.0;
};

// D is averaged over the batch (MSE over all samples, or 1 - mean MS-SSIM);
// rate_bits is the batch total, reported per image. Returns J as a taped
// scalar and fills the report.
ad::Tensor RdLoss(ad::Tape& tape, const ad::Tensor& x, const ad::Tensor& x_hat,
                  const ad::Tensor& rate_bits, double lambda, Distortion distortion,
                  RdLossReport* report);

}  // namespace caebench::codec

#endif  // CAEBENCH_MODEL_HPP_

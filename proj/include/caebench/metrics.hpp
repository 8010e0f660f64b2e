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

#ifndef CAEBENCH_METRICS_HPP_
#define CAEBENCH_METRICS_HPP_

#include <array>
#include <optional>

#include "caebench/image.hpp"
#include "caebench/tensor.hpp"

namespace caebench::metrics {

// Mean of squared differences over every element.
double Mse(const Image& x, const Image& y);

struct PsnrResult {
  // Per-channel MSE in 8-bit units.
  std::array<double, 3> channel_mse{};
  // Unset when the images are identical.
  std::optional<double> db;
  bool identical() const { return !db.has_value(); }
};

// 10 log10(255^2 * 3 / (MSE_R + MSE_G + MSE_B)); channel MSEs are summed.
PsnrResult PsnrRgb(const Image& reference, const Image& distorted);

// Multi-scale SSIM with the standard five scale weights, 11x11 Gaussian
// window (sigma 1.5) and valid filtering. Each scale halves the image with
// a 2x2 average. Images whose shorter side is below 176 use fewer scales
// (as many as keep the last scale at least 11 pixels) with the weights
// renormalised to sum to one. Colour images score the mean of the
// per-channel values.
inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

// Number of scales for an image of this size; throws below 11 pixels.
std::size_t MsSsimScales(std::size_t height, std::size_t width);

double MsSsim(const Image& x, const Image& y);

// Differentiable batch version for [N, C, H, W] tensors in [0, 1]. Returns a
// one-element tensor holding the mean MS-SSIM over images and channels.
ad::Tensor MsSsim(ad::Tape& tape, const ad::Tensor& x, const ad::Tensor& y);

struct QualityReport {
  PsnrResult psnr;
  double ms_ssim = 0.0;
  std::optional<double> bits_per_pixel;
};

QualityReport Evaluate(const Image& reference, const Image& distorted);

}  // namespace caebench::metrics

#endif  // CAEBENCH_METRICS_HPP_

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

#ifndef CAEBENCH_DENSITY_HPP_
#define CAEBENCH_DENSITY_HPP_

// Per-channel factorized density for quantized latents.
//
// Each channel owns a monotone cumulative c(x) = sigmoid(f(x)), where f is
// a stack of four scalar layers of widths 1 -> 3 -> 3 -> 3 -> 1:
//
//   h <- softplus(M_k) h + b_k              (softplus keeps slopes positive)
//   h <- h + tanh(a_k) * tanh(h)            (k < 3; |tanh(a_k)| < 1 keeps the
//                                            map increasing)
//
// The likelihood of an integer v is c(v + 1/2) - c(v - 1/2), floored at
// 2^-16 to match the coder's precision.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "caebench/entropy_tables.hpp"
#include "caebench/tensor.hpp"

namespace caebench::codec {

inline constexpr double kLikelihoodFloor = 1.0 / 65536.0;

class FactorizedDensity {
 public:
  static constexpr std::size_t kWidth = 3;
  static constexpr std::size_t kLayers = 4;

  FactorizedDensity() = default;
  // Initialised so every channel starts as a broad density of roughly
  // init_scale width; biases draw from U(-1/2, 1/2).
  FactorizedDensity(std::size_t channels, std::uint64_t seed, double init_scale = 10.0);

  std::size_t channels() const { return channels_; }

  // Parameter tensors in a fixed order, with matching names.
  std::vector<ad::Tensor> Parameters() const;
  std::vector<std::string> ParameterNames() const;
  // Expected shape of each parameter for a given channel count.
  static std::vector<ad::Shape> ParameterShapes(std::size_t channels);
  // Replaces the parameters (same order as Parameters()).
  void SetParameters(std::vector<ad::Tensor> params);

  double Logit(std::size_t channel, double x) const;
  double Cdf(std::size_t channel, double x) const;
  // Mass of [v - 1/2, v + 1/2) without the floor.
  double Likelihood(std::size_t channel, double v) const;
  double Median(std::size_t channel) const;

  // Sum over all entries of -log2(max(p, floor)); latent is [N, K, h, w].
  double RateBits(std::span<const double> latent, std::size_t batch, std::size_t plane) const;
  double RateBits(const ad::Tensor& latent) const;
  // Differentiable with respect to the latent and the parameters; a floored
  // entry contributes no gradient.
  ad::Tensor RateBits(ad::Tape& tape, const ad::Tensor& latent) const;

  // View of one channel for table construction.
  std::unique_ptr<rc::ContinuousDistribution> Channel(std::size_t channel) const;
  std::vector<rc::CdfTable> BuildTables() const;

 private:
  std::size_t channels_ = 0;
  // matrices[k]: [K, rows_k, cols_k]; biases[k]: [K, rows_k, 1];
  // factors[k]: [K, rows_k, 1] for k < 3.
  std::vector<ad::Tensor> matrices_;
  std::vector<ad::Tensor> biases_;
  std::vector<ad::Tensor> factors_;
};

}  // namespace caebench::codec

#endif  // CAEBENCH_DENSITY_HPP_

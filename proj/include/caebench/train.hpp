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

#ifndef CAEBENCH_TRAIN_HPP_
#define CAEBENCH_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "caebench/image.hpp"
#include "caebench/model.hpp"

namespace caebench::codec {

struct TrainConfig {
  double lambda = 0.0;
  Distortion distortion = Distortion::kMse;
  std::uint64_t iterations = 1;
  std::size_t batch = 16;
  double learning_rate = 1e-4;
  std::size_t crop = 128;
  std::uint64_t seed = 0;
};

struct LossLogEntry {
  std::uint64_t iteration = 0;
  RdLossReport report;
};

struct TrainResult {
  CodecModel model;
  std::vector<LossLogEntry> log;
  // Steps whose gradient contained NaN/Inf and were skipped.
  std::uint64_t skipped_steps = 0;
  // Set when the loss diverged; `model` then holds the last parameters that
  // produced a finite loss.
  bool aborted = false;
  std::string diagnostics;
};

// Random crop sampler over a fixed image set; every crop lies fully inside
// its source image.
class CropSampler {
 public:
  CropSampler(std::span<const Image> images, std::size_t crop);
  // [batch, 3, crop, crop] tensor in [0, 1].
  ad::Tensor Sample(std::size_t batch, std::mt19937_64& rng) const;
  std::size_t usable_images() const { return usable_.size(); }

 private:
  std::span<const Image> images_;
  std::vector<std::size_t> usable_;
  std::size_t crop_;
};

// Adam on J = lambda * D + R with noisy quantisation. Deterministic given
// the seed and the starting model. Throws on invalid configuration;
// divergence is reported through TrainResult.
TrainResult Train(const CodecModel& initial, std::span<const Image> images, const TrainConfig& config,
                  const std::function<void(const LossLogEntry&)>& on_step = {});

// One forward pass of the training objective (noise quantisation) without
// updating parameters.
RdLossReport TrainingLoss(const CodecModel& model, const ad::Tensor& batch, const TrainConfig& config,
                          std::mt19937_64& rng);

// Inference-mode evaluation: rounds latents, measures the distortion of the
// clamped reconstruction and the estimated bits. Averages over images.
struct HeldOutReport {
  double distortion = 0.0;
  double bits_per_pixel = 0.0;
  double psnr_db = 0.0;
};
HeldOutReport EvaluateHeldOut(const CodecModel& model, std::span<const Image> images, Distortion distortion);

}  // namespace caebench::codec

#endif  // CAEBENCH_TRAIN_HPP_

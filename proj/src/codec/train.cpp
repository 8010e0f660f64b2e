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

#include "caebench/train.hpp"

#include <cmath>
#include <sstream>

#include "caebench/adam.hpp"
#include "caebench/error.hpp"
#include "caebench/metrics.hpp"

namespace caebench::codec {

CropSampler::CropSampler(std::span<const Image> images, std::size_t crop) : images_(images), crop_(crop) {
  if (crop == 0) Fail(ErrorKind::kInvalidArgument, "crop size must be positive");
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].width >= crop && images[i].height >= crop) usable_.push_back(i);
  }
  if (usable_.empty()) {
    Fail(ErrorKind::kInvalidArgument, "no training image is at least " + std::to_string(crop) + "x" +
                                          std::to_string(crop));
  }
}

ad::Tensor CropSampler::Sample(std::size_t batch, std::mt19937_64& rng) const {
  const std::size_t plane = crop_ * crop_;
  std::vector<double> data(batch * 3 * plane);
  for (std::size_t n = 0; n < batch; ++n) {
    const Image& img = images_[usable_[rng() % usable_.size()]];
    const std::size_t x0 = rng() % (img.width - crop_ + 1);
    const std::size_t y0 = rng() % (img.height - crop_ + 1);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < crop_; ++y)
        for (std::size_t x = 0; x < crop_; ++x)
          data[((n * 3 + c) * crop_ + y) * crop_ + x] = img.at(c, y0 + y, x0 + x);
  }
  return ad::Tensor::FromData({batch, 3, crop_, crop_}, std::move(data));
}

namespace {

void ValidateConfig(const CodecModel& model, const TrainConfig& config) {
  if (!(config.lambda > 0.0)) Fail(ErrorKind::kInvalidArgument, "lambda must be positive");
  if (config.iterations == 0) Fail(ErrorKind::kInvalidArgument, "iterations must be at least 1");
  if (config.batch == 0) Fail(ErrorKind::kInvalidArgument, "batch must be at least 1");
  if (!(config.learning_rate > 0.0)) Fail(ErrorKind::kInvalidArgument, "learning rate must be positive");
  if (config.crop % model.arch().downscale() != 0) {
    Fail(ErrorKind::kInvalidArgument, "crop size must be divisible by " +
                                          std::to_string(model.arch().downscale()));
  }
  if (config.distortion == Distortion::kMsSsim) metrics::MsSsimScales(config.crop, config.crop);
}

ad::Tensor Objective(ad::Tape& tape, const CodecModel& model, const ad::Tensor& x, const TrainConfig& config,
                     std::mt19937_64& rng, RdLossReport* report) {
  const ad::Tensor y = model.Analyze(tape, x);
  const ad::Tensor y_tilde = AddUniformNoise(tape, y, rng);
  const ad::Tensor x_hat = model.Synthesize(tape, y_tilde);
  const ad::Tensor bits = model.density().RateBits(tape, y_tilde);
  return RdLoss(tape, x, x_hat, bits, config.lambda, config.distortion, report);
}

}  // namespace

RdLossReport TrainingLoss(const CodecModel& model, const ad::Tensor& batch, const TrainConfig& config,
                          std::mt19937_64& rng) {
  ad::Tape tape(false);
  RdLossReport report;
  Objective(tape, model, batch, config, rng, &report);
  return report;
}

TrainResult Train(const CodecModel& initial, std::span<const Image> images, const TrainConfig& config,
                  const std::function<void(const LossLogEntry&)>& on_step) {
  ValidateConfig(initial, config);
  const CropSampler sampler(images, config.crop);

  TrainResult result;
  result.model = initial.Clone();
  result.model.meta().lambda = config.lambda;
  result.model.meta().distortion = config.distortion;
  std::vector<ad::Tensor> params = result.model.Parameters();
  ad::AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  ad::AdamState state(adam, params);
  std::mt19937_64 rng(config.seed);

  std::vector<std::vector<double>> last_good;
  auto snapshot = [&] {
    last_good.clear();
    for (const auto& p : params) last_good.emplace_back(p.data().begin(), p.data().end());
  };
  snapshot();

  for (std::uint64_t it = 1; it <= config.iterations; ++it) {
    const ad::Tensor x = sampler.Sample(config.batch, rng);
    for (auto& p : params) p.zero_grad();
    ad::Tape tape;
    LossLogEntry entry;
    entry.iteration = it;
    ad::Tensor loss;
    try {
      loss = Objective(tape, result.model, x, config, rng, &entry.report);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNumeric) throw;
      for (std::size_t i = 0; i < params.size(); ++i) {
        std::copy(last_good[i].begin(), last_good[i].end(), params[i].mutable_data().begin());
      }
      result.aborted = true;
      std::ostringstream msg;
      msg << "training diverged at iteration " << it << ": " << e.what()
          << "; parameters restored to the last finite step";
      result.diagnostics = msg.str();
      break;
    }
    snapshot();
    tape.Backward(loss);
    if (ad::AdamStep(params, state) == ad::StepOutcome::kRejectedNonFinite) ++result.skipped_steps;
    result.model.meta().iterations = state.step();
    result.log.push_back(entry);
    if (on_step) on_step(entry);
  }
  for (auto& p : params) p.zero_grad();
  return result;
}

HeldOutReport EvaluateHeldOut(const CodecModel& model, std::span<const Image> images, Distortion distortion) {
  HeldOutReport out;
  if (images.empty()) return out;
  for (const Image& img : images) {
    const QuantizedLatent q = QuantizeLatent(model.Analyze(img));
    const Image rec = model.Synthesize(q);
    out.distortion += distortion == Distortion::kMse ? metrics::Mse(img, rec) : 1.0 - metrics::MsSsim(img, rec);
    out.bits_per_pixel += EstimateBits(model.density(), q) / static_cast<double>(img.plane());
    const auto psnr = metrics::PsnrRgb(img, rec);
    out.psnr_db += psnr.db.value_or(std::numeric_limits<double>::infinity());
  }
  const double n = static_cast<double>(images.size());
  out.distortion /= n;
  out.bits_per_pixel /= n;
  out.psnr_db /= n;
  return out;
}

}  // namespace caebench::codec

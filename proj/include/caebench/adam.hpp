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

#ifndef CAEBENCH_ADAM_HPP_
#define CAEBENCH_ADAM_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "caebench/tensor.hpp"

namespace caebench::ad {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

enum class StepOutcome {
  kApplied,
  // A gradient entry was NaN/Inf. Parameters, moments and the step counter
  // are left untouched.
  kRejectedNonFinite,
};

// First/second moment buffers for a fixed parameter list.
class AdamState {
 public:
  AdamState(const AdamConfig& config, std::span<const Tensor> params);

  const AdamConfig& config() const { return config_; }
  std::uint64_t step() const { return step_; }
  std::size_t num_params() const { return first_.size(); }
  std::span<const double> first_moment(std::size_t i) const { return first_[i]; }
  std::span<const double> second_moment(std::size_t i) const { return second_[i]; }

 private:
  friend StepOutcome AdamStep(std::span<Tensor>, AdamState&);
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

// One bias-corrected Adam update using each parameter's accumulated
// gradient. Parameters without a gradient buffer are treated as zero-grad.
StepOutcome AdamStep(std::span<Tensor> params, AdamState& state);

}  // namespace caebench::ad

#endif  // CAEBENCH_ADAM_HPP_

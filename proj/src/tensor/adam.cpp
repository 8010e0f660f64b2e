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

#include "caebench/adam.hpp"

#include <cmath>

#include "caebench/error.hpp"

namespace caebench::ad {

AdamState::AdamState(const AdamConfig& config, std::span<const Tensor> params) : config_(config) {
  first_.reserve(params.size());
  second_.reserve(params.size());
  for (const Tensor& p : params) {
    first_.emplace_back(p.size(), 0.0);
    second_.emplace_back(p.size(), 0.0);
  }
}

StepOutcome AdamStep(std::span<Tensor> params, AdamState& state) {
  if (params.size() != state.first_.size()) {
    Fail(ErrorKind::kShape, "Adam state was built for " + std::to_string(state.first_.size()) +
                                " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != state.first_[i].size()) {
      Fail(ErrorKind::kShape, "Adam moment buffer " + std::to_string(i) + " does not match " +
                                  ShapeString(params[i].shape()));
    }
    if (!params[i].has_grad()) continue;
    for (double g : params[i].grad()) {
      if (!std::isfinite(g)) return StepOutcome::kRejectedNonFinite;
    }
  }

  const AdamConfig& c = state.config_;
  const std::uint64_t t = ++state.step_;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) continue;
    auto g = params[i].grad();
    auto w = params[i].mutable_data();
    auto& m = state.first_[i];
    auto& v = state.second_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      w[k] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
  return StepOutcome::kApplied;
}

}  // namespace caebench::ad

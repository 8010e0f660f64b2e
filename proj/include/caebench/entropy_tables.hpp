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

#ifndef CAEBENCH_ENTROPY_TABLES_HPP_
#define CAEBENCH_ENTROPY_TABLES_HPP_

#include <cstdint>

#include "caebench/range_coder.hpp"

namespace caebench::rc {

// A continuous scalar distribution the coder can discretise on the integer
// grid, each integer v owning the interval [v - 1/2, v + 1/2).
class ContinuousDistribution {
 public:
  virtual ~ContinuousDistribution() = default;
  virtual double Cdf(double x) const = 0;
  // 1 - Cdf(x), computed without cancellation in the upper tail.
  virtual double Survival(double x) const = 0;
  virtual double Median() const = 0;
};

// Mass the table may leave to the escape symbol.
inline constexpr double kTailMass = 1.0 / 65536.0;
// Largest distance from the median the table will cover.
inline constexpr std::int32_t kMaxHalfWidth = 4096;

double IntervalMass(const ContinuousDistribution& d, double lo, double hi);

// Support is the narrowest integer range around the median whose outside
// mass is below kTailMass (never narrower than median +- 1, never wider than
// kMaxHalfWidth); frequencies are proportional to the interval masses,
// floored at one.
CdfTable BuildCdf(const ContinuousDistribution& d);

}  // namespace caebench::rc

#endif  // CAEBENCH_ENTROPY_TABLES_HPP_

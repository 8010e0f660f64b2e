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

#ifndef CAEBENCH_STATS_HPP_
#define CAEBENCH_STATS_HPP_

// Small-sample statistics for opinion scores.

#include <cstddef>
#include <optional>
#include <span>

namespace caebench::stats {

// Regularised incomplete beta I_x(a, b).
double IncompleteBeta(double a, double b, double x);

// Student t with `dof` degrees of freedom (dof > 0, not necessarily whole).
double StudentTCdf(double t, double dof);
double StudentTQuantile(double p, double dof);

struct MeanCi {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;                // sample (n - 1) standard deviation
  std::optional<double> half_width;  // 95% Student-t half width; needs n >= 2
};

// Throws kInvalidArgument for an empty sample.
MeanCi MeanWithCi(std::span<const double> values, double confidence = 0.95);

enum class Verdict { kFirstBetter, kSecondBetter, kTie };

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;
  Verdict verdict = Verdict::kTie;
};

// Two-sided Welch test. Both samples need n >= 2. When both variances are
// zero the means decide outright (p = 0 if they differ, 1 otherwise) and
// t / dof are reported as +-inf / NaN.
WelchResult WelchTest(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

}  // namespace caebench::stats

#endif  // CAEBENCH_STATS_HPP_

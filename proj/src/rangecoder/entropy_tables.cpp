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

#include "caebench/entropy_tables.hpp"

#include <cmath>
#include <vector>

#include "caebench/error.hpp"

namespace caebench::rc {

double IntervalMass(const ContinuousDistribution& d, double lo, double hi) {
  const double median = d.Median();
  if (hi <= median) return std::max(0.0, d.Cdf(hi) - d.Cdf(lo));
  if (lo >= median) return std::max(0.0, d.Survival(lo) - d.Survival(hi));
  return std::max(0.0, 1.0 - d.Cdf(lo) - d.Survival(hi));
}

CdfTable BuildCdf(const ContinuousDistribution& d) {
  const double median = d.Median();
  if (!std::isfinite(median)) Fail(ErrorKind::kNumeric, "density median is not finite");
  const auto center = static_cast<std::int32_t>(
      std::clamp(std::round(median), static_cast<double>(kRawMin + kMaxHalfWidth),
                 static_cast<double>(kRawMax - kMaxHalfWidth)));
  const double half_tail = kTailMass / 2.0;

  // Smallest k in [1, kMaxHalfWidth] with tail(k) < half_tail, where tail is
  // monotone decreasing in k.
  auto search = [&](auto tail) {
    std::int32_t lo = 1;
    std::int32_t hi = kMaxHalfWidth;
    if (tail(hi) >= half_tail) return hi;
    while (lo < hi) {
      const std::int32_t mid = lo + (hi - lo) / 2;
      if (tail(mid) < half_tail) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    return lo;
  };
  const std::int32_t below = search([&](std::int32_t k) { return d.Cdf(center - k - 0.5); });
  const std::int32_t above = search([&](std::int32_t k) { return d.Survival(center + k + 0.5); });
  const std::int32_t first = center - below;
  const std::int32_t last = center + above;

  std::vector<double> pmf;
  pmf.reserve(static_cast<std::size_t>(last - first) + 2);
  for (std::int32_t v = first; v <= last; ++v) pmf.push_back(IntervalMass(d, v - 0.5, v + 0.5));
  pmf.push_back(d.Cdf(first - 0.5) + d.Survival(last + 0.5));
  return QuantizePmf(first, pmf);
}

}  // namespace caebench::rc

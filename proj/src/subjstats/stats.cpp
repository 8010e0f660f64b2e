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

#include "caebench/stats.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "caebench/error.hpp"

namespace caebench::stats {
namespace {

// Continued fraction for I_x(a, b), modified Lentz; converges quickly for
// x < (a + 1) / (a + b + 2).
double BetaFraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 1000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  Fail(ErrorKind::kNumeric, "incomplete beta did not converge");
}

double Variance(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

double Mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double IncompleteBeta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) Fail(ErrorKind::kInvalidArgument, "incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) Fail(ErrorKind::kInvalidArgument, "incomplete beta needs x in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * BetaFraction(a, b, x) / a;
  return 1.0 - front * BetaFraction(b, a, 1.0 - x) / b;
}

double StudentTCdf(double t, double dof) {
  if (!(dof > 0.0)) Fail(ErrorKind::kInvalidArgument, "Student t needs positive degrees of freedom");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * IncompleteBeta(dof / 2.0, 0.5, dof / (dof + t * t));
  return t > 0 ? 1.0 - tail : tail;
}

double StudentTQuantile(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) Fail(ErrorKind::kInvalidArgument, "quantile needs p in (0, 1)");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -StudentTQuantile(1.0 - p, dof);
  double lo = 0.0, hi = 1.0;
  while (StudentTCdf(hi, dof) < p) hi *= 2.0;
  // Bisection to the last representable step.
  for (int i = 0; i < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (StudentTCdf(mid, dof) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

MeanCi MeanWithCi(std::span<const double> values, double confidence) {
  if (values.empty()) Fail(ErrorKind::kInvalidArgument, "mean of an empty sample");
  MeanCi r;
  r.n = values.size();
  r.mean = Mean(values);
  if (r.n >= 2) {
    r.stddev = std::sqrt(Variance(values, r.mean));
    const double t = StudentTQuantile(0.5 + confidence / 2.0, static_cast<double>(r.n - 1));
    r.half_width = t * r.stddev / std::sqrt(static_cast<double>(r.n));
  }
  return r;
}

WelchResult WelchTest(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() < 2 || b.size() < 2) Fail(ErrorKind::kInvalidArgument, "Welch test needs two scores per side");
  const double ma = Mean(a), mb = Mean(b);
  const double va = Variance(a, ma) / static_cast<double>(a.size());
  const double vb = Variance(b, mb) / static_cast<double>(b.size());
  WelchResult r;
  if (va + vb == 0.0) {
    r.dof = std::numeric_limits<double>::quiet_NaN();
    if (ma == mb) {
      r.t = 0.0;
      r.p = 1.0;
      return r;
    }
    r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    r.verdict = ma > mb ? Verdict::kFirstBetter : Verdict::kSecondBetter;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(va + vb);
  r.dof = (va + vb) * (va + vb) /
          (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  // Two-sided p from the upper tail directly, avoiding 1 - cdf cancellation.
  r.p = IncompleteBeta(r.dof / 2.0, 0.5, r.dof / (r.dof + r.t * r.t));
  if (r.p < alpha) r.verdict = r.t > 0 ? Verdict::kFirstBetter : Verdict::kSecondBetter;
  return r;
}

}  // namespace caebench::stats

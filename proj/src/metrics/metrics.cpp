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

#include "caebench/metrics.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "caebench/error.hpp"

namespace caebench::metrics {
namespace {

void RequireSameSize(const Image& x, const Image& y) {
  if (x.width != y.width || x.height != y.height) {
    Fail(ErrorKind::kShape, "image sizes differ: " + std::to_string(x.width) + "x" +
                                std::to_string(x.height) + " vs " + std::to_string(y.width) + "x" +
                                std::to_string(y.height));
  }
  if (x.width == 0 || x.height == 0) Fail(ErrorKind::kInvalidArgument, "empty image");
}

// Separable pieces of the normalised Gaussian window.
std::pair<ad::Tensor, ad::Tensor> GaussianKernels() {
  std::vector<double> g(kSsimWindow);
  const double center = static_cast<double>(kSsimWindow - 1) / 2.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i) - center;
    g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
  }
  const double sum = std::accumulate(g.begin(), g.end(), 0.0);
  for (double& v : g) v /= sum;
  return {ad::Tensor::FromData({1, 1, kSsimWindow, 1}, g),
          ad::Tensor::FromData({1, 1, 1, kSsimWindow}, g)};
}

}  // namespace

double Mse(const Image& x, const Image& y) {
  RequireSameSize(x, y);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double d = static_cast<double>(x.data[i]) - static_cast<double>(y.data[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(x.data.size());
}

PsnrResult PsnrRgb(const Image& reference, const Image& distorted) {
  RequireSameSize(reference, distorted);
  PsnrResult result;
  const std::size_t plane = reference.plane();
  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double d = (static_cast<double>(reference.data[c * plane + i]) -
                        static_cast<double>(distorted.data[c * plane + i])) * 255.0;
      acc += d * d;
    }
    result.channel_mse[c] = acc / static_cast<double>(plane);
    total += result.channel_mse[c];
  }
  if (total > 0.0) result.db = 10.0 * std::log10(255.0 * 255.0 * 3.0 / total);
  return result;
}

std::size_t MsSsimScales(std::size_t height, std::size_t width) {
  const std::size_t shorter = std::min(height, width);
  if (shorter < kSsimWindow) {
    Fail(ErrorKind::kShape, "MS-SSIM needs at least " + std::to_string(kSsimWindow) +
                                " pixels on each side, got " + std::to_string(width) + "x" +
                                std::to_string(height));
  }
  std::size_t scales = 1;
  while (scales < kMsSsimWeights.size() && (shorter >> scales) >= kSsimWindow) ++scales;
  return scales;
}

ad::Tensor MsSsim(ad::Tape& tape, const ad::Tensor& x, const ad::Tensor& y) {
  if (x.shape() != y.shape() || x.rank() != 4) {
    Fail(ErrorKind::kShape, "MS-SSIM inputs must share an [N,C,H,W] shape: " +
                                ad::ShapeString(x.shape()) + " vs " + ad::ShapeString(y.shape()));
  }
  const std::size_t scales = MsSsimScales(x.dim(2), x.dim(3));
  double weight_sum = 0.0;
  for (std::size_t s = 0; s < scales; ++s) weight_sum += kMsSsimWeights[s];

  // Unit data range, so the usual constants apply without the 255 factor.
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  const auto [gv, gh] = GaussianKernels();
  const ad::Tensor pool = ad::Tensor::Filled({1, 1, 2, 2}, 0.25);
  const ad::Tensor none;
  const ad::ConvParams valid;
  ad::ConvParams halve;
  halve.stride = 2;

  auto blur = [&](const ad::Tensor& t) {
    return ad::Conv2d(tape, ad::Conv2d(tape, t, gv, none, valid), gh, none, valid);
  };

  const ad::Shape planes = {x.dim(0) * x.dim(1), 1, x.dim(2), x.dim(3)};
  ad::Tensor a = ad::Reshape(tape, x, planes);
  ad::Tensor b = ad::Reshape(tape, y, planes);
  ad::Tensor product;
  for (std::size_t s = 0; s < scales; ++s) {
    const ad::Tensor mu_a = blur(a);
    const ad::Tensor mu_b = blur(b);
    const ad::Tensor mu_ab = ad::Mul(tape, mu_a, mu_b);
    const ad::Tensor var_a = ad::Sub(tape, blur(ad::Square(tape, a)), ad::Square(tape, mu_a));
    const ad::Tensor var_b = ad::Sub(tape, blur(ad::Square(tape, b)), ad::Square(tape, mu_b));
    const ad::Tensor cov = ad::Sub(tape, blur(ad::Mul(tape, a, b)), mu_ab);
    ad::Tensor map = ad::Div(tape, ad::AddScalar(tape, ad::MulScalar(tape, cov, 2.0), kC2),
                             ad::AddScalar(tape, ad::Add(tape, var_a, var_b), kC2));
    if (s + 1 == scales) {
      const ad::Tensor luminance = ad::Div(
          tape, ad::AddScalar(tape, ad::MulScalar(tape, mu_ab, 2.0), kC1),
          ad::AddScalar(tape, ad::Add(tape, ad::Square(tape, mu_a), ad::Square(tape, mu_b)), kC1));
      map = ad::Mul(tape, luminance, map);
    }
    // Negative contrast-structure terms are clipped before the fractional
    // power.
    const ad::Tensor term = ad::PowScalar(tape, ad::Relu(tape, ad::SpatialMean(tape, map)),
                                          kMsSsimWeights[s] / weight_sum);
    product = product.defined() ? ad::Mul(tape, product, term) : term;
    if (s + 1 < scales) {
      a = ad::Conv2d(tape, a, pool, none, halve);
      b = ad::Conv2d(tape, b, pool, none, halve);
    }
  }
  return ad::Mean(tape, product);
}

double MsSsim(const Image& x, const Image& y) {
  RequireSameSize(x, y);
  ad::Tape tape(false);
  return MsSsim(tape, ToTensor(x), ToTensor(y)).item();
}

QualityReport Evaluate(const Image& reference, const Image& distorted) {
  QualityReport report;
  report.psnr = PsnrRgb(reference, distorted);
  report.ms_ssim = MsSsim(reference, distorted);
  return report;
}

}  // namespace caebench::metrics

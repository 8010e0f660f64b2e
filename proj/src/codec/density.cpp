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

#include "caebench/density.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "caebench/error.hpp"

namespace caebench::codec {
namespace {

constexpr std::array<std::size_t, 4> kIn = {1, 3, 3, 3};
constexpr std::array<std::size_t, 4> kOut = {3, 3, 3, 1};

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double SoftplusValue(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

struct Trace {
  std::array<std::array<double, 3>, 4> input{};
  std::array<std::array<double, 3>, 4> pre{};
};

struct ChannelGrad {
  std::array<std::array<double, 9>, 4> matrix{};
  std::array<std::array<double, 3>, 4> bias{};
  std::array<std::array<double, 3>, 3> factor{};
};

// Transformed parameters of one channel.
struct ChannelKernel {
  std::array<std::array<double, 9>, 4> raw_matrix{};
  std::array<std::array<double, 9>, 4> slope{};
  std::array<std::array<double, 3>, 4> bias{};
  std::array<std::array<double, 3>, 3> gate{};

  ChannelKernel(const std::vector<ad::Tensor>& matrices, const std::vector<ad::Tensor>& biases,
                const std::vector<ad::Tensor>& factors, std::size_t c) {
    for (std::size_t k = 0; k < 4; ++k) {
      const std::size_t n = kIn[k] * kOut[k];
      auto m = matrices[k].data().subspan(c * n, n);
      for (std::size_t i = 0; i < n; ++i) {
        raw_matrix[k][i] = m[i];
        slope[k][i] = SoftplusValue(m[i]);
      }
      auto b = biases[k].data().subspan(c * kOut[k], kOut[k]);
      for (std::size_t r = 0; r < kOut[k]; ++r) bias[k][r] = b[r];
      if (k < 3) {
        auto a = factors[k].data().subspan(c * kOut[k], kOut[k]);
        for (std::size_t r = 0; r < kOut[k]; ++r) gate[k][r] = std::tanh(a[r]);
      }
    }
  }

  double Forward(double x, Trace* trace) const {
    std::array<double, 3> h = {x, 0.0, 0.0};
    for (std::size_t k = 0; k < 4; ++k) {
      std::array<double, 3> pre{};
      for (std::size_t r = 0; r < kOut[k]; ++r) {
        double acc = bias[k][r];
        for (std::size_t i = 0; i < kIn[k]; ++i) acc += slope[k][r * kIn[k] + i] * h[i];
        pre[r] = acc;
      }
      if (trace != nullptr) {
        trace->input[k] = h;
        trace->pre[k] = pre;
      }
      if (k == 3) return pre[0];
      for (std::size_t r = 0; r < kOut[k]; ++r) h[r] = pre[r] + gate[k][r] * std::tanh(pre[r]);
    }
    return 0.0;
  }

  // Accumulates parameter gradients for upstream g = dL/dlogit and returns
  // dL/dx.
  double Backward(const Trace& trace, double g, ChannelGrad& grad) const {
    std::array<double, 3> gh = {g, 0.0, 0.0};
    for (std::size_t k = 4; k-- > 0;) {
      std::array<double, 3> gpre{};
      for (std::size_t r = 0; r < kOut[k]; ++r) {
        if (k == 3) {
          gpre[r] = gh[r];
        } else {
          const double t = std::tanh(trace.pre[k][r]);
          gpre[r] = gh[r] * (1.0 + gate[k][r] * (1.0 - t * t));
          grad.factor[k][r] += gh[r] * t * (1.0 - gate[k][r] * gate[k][r]);
        }
        grad.bias[k][r] += gpre[r];
      }
      std::array<double, 3> gin{};
      for (std::size_t r = 0; r < kOut[k]; ++r) {
        for (std::size_t i = 0; i < kIn[k]; ++i) {
          const std::size_t idx = r * kIn[k] + i;
          grad.matrix[k][idx] += gpre[r] * trace.input[k][i] * Sigmoid(raw_matrix[k][idx]);
          gin[i] += gpre[r] * slope[k][idx];
        }
      }
      gh = gin;
    }
    return gh[0];
  }

  // Likelihood of [v - 1/2, v + 1/2) with the sign trick that evaluates both
  // sigmoids on the side where they are small.
  struct Mass {
    double p;
    double dp_dupper;
    double dp_dlower;
  };
  static Mass IntervalMass(double lower, double upper) {
    const double s = (lower + upper > 0.0) ? -1.0 : 1.0;
    const double su = Sigmoid(s * upper);
    const double sl = Sigmoid(s * lower);
    const double diff = su - sl;
    const double sg = diff >= 0.0 ? 1.0 : -1.0;
    return {sg * diff, sg * s * su * (1.0 - su), -sg * s * sl * (1.0 - sl)};
  }
};

class ChannelDistribution : public rc::ContinuousDistribution {
 public:
  ChannelDistribution(const FactorizedDensity& density, std::size_t channel)
      : density_(density), channel_(channel), median_(density.Median(channel)) {}
  double Cdf(double x) const override { return Sigmoid(density_.Logit(channel_, x)); }
  double Survival(double x) const override { return Sigmoid(-density_.Logit(channel_, x)); }
  double Median() const override { return median_; }

 private:
  const FactorizedDensity& density_;
  std::size_t channel_;
  double median_;
};

}  // namespace

FactorizedDensity::FactorizedDensity(std::size_t channels, std::uint64_t seed, double init_scale)
    : channels_(channels) {
  if (channels == 0) Fail(ErrorKind::kInvalidArgument, "density needs at least one channel");
  std::mt19937_64 rng(seed);
  const double scale = std::pow(init_scale, 1.0 / static_cast<double>(kLayers));
  const auto shapes = ParameterShapes(channels);
  for (std::size_t k = 0; k < kLayers; ++k) {
    const double init = std::log(std::expm1(1.0 / scale / static_cast<double>(kOut[k])));
    matrices_.push_back(ad::Tensor::Filled(shapes[k], init, true));
    std::vector<double> b(channels * kOut[k]);
    for (double& v : b) v = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
    biases_.push_back(ad::Tensor::FromData(shapes[kLayers + k], std::move(b), true));
    if (k < 3) factors_.push_back(ad::Tensor::Zeros(shapes[2 * kLayers + k], true));
  }
}

std::vector<ad::Shape> FactorizedDensity::ParameterShapes(std::size_t channels) {
  std::vector<ad::Shape> shapes;
  for (std::size_t k = 0; k < kLayers; ++k) shapes.push_back({channels, kOut[k], kIn[k]});
  for (std::size_t k = 0; k < kLayers; ++k) shapes.push_back({channels, kOut[k], 1});
  for (std::size_t k = 0; k < 3; ++k) shapes.push_back({channels, kOut[k], 1});
  return shapes;
}

std::vector<ad::Tensor> FactorizedDensity::Parameters() const {
  std::vector<ad::Tensor> params = matrices_;
  params.insert(params.end(), biases_.begin(), biases_.end());
  params.insert(params.end(), factors_.begin(), factors_.end());
  return params;
}

std::vector<std::string> FactorizedDensity::ParameterNames() const {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < kLayers; ++k) names.push_back("density.matrix" + std::to_string(k));
  for (std::size_t k = 0; k < kLayers; ++k) names.push_back("density.bias" + std::to_string(k));
  for (std::size_t k = 0; k < 3; ++k) names.push_back("density.factor" + std::to_string(k));
  return names;
}

void FactorizedDensity::SetParameters(std::vector<ad::Tensor> params) {
  if (params.size() != 2 * kLayers + 3) Fail(ErrorKind::kShape, "density expects 11 parameter tensors");
  const std::size_t channels = params[0].dim(0);
  const auto shapes = ParameterShapes(channels);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != shapes[i]) {
      Fail(ErrorKind::kShape, "density parameter " + std::to_string(i) + " has shape " +
                                  ad::ShapeString(params[i].shape()) + ", expected " +
                                  ad::ShapeString(shapes[i]));
    }
  }
  channels_ = channels;
  matrices_.assign(params.begin(), params.begin() + kLayers);
  biases_.assign(params.begin() + kLayers, params.begin() + 2 * kLayers);
  factors_.assign(params.begin() + 2 * kLayers, params.end());
}

double FactorizedDensity::Logit(std::size_t channel, double x) const {
  return ChannelKernel(matrices_, biases_, factors_, channel).Forward(x, nullptr);
}

double FactorizedDensity::Cdf(std::size_t channel, double x) const { return Sigmoid(Logit(channel, x)); }

double FactorizedDensity::Likelihood(std::size_t channel, double v) const {
  const ChannelKernel kernel(matrices_, biases_, factors_, channel);
  return ChannelKernel::IntervalMass(kernel.Forward(v - 0.5, nullptr), kernel.Forward(v + 0.5, nullptr)).p;
}

double FactorizedDensity::Median(std::size_t channel) const {
  const ChannelKernel kernel(matrices_, biases_, factors_, channel);
  double lo = -1.0;
  double hi = 1.0;
  while (kernel.Forward(lo, nullptr) > 0.0 && lo > -1e9) lo *= 2.0;
  while (kernel.Forward(hi, nullptr) < 0.0 && hi < 1e9) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (kernel.Forward(mid, nullptr) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double FactorizedDensity::RateBits(std::span<const double> latent, std::size_t batch,
                                   std::size_t plane) const {
  if (latent.size() != batch * channels_ * plane) {
    Fail(ErrorKind::kShape, "latent size does not match the density's channel count");
  }
  double bits = 0.0;
  for (std::size_t c = 0; c < channels_; ++c) {
    const ChannelKernel kernel(matrices_, biases_, factors_, c);
    for (std::size_t n = 0; n < batch; ++n) {
      const double* v = latent.data() + (n * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double p = ChannelKernel::IntervalMass(kernel.Forward(v[i] - 0.5, nullptr),
                                                      kernel.Forward(v[i] + 0.5, nullptr)).p;
        bits -= std::log2(std::max(p, kLikelihoodFloor));
      }
    }
  }
  return bits;
}

double FactorizedDensity::RateBits(const ad::Tensor& latent) const {
  if (latent.rank() != 4 || latent.dim(1) != channels_) {
    Fail(ErrorKind::kShape, "latent " + ad::ShapeString(latent.shape()) + " does not have " +
                                std::to_string(channels_) + " channels on axis 1");
  }
  return RateBits(latent.data(), latent.dim(0), latent.dim(2) * latent.dim(3));
}

ad::Tensor FactorizedDensity::RateBits(ad::Tape& tape, const ad::Tensor& latent) const {
  const double bits = RateBits(latent);
  bool tracked = tape.Wants({&latent});
  for (const auto& p : Parameters()) tracked = tracked || tape.Wants({&p});
  ad::Tensor out = ad::Tensor::FromData({1}, {bits}, tracked);
  if (!tracked) return out;

  auto latent_node = latent.node();
  auto out_node = out.node();
  std::vector<std::shared_ptr<ad::TensorNode>> param_nodes;
  for (const auto& p : Parameters()) param_nodes.push_back(p.node());
  const FactorizedDensity self = *this;  // handles alias the same storage
  tape.Record([self, latent_node, out_node, param_nodes] {
    if (out_node->grad.empty()) return;
    const double upstream = out_node->grad[0];
    const std::size_t batch = latent_node->shape[0];
    const std::size_t channels = self.channels_;
    const std::size_t plane = latent_node->shape[2] * latent_node->shape[3];
    const bool latent_grad = latent_node->requires_grad;
    if (latent_grad && latent_node->grad.empty()) latent_node->grad.assign(latent_node->value.size(), 0.0);
    constexpr double kInvLn2 = 1.4426950408889634;
    for (std::size_t c = 0; c < channels; ++c) {
      const ChannelKernel kernel(self.matrices_, self.biases_, self.factors_, c);
      ChannelGrad grad;
      Trace lower_trace;
      Trace upper_trace;
      for (std::size_t n = 0; n < batch; ++n) {
        const std::size_t base = (n * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double v = latent_node->value[base + i];
          const double lower = kernel.Forward(v - 0.5, &lower_trace);
          const double upper = kernel.Forward(v + 0.5, &upper_trace);
          const auto mass = ChannelKernel::IntervalMass(lower, upper);
          if (mass.p < kLikelihoodFloor) continue;
          const double g = -upstream * kInvLn2 / mass.p;
          const double dx = kernel.Backward(upper_trace, g * mass.dp_dupper, grad) +
                            kernel.Backward(lower_trace, g * mass.dp_dlower, grad);
          if (latent_grad) latent_node->grad[base + i] += dx;
        }
      }
      // Scatter this channel's parameter gradients.
      for (std::size_t k = 0; k < kLayers; ++k) {
        auto& mnode = *param_nodes[k];
        if (mnode.requires_grad) {
          if (mnode.grad.empty()) mnode.grad.assign(mnode.value.size(), 0.0);
          const std::size_t n = kIn[k] * kOut[k];
          for (std::size_t i = 0; i < n; ++i) mnode.grad[c * n + i] += grad.matrix[k][i];
        }
        auto& bnode = *param_nodes[kLayers + k];
        if (bnode.requires_grad) {
          if (bnode.grad.empty()) bnode.grad.assign(bnode.value.size(), 0.0);
          for (std::size_t r = 0; r < kOut[k]; ++r) bnode.grad[c * kOut[k] + r] += grad.bias[k][r];
        }
        if (k < 3) {
          auto& fnode = *param_nodes[2 * kLayers + k];
          if (fnode.requires_grad) {
            if (fnode.grad.empty()) fnode.grad.assign(fnode.value.size(), 0.0);
            for (std::size_t r = 0; r < kOut[k]; ++r) fnode.grad[c * kOut[k] + r] += grad.factor[k][r];
          }
        }
      }
    }
  });
  return out;
}

std::unique_ptr<rc::ContinuousDistribution> FactorizedDensity::Channel(std::size_t channel) const {
  if (channel >= channels_) Fail(ErrorKind::kInvalidArgument, "channel out of range");
  return std::make_unique<ChannelDistribution>(*this, channel);
}

std::vector<rc::CdfTable> FactorizedDensity::BuildTables() const {
  std::vector<rc::CdfTable> tables;
  tables.reserve(channels_);
  for (std::size_t c = 0; c < channels_; ++c) tables.push_back(rc::BuildCdf(*Channel(c)));
  return tables;
}

}  // namespace caebench::codec

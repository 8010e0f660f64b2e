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

#include "caebench/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "caebench/error.hpp"
#include "caebench/metrics.hpp"
#include "common/bytes.hpp"
#include "tensor/conv_kernels.hpp"

namespace caebench::codec {
namespace {

constexpr char kCheckpointMagic[4] = {'C', 'A', 'E', 'M'};
constexpr std::uint32_t kCheckpointVersion = 1;

ad::Tensor InitWeight(const ad::Shape& shape, double fan_in, bool activation, std::mt19937_64& rng) {
  const double gain = activation ? std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope)) : 1.0;
  const double bound = gain * std::sqrt(3.0 / fan_in);
  std::vector<double> w(ad::NumElements(shape));
  for (double& v : w) v = (static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0) * bound;
  return ad::Tensor::FromData(shape, std::move(w), true);
}

ConvLayer MakeLayer(std::string name, std::size_t in, std::size_t out, std::size_t stride,
                    bool transposed, bool activation, std::mt19937_64& rng) {
  ConvLayer layer;
  layer.name = std::move(name);
  layer.stride = stride;
  layer.transposed = transposed;
  layer.activation = activation;
  const double fan_in =
      transposed ? static_cast<double>(in * 9) / static_cast<double>(stride * stride)
                 : static_cast<double>(in * 9);
  const ad::Shape shape = transposed ? ad::Shape{in, out, 3, 3} : ad::Shape{out, in, 3, 3};
  layer.weight = InitWeight(shape, fan_in, activation, rng);
  layer.bias = ad::Tensor::Zeros({out}, true);
  return layer;
}

ad::ConvParams LayerParams(const ConvLayer& layer) {
  ad::ConvParams p;
  p.stride = layer.stride;
  p.pad_h = 1;
  p.pad_w = 1;
  p.output_padding = layer.transposed ? layer.stride - 1 : 0;
  return p;
}

ad::Tensor RunLayer(ad::Tape& tape, const ConvLayer& layer, const ad::Tensor& x) {
  const ad::ConvParams p = LayerParams(layer);
  ad::Tensor y = layer.transposed ? ad::Deconv2d(tape, x, layer.weight, layer.bias, p)
                                  : ad::Conv2d(tape, x, layer.weight, layer.bias, p);
  return layer.activation ? ad::LeakyRelu(tape, y, kLeakySlope) : y;
}

std::vector<float> ToFloat(std::span<const double> v) { return {v.begin(), v.end()}; }

Tensor32 RunLayer32(const ConvLayer& layer, const Tensor32& x) {
  const auto w = ToFloat(layer.weight.data());
  const auto b = ToFloat(layer.bias.data());
  kernels::ConvShape s;
  s.batch = x.shape[0];
  s.stride = layer.stride;
  s.pad_h = 1;
  s.pad_w = 1;
  s.kernel_h = 3;
  s.kernel_w = 3;
  Tensor32 y;
  if (!layer.transposed) {
    s.in_channels = x.shape[1];
    s.in_h = x.shape[2];
    s.in_w = x.shape[3];
    s.out_channels = layer.weight.dim(0);
    s.out_h = (s.in_h + 2 - 3) / s.stride + 1;
    s.out_w = (s.in_w + 2 - 3) / s.stride + 1;
    y.shape = {s.batch, s.out_channels, s.out_h, s.out_w};
    y.data.resize(ad::NumElements(y.shape));
    kernels::ConvForward<float>(s, x.data.data(), w.data(), b.data(), y.data.data());
  } else {
    s.out_channels = x.shape[1];
    s.out_h = x.shape[2];
    s.out_w = x.shape[3];
    s.in_channels = layer.weight.dim(1);
    s.in_h = (s.out_h - 1) * s.stride + 3 + (s.stride - 1) - 2;
    s.in_w = (s.out_w - 1) * s.stride + 3 + (s.stride - 1) - 2;
    y.shape = {s.batch, s.in_channels, s.in_h, s.in_w};
    y.data.assign(ad::NumElements(y.shape), 0.0f);
    kernels::ConvBackwardInput<float>(s, w.data(), x.data.data(), y.data.data());
    const std::size_t plane = s.in_plane();
    for (std::size_t n = 0; n < s.batch; ++n)
      for (std::size_t c = 0; c < s.in_channels; ++c) {
        float* p = y.data.data() + (n * s.in_channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] += b[c];
      }
  }
  if (layer.activation) {
    const auto slope = static_cast<float>(kLeakySlope);
    for (float& v : y.data) v = v > 0.0f ? v : slope * v;
  }
  return y;
}

void CheckImageShape(std::size_t channels, std::size_t h, std::size_t w, const Architecture& arch) {
  if (channels != 3) Fail(ErrorKind::kShape, "analysis expects 3 input channels on axis 1");
  const std::size_t d = arch.downscale();
  if (h == 0 || w == 0 || h % d != 0 || w % d != 0) {
    Fail(ErrorKind::kShape, "image " + std::to_string(w) + "x" + std::to_string(h) +
                                " is not divisible by " + std::to_string(d) +
                                "; pad it to a multiple first");
  }
}

void CheckLatentShape(std::size_t channels, const Architecture& arch) {
  if (channels != arch.latent_channels) {
    Fail(ErrorKind::kShape, "latent has " + std::to_string(channels) + " channels on axis 1, model expects " +
                                std::to_string(arch.latent_channels));
  }
}

}  // namespace

const char* DistortionName(Distortion d) { return d == Distortion::kMse ? "mse" : "msssim"; }

Distortion ParseDistortion(const std::string& name) {
  if (name == "mse") return Distortion::kMse;
  if (name == "msssim" || name == "ms-ssim") return Distortion::kMsSsim;
  Fail(ErrorKind::kInvalidArgument, "unknown distortion metric '" + name + "' (use mse or msssim)");
}

std::int32_t RoundLatent(double v) {
  const double r = std::round(v);
  return static_cast<std::int32_t>(std::clamp(r, -32768.0, 32767.0));
}

CodecModel CodecModel::Create(const Architecture& arch, std::uint64_t seed) {
  if (arch.units == 0 || arch.units > 8 || arch.filters == 0 || arch.latent_channels == 0) {
    Fail(ErrorKind::kInvalidArgument, "invalid architecture");
  }
  CodecModel m;
  m.arch_ = arch;
  std::mt19937_64 rng(seed);
  const std::size_t f = arch.filters;
  for (std::size_t u = 0; u < arch.units; ++u) {
    const std::string p = "enc." + std::to_string(u);
    m.encoder_.push_back(MakeLayer(p + ".0", u == 0 ? 3 : f, f, 2, false, true, rng));
    m.encoder_.push_back(MakeLayer(p + ".1", f, f, 1, false, true, rng));
  }
  m.encoder_.push_back(MakeLayer("enc.out", f, arch.latent_channels, 1, false, false, rng));
  m.decoder_.push_back(MakeLayer("dec.in", arch.latent_channels, f, 1, true, true, rng));
  for (std::size_t u = 0; u < arch.units; ++u) {
    const std::string p = "dec." + std::to_string(u);
    const bool last = u + 1 == arch.units;
    m.decoder_.push_back(MakeLayer(p + ".0", f, f, 1, true, true, rng));
    m.decoder_.push_back(MakeLayer(p + ".1", f, last ? 3 : f, 2, true, !last, rng));
  }
  m.density_ = FactorizedDensity(arch.latent_channels, rng());
  return m;
}

ad::Tensor CodecModel::Analyze(ad::Tape& tape, const ad::Tensor& x) const {
  if (x.rank() != 4) Fail(ErrorKind::kShape, "analysis expects an [N,3,H,W] tensor");
  CheckImageShape(x.dim(1), x.dim(2), x.dim(3), arch_);
  ad::Tensor h = x;
  for (const auto& layer : encoder_) h = RunLayer(tape, layer, h);
  return h;
}

ad::Tensor CodecModel::Synthesize(ad::Tape& tape, const ad::Tensor& latent) const {
  if (latent.rank() != 4) Fail(ErrorKind::kShape, "synthesis expects an [N,K,h,w] tensor");
  CheckLatentShape(latent.dim(1), arch_);
  ad::Tensor h = latent;
  for (const auto& layer : decoder_) h = RunLayer(tape, layer, h);
  return h;
}

Tensor32 CodecModel::Analyze(const Image& image) const {
  CheckImageShape(3, image.height, image.width, arch_);
  Tensor32 h{{1, 3, image.height, image.width}, AlignedVector<float>(image.data.begin(), image.data.end())};
  for (const auto& layer : encoder_) h = RunLayer32(layer, h);
  return h;
}

Image CodecModel::Synthesize(const QuantizedLatent& latent) const {
  CheckLatentShape(latent.channels, arch_);
  if (latent.values.size() != latent.channels * latent.height * latent.width || latent.height == 0 ||
      latent.width == 0) {
    Fail(ErrorKind::kShape, "latent value count does not match its shape");
  }
  Tensor32 h{{1, latent.channels, latent.height, latent.width},
             AlignedVector<float>(latent.values.begin(), latent.values.end())};
  for (const auto& layer : decoder_) h = RunLayer32(layer, h);
  Image out(h.shape[3], h.shape[2]);
  std::transform(h.data.begin(), h.data.end(), out.data.begin(),
                 [](float v) { return std::clamp(v, 0.0f, 1.0f); });
  return out;
}

std::vector<ad::Tensor> CodecModel::Parameters() const {
  std::vector<ad::Tensor> params;
  for (const auto* group : {&encoder_, &decoder_}) {
    for (const auto& layer : *group) {
      params.push_back(layer.weight);
      params.push_back(layer.bias);
    }
  }
  for (auto& p : density_.Parameters()) params.push_back(p);
  return params;
}

std::vector<std::string> CodecModel::ParameterNames() const {
  std::vector<std::string> names;
  for (const auto* group : {&encoder_, &decoder_}) {
    for (const auto& layer : *group) {
      names.push_back(layer.name + ".weight");
      names.push_back(layer.name + ".bias");
    }
  }
  for (auto& n : density_.ParameterNames()) names.push_back(n);
  return names;
}

CodecModel CodecModel::Clone() const {
  CodecModel m = *this;
  for (auto* group : {&m.encoder_, &m.decoder_}) {
    for (auto& layer : *group) {
      layer.weight = layer.weight.Clone(true);
      layer.bias = layer.bias.Clone(true);
    }
  }
  std::vector<ad::Tensor> dp;
  for (const auto& p : density_.Parameters()) dp.push_back(p.Clone(true));
  m.density_.SetParameters(std::move(dp));
  return m;
}

std::vector<std::uint8_t> CodecModel::Serialize() const {
  ByteWriter w;
  w.Raw(std::span(reinterpret_cast<const std::uint8_t*>(kCheckpointMagic), 4));
  w.U32(kCheckpointVersion);
  w.U32(static_cast<std::uint32_t>(arch_.units));
  w.U32(static_cast<std::uint32_t>(arch_.latent_channels));
  w.U32(static_cast<std::uint32_t>(arch_.filters));
  w.U8(static_cast<std::uint8_t>(meta_.distortion));
  w.F64(meta_.lambda);
  w.U64(meta_.iterations);
  const auto params = Parameters();
  const auto names = ParameterNames();
  w.U32(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    w.U16(static_cast<std::uint16_t>(names[i].size()));
    w.Text(names[i]);
    w.U8(static_cast<std::uint8_t>(params[i].rank()));
    for (std::size_t d : params[i].shape()) w.U32(static_cast<std::uint32_t>(d));
    for (double v : params[i].data()) w.F32(static_cast<float>(v));
  }
  return std::move(w.bytes());
}

CodecModel CodecModel::Deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "checkpoint");
  if (r.Text(4) != std::string(kCheckpointMagic, 4)) Fail(ErrorKind::kFormat, "not a CAEM checkpoint");
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    Fail(ErrorKind::kFormat, "unsupported checkpoint version " + std::to_string(version));
  }
  Architecture arch;
  arch.units = r.U32();
  arch.latent_channels = r.U32();
  arch.filters = r.U32();
  const std::uint8_t kind = r.U8();
  if (kind > 1) Fail(ErrorKind::kFormat, "checkpoint has unknown distortion kind");
  CodecModel m = Create(arch, 0);
  m.meta_.distortion = static_cast<Distortion>(kind);
  m.meta_.lambda = r.F64();
  m.meta_.iterations = r.U64();

  const auto expected_names = m.ParameterNames();
  auto params = m.Parameters();
  const std::uint32_t count = r.U32();
  if (count != params.size()) Fail(ErrorKind::kFormat, "checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < count; ++i) {
    const std::string name = r.Text(r.U16());
    if (name != expected_names[i]) {
      Fail(ErrorKind::kFormat, "checkpoint parameter '" + name + "' where '" + expected_names[i] +
                                   "' was expected");
    }
    ad::Shape shape(r.U8());
    for (auto& d : shape) d = r.U32();
    if (shape != params[i].shape()) {
      Fail(ErrorKind::kFormat, "checkpoint parameter '" + name + "' has shape " + ad::ShapeString(shape));
    }
    auto data = params[i].mutable_data();
    for (double& v : data) v = static_cast<double>(r.F32());
  }
  if (r.remaining() != 0) Fail(ErrorKind::kFormat, "trailing bytes after checkpoint");
  return m;
}

void CodecModel::Save(const std::filesystem::path& path) const {
  const auto bytes = Serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorKind::kIo, "write failed: " + path.string());
}

CodecModel CodecModel::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Deserialize(bytes);
}

std::uint64_t CodecModel::Hash() const { return Fnv1a64(Serialize()); }

QuantizedLatent QuantizeLatent(const Tensor32& latent) {
  if (latent.shape.size() != 4 || latent.shape[0] != 1) {
    Fail(ErrorKind::kShape, "quantization expects a single [1,K,h,w] latent");
  }
  QuantizedLatent q;
  q.channels = latent.shape[1];
  q.height = latent.shape[2];
  q.width = latent.shape[3];
  q.values.resize(latent.data.size());
  std::transform(latent.data.begin(), latent.data.end(), q.values.begin(),
                 [](float v) { return RoundLatent(v); });
  return q;
}

double UniformNoise(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53 - 0.5;
}

ad::Tensor AddUniformNoise(ad::Tape& tape, const ad::Tensor& latent, std::mt19937_64& rng) {
  std::vector<double> noise(latent.size());
  for (double& v : noise) v = UniformNoise(rng);
  return ad::Add(tape, latent, ad::Tensor::FromData(latent.shape(), std::move(noise)));
}

double EstimateBits(const FactorizedDensity& density, const QuantizedLatent& latent) {
  std::vector<double> v(latent.values.begin(), latent.values.end());
  return density.RateBits(v, 1, latent.height * latent.width);
}

ad::Tensor RdLoss(ad::Tape& tape, const ad::Tensor& x, const ad::Tensor& x_hat,
                  const ad::Tensor& rate_bits, double lambda, Distortion distortion,
                  RdLossReport* report) {
  if (x.shape() != x_hat.shape() || x.rank() != 4) {
    Fail(ErrorKind::kShape, "distortion inputs differ: " + ad::ShapeString(x.shape()) + " vs " +
                                ad::ShapeString(x_hat.shape()));
  }
  if (!(lambda > 0.0)) Fail(ErrorKind::kInvalidArgument, "lambda must be positive");
  ad::Tensor d;
  if (distortion == Distortion::kMse) {
    d = ad::Mean(tape, ad::Square(tape, ad::Sub(tape, x_hat, x)));
  } else {
    d = ad::AddScalar(tape, ad::MulScalar(tape, metrics::MsSsim(tape, x, x_hat), -1.0), 1.0);
  }
  const double images = static_cast<double>(x.dim(0));
  const ad::Tensor r = ad::MulScalar(tape, rate_bits, 1.0 / images);
  ad::Tensor j = ad::Add(tape, ad::MulScalar(tape, d, lambda), r);
  const double jv = j.item();
  if (!std::isfinite(jv)) {
    Fail(ErrorKind::kNumeric, "non-finite RD loss (D=" + std::to_string(d.item()) +
                                  ", R=" + std::to_string(r.item()) + ")");
  }
  if (report != nullptr) {
    report->loss = jv;
    report->distortion = d.item();
    report->rate_bits = r.item();
    report->bits_per_pixel = r.item() / static_cast<double>(x.dim(2) * x.dim(3));
    report->lambda = lambda;
  }
  return j;
}

}  // namespace caebench::codec

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

#include "caebench/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "caebench/error.hpp"
#include "tensor/conv_kernels.hpp"

namespace caebench::ad {
namespace {

std::vector<double>& GradOf(TensorNode& node) {
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

Tensor MakeOutput(Shape shape, bool tracked) {
  return Tensor::Zeros(std::move(shape), tracked);
}

// Output multi-index -> flat input index, with zero strides on broadcast
// axes.
struct Broadcast {
  Shape out;
  std::vector<std::size_t> stride_a;
  std::vector<std::size_t> stride_b;
  bool same = false;

  Broadcast(const Shape& a, const Shape& b) {
    if (a == b) {
      out = a;
      same = true;
      return;
    }
    const std::size_t rank = std::max(a.size(), b.size());
    out.assign(rank, 1);
    stride_a.assign(rank, 0);
    stride_b.assign(rank, 0);
    std::size_t sa = 1;
    std::size_t sb = 1;
    for (std::size_t k = 0; k < rank; ++k) {
      const std::size_t axis = rank - 1 - k;
      const std::size_t da = k < a.size() ? a[a.size() - 1 - k] : 1;
      const std::size_t db = k < b.size() ? b[b.size() - 1 - k] : 1;
      if (da != db && da != 1 && db != 1) {
        std::ostringstream msg;
        msg << "broadcast mismatch on axis " << axis << ": " << ShapeString(a)
            << " vs " << ShapeString(b);
        Fail(ErrorKind::kShape, msg.str());
      }
      out[axis] = std::max(da, db);
      stride_a[axis] = da == 1 ? 0 : sa;
      stride_b[axis] = db == 1 ? 0 : sb;
      sa *= da;
      sb *= db;
    }
  }

  template <class F>
  void ForEach(F&& f) const {
    const std::size_t total = NumElements(out);
    if (same) {
      for (std::size_t i = 0; i < total; ++i) f(i, i, i);
      return;
    }
    std::vector<std::size_t> idx(out.size(), 0);
    std::size_t ia = 0;
    std::size_t ib = 0;
    for (std::size_t i = 0; i < total; ++i) {
      f(i, ia, ib);
      for (std::size_t axis = out.size(); axis-- > 0;) {
        ++idx[axis];
        ia += stride_a[axis];
        ib += stride_b[axis];
        if (idx[axis] < out[axis]) break;
        ia -= stride_a[axis] * out[axis];
        ib -= stride_b[axis] * out[axis];
        idx[axis] = 0;
      }
    }
  }
};

// f(a, b) -> value; da(a, b), db(a, b) -> partials.
template <class F, class DA, class DB>
Tensor BinaryOp(Tape& tape, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  auto bc = std::make_shared<Broadcast>(a.shape(), b.shape());
  const bool tracked = tape.Wants({&a, &b});
  Tensor out = MakeOutput(bc->out, tracked);
  {
    auto av = a.data();
    auto bv = b.data();
    auto ov = out.mutable_data();
    bc->ForEach([&](std::size_t i, std::size_t ia, std::size_t ib) {
      ov[i] = f(av[ia], bv[ib]);
    });
  }
  if (tracked) {
    auto an = a.node();
    auto bn = b.node();
    auto on = out.node();
    tape.Record([an, bn, on, bc, da, db] {
      if (on->grad.empty()) return;
      const auto& g = on->grad;
      const auto& av = an->value;
      const auto& bv = bn->value;
      if (an->requires_grad) {
        auto& ga = GradOf(*an);
        bc->ForEach([&](std::size_t i, std::size_t ia, std::size_t ib) {
          ga[ia] += g[i] * da(av[ia], bv[ib]);
        });
      }
      if (bn->requires_grad) {
        auto& gb = GradOf(*bn);
        bc->ForEach([&](std::size_t i, std::size_t ia, std::size_t ib) {
          gb[ib] += g[i] * db(av[ia], bv[ib]);
        });
      }
    });
  }
  return out;
}

// f(x) -> y; d(x, y) -> dy/dx.
template <class F, class D>
Tensor UnaryOp(Tape& tape, const Tensor& x, F f, D d) {
  const bool tracked = tape.Wants({&x});
  Tensor out = MakeOutput(x.shape(), tracked);
  {
    auto xv = x.data();
    auto ov = out.mutable_data();
    for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = f(xv[i]);
  }
  if (tracked) {
    auto xn = x.node();
    auto on = out.node();
    tape.Record([xn, on, d] {
      if (on->grad.empty()) return;
      auto& gx = GradOf(*xn);
      for (std::size_t i = 0; i < gx.size(); ++i) {
        gx[i] += on->grad[i] * d(xn->value[i], on->value[i]);
      }
    });
  }
  return out;
}

void RequireRank4(const Tensor& t, const char* what) {
  if (t.rank() != 4) {
    Fail(ErrorKind::kShape, std::string(what) + " must be rank 4, got " + ShapeString(t.shape()));
  }
}

}  // namespace

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  return Filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::Filled(Shape shape, double v, bool requires_grad) {
  auto node = std::make_shared<TensorNode>();
  node->value.assign(NumElements(shape), v);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::FromData(Shape shape, std::vector<double> data, bool requires_grad) {
  if (NumElements(shape) != data.size()) {
    Fail(ErrorKind::kShape, "data length " + std::to_string(data.size()) +
                                " does not match shape " + ShapeString(shape));
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value.assign(data.begin(), data.end());
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

double Tensor::item() const {
  if (size() != 1) Fail(ErrorKind::kShape, "item() on tensor of shape " + ShapeString(shape()));
  return node_->value[0];
}

std::span<const double> Tensor::grad() const {
  if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() { return GradOf(*node_); }

Tensor Tensor::Clone(bool requires_grad) const {
  auto node = std::make_shared<TensorNode>();
  node->shape = node_->shape;
  node->value = node_->value;
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

bool Tape::Wants(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void Tape::Record(std::function<void()> backward) { records_.push_back(std::move(backward)); }

void Tape::Backward(const Tensor& loss) {
  if (loss.size() != 1) {
    Fail(ErrorKind::kShape, "Backward expects a one-element loss, got " + ShapeString(loss.shape()));
  }
  auto& seed = GradOf(*loss.node());
  seed[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  records_.clear();
}

Tensor Conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
              const ConvParams& p) {
  RequireRank4(input, "conv2d input");
  RequireRank4(weight, "conv2d weight");
  if (p.stride == 0) Fail(ErrorKind::kInvalidArgument, "conv2d stride must be positive");
  kernels::ConvShape s;
  s.batch = input.dim(0);
  s.in_channels = input.dim(1);
  s.in_h = input.dim(2);
  s.in_w = input.dim(3);
  s.out_channels = weight.dim(0);
  s.kernel_h = weight.dim(2);
  s.kernel_w = weight.dim(3);
  s.stride = p.stride;
  s.pad_h = p.pad_h;
  s.pad_w = p.pad_w;
  if (weight.dim(1) != s.in_channels) {
    Fail(ErrorKind::kShape, "conv2d channel axis (1) mismatch: input has " +
                                std::to_string(s.in_channels) + ", weight expects " +
                                std::to_string(weight.dim(1)));
  }
  if (s.in_h + 2 * s.pad_h < s.kernel_h) {
    Fail(ErrorKind::kShape, "conv2d height axis (2): kernel larger than padded input");
  }
  if (s.in_w + 2 * s.pad_w < s.kernel_w) {
    Fail(ErrorKind::kShape, "conv2d width axis (3): kernel larger than padded input");
  }
  if (bias.defined() && bias.size() != s.out_channels) {
    Fail(ErrorKind::kShape, "conv2d bias length does not match output channel axis (1)");
  }
  s.out_h = (s.in_h + 2 * s.pad_h - s.kernel_h) / s.stride + 1;
  s.out_w = (s.in_w + 2 * s.pad_w - s.kernel_w) / s.stride + 1;

  const bool tracked = tape.Wants({&input, &weight, &bias});
  Tensor out = MakeOutput({s.batch, s.out_channels, s.out_h, s.out_w}, tracked);
  kernels::ConvForward<double>(s, input.data().data(), weight.data().data(),
                               bias.defined() ? bias.data().data() : nullptr,
                               out.mutable_data().data());
  if (tracked) {
    auto xn = input.node();
    auto wn = weight.node();
    auto bn = bias.defined() ? bias.node() : nullptr;
    auto on = out.node();
    tape.Record([s, xn, wn, bn, on] {
      if (on->grad.empty()) return;
      if (xn->requires_grad) {
        kernels::ConvBackwardInput<double>(s, wn->value.data(), on->grad.data(),
                                           GradOf(*xn).data());
      }
      const bool want_b = bn && bn->requires_grad;
      if (wn->requires_grad) {
        kernels::ConvBackwardWeight<double>(s, xn->value.data(), on->grad.data(),
                                            GradOf(*wn).data(),
                                            want_b ? GradOf(*bn).data() : nullptr);
      } else if (want_b) {
        auto& gb = GradOf(*bn);
        for (std::size_t n = 0; n < s.batch; ++n)
          for (std::size_t o = 0; o < s.out_channels; ++o)
            for (std::size_t i = 0; i < s.out_plane(); ++i)
              gb[o] += on->grad[(n * s.out_channels + o) * s.out_plane() + i];
      }
    });
  }
  return out;
}

Tensor Deconv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
                const ConvParams& p) {
  RequireRank4(input, "deconv2d input");
  RequireRank4(weight, "deconv2d weight");
  if (p.stride == 0) Fail(ErrorKind::kInvalidArgument, "deconv2d stride must be positive");
  if (p.output_padding >= p.stride) {
    Fail(ErrorKind::kInvalidArgument, "deconv2d output_padding must be smaller than stride");
  }
  if (weight.dim(0) != input.dim(1)) {
    Fail(ErrorKind::kShape, "deconv2d channel axis (1) mismatch: input has " +
                                std::to_string(input.dim(1)) + ", weight expects " +
                                std::to_string(weight.dim(0)));
  }
  // Described as the adjoint convolution: its "input" is our output.
  kernels::ConvShape s;
  s.batch = input.dim(0);
  s.out_channels = input.dim(1);
  s.out_h = input.dim(2);
  s.out_w = input.dim(3);
  s.in_channels = weight.dim(1);
  s.kernel_h = weight.dim(2);
  s.kernel_w = weight.dim(3);
  s.stride = p.stride;
  s.pad_h = p.pad_h;
  s.pad_w = p.pad_w;
  const long oh = static_cast<long>((s.out_h - 1) * s.stride + s.kernel_h + p.output_padding) -
                  2 * static_cast<long>(s.pad_h);
  const long ow = static_cast<long>((s.out_w - 1) * s.stride + s.kernel_w + p.output_padding) -
                  2 * static_cast<long>(s.pad_w);
  if (oh <= 0) Fail(ErrorKind::kShape, "deconv2d height axis (2): padding exceeds output");
  if (ow <= 0) Fail(ErrorKind::kShape, "deconv2d width axis (3): padding exceeds output");
  s.in_h = static_cast<std::size_t>(oh);
  s.in_w = static_cast<std::size_t>(ow);
  if (bias.defined() && bias.size() != s.in_channels) {
    Fail(ErrorKind::kShape, "deconv2d bias length does not match output channel axis (1)");
  }

  const bool tracked = tape.Wants({&input, &weight, &bias});
  Tensor out = MakeOutput({s.batch, s.in_channels, s.in_h, s.in_w}, tracked);
  {
    auto ov = out.mutable_data();
    kernels::ConvBackwardInput<double>(s, weight.data().data(), input.data().data(), ov.data());
    if (bias.defined()) {
      auto bv = bias.data();
      for (std::size_t n = 0; n < s.batch; ++n)
        for (std::size_t c = 0; c < s.in_channels; ++c)
          for (std::size_t i = 0; i < s.in_plane(); ++i)
            ov[(n * s.in_channels + c) * s.in_plane() + i] += bv[c];
    }
  }
  if (tracked) {
    auto xn = input.node();
    auto wn = weight.node();
    auto bn = bias.defined() ? bias.node() : nullptr;
    auto on = out.node();
    tape.Record([s, xn, wn, bn, on] {
      if (on->grad.empty()) return;
      if (xn->requires_grad) {
        AlignedVector<double> tmp(xn->value.size());
        kernels::ConvForward<double>(s, on->grad.data(), wn->value.data(), nullptr, tmp.data());
        auto& gx = GradOf(*xn);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += tmp[i];
      }
      if (wn->requires_grad) {
        kernels::ConvBackwardWeight<double>(s, on->grad.data(), xn->value.data(),
                                            GradOf(*wn).data(), nullptr);
      }
      if (bn && bn->requires_grad) {
        auto& gb = GradOf(*bn);
        for (std::size_t n = 0; n < s.batch; ++n)
          for (std::size_t c = 0; c < s.in_channels; ++c)
            for (std::size_t i = 0; i < s.in_plane(); ++i)
              gb[c] += on->grad[(n * s.in_channels + c) * s.in_plane() + i];
      }
    });
  }
  return out;
}

Tensor Add(Tape& tape, const Tensor& a, const Tensor& b) {
  return BinaryOp(
      tape, a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor Sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return BinaryOp(
      tape, a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor Mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return BinaryOp(
      tape, a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor Div(Tape& tape, const Tensor& a, const Tensor& b) {
  for (double v : b.data()) {
    if (v == 0.0) Fail(ErrorKind::kNumeric, "division by zero");
  }
  return BinaryOp(
      tape, a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Tensor AddScalar(Tape& tape, const Tensor& x, double c) {
  return UnaryOp(
      tape, x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor MulScalar(Tape& tape, const Tensor& x, double c) {
  return UnaryOp(
      tape, x, [c](double v) { return v * c; }, [c](double, double) { return c; });
}

Tensor Relu(Tape& tape, const Tensor& x) { return LeakyRelu(tape, x, 0.0); }

Tensor LeakyRelu(Tape& tape, const Tensor& x, double slope) {
  return UnaryOp(
      tape, x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? slope : 0.0); });
}

Tensor Square(Tape& tape, const Tensor& x) {
  return UnaryOp(
      tape, x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor Log(Tape& tape, const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) Fail(ErrorKind::kNumeric, "log of non-positive value");
  }
  return UnaryOp(
      tape, x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor Exp(Tape& tape, const Tensor& x) {
  return UnaryOp(
      tape, x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor Clamp(Tape& tape, const Tensor& x, double lo, double hi) {
  if (lo > hi) Fail(ErrorKind::kInvalidArgument, "clamp with lo > hi");
  return UnaryOp(
      tape, x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor Softplus(Tape& tape, const Tensor& x) {
  return UnaryOp(
      tape, x,
      [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](double v, double) { return 1.0 / (1.0 + std::exp(-v)); });
}

Tensor Tanh(Tape& tape, const Tensor& x) {
  return UnaryOp(
      tape, x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor Sigmoid(Tape& tape, const Tensor& x) {
  return UnaryOp(
      tape, x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor PowScalar(Tape& tape, const Tensor& x, double exponent) {
  for (double v : x.data()) {
    if (v < 0.0) Fail(ErrorKind::kNumeric, "pow of negative value");
  }
  return UnaryOp(
      tape, x, [exponent](double v) { return std::pow(v, exponent); },
      [exponent](double v, double) {
        if (v == 0.0) return exponent == 1.0 ? 1.0 : 0.0;
        return exponent * std::pow(v, exponent - 1.0);
      });
}

Tensor Sum(Tape& tape, const Tensor& x) {
  const bool tracked = tape.Wants({&x});
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tensor out = Tensor::FromData({1}, {total}, tracked);
  if (tracked) {
    auto xn = x.node();
    auto on = out.node();
    tape.Record([xn, on] {
      if (on->grad.empty()) return;
      auto& gx = GradOf(*xn);
      for (double& g : gx) g += on->grad[0];
    });
  }
  return out;
}

Tensor Mean(Tape& tape, const Tensor& x) {
  // Divide rather than multiply by 1/n so a mean of equal values is exact.
  const double n = static_cast<double>(x.size());
  return UnaryOp(
      tape, Sum(tape, x), [n](double v) { return v / n; }, [n](double, double) { return 1.0 / n; });
}

Tensor SpatialMean(Tape& tape, const Tensor& x) {
  RequireRank4(x, "spatial mean input");
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t plane = x.dim(2) * x.dim(3);
  const bool tracked = tape.Wants({&x});
  Tensor out = MakeOutput({x.dim(0), x.dim(1), 1, 1}, tracked);
  {
    auto xv = x.data();
    auto ov = out.mutable_data();
    for (std::size_t p = 0; p < planes; ++p) {
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += xv[p * plane + i];
      ov[p] = s / static_cast<double>(plane);
    }
  }
  if (tracked) {
    auto xn = x.node();
    auto on = out.node();
    tape.Record([xn, on, planes, plane] {
      if (on->grad.empty()) return;
      auto& gx = GradOf(*xn);
      const double inv = 1.0 / static_cast<double>(plane);
      for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < plane; ++i) gx[p * plane + i] += on->grad[p] * inv;
    });
  }
  return out;
}

Tensor Reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (NumElements(shape) != x.size()) {
    Fail(ErrorKind::kShape, "cannot reshape " + ShapeString(x.shape()) + " to " + ShapeString(shape));
  }
  const bool tracked = tape.Wants({&x});
  Tensor out = Tensor::FromData(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()),
                                tracked);
  if (tracked) {
    auto xn = x.node();
    auto on = out.node();
    tape.Record([xn, on] {
      if (on->grad.empty()) return;
      auto& gx = GradOf(*xn);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += on->grad[i];
    });
  }
  return out;
}

}  // namespace caebench::ad

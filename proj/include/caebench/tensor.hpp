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

#ifndef CAEBENCH_TENSOR_HPP_
#define CAEBENCH_TENSOR_HPP_

// Dense 64-bit tensors with a reverse-mode tape.
//
// A Tensor is a shared handle: copies alias the same storage, which is what
// lets a backward closure write gradients into the caller's parameters.
// Operations take the Tape explicitly; a tape constructed with
// recording=false evaluates forward only.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "caebench/aligned.hpp"

namespace caebench::ad {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Filled(Shape shape, double v, bool requires_grad = false);
  static Tensor FromData(Shape shape, std::vector<double> data,
                         bool requires_grad = false);
  static Tensor Scalar(double v) { return FromData({1}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> data() const { return node_->value; }
  std::span<double> mutable_data() { return node_->value; }
  double item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return !node_->grad.empty(); }
  // Zeros when nothing has been accumulated yet.
  std::span<const double> grad() const;
  // Allocates a zero buffer on first use.
  std::span<double> mutable_grad();
  void zero_grad() { node_->grad.clear(); }

  // Deep copy of the value with no gradient link.
  Tensor Clone(bool requires_grad = false) const;

  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<TensorNode> node_;
};

// Ordered record of backward closures. Operations append after their
// inputs exist, so the record is topologically sorted by construction.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  bool Wants(std::initializer_list<const Tensor*> inputs) const;
  void Record(std::function<void()> backward);
  std::size_t size() const { return records_.size(); }

  // Seeds d(loss)/d(loss) = 1 on a one-element tensor, runs each record
  // exactly once in reverse order and then empties the tape.
  void Backward(const Tensor& loss);
  void Clear() { records_.clear(); }

 private:
  bool recording_;
  std::vector<std::function<void()>> records_;
};

// Conv geometry shared by Conv2d and Deconv2d. Kernel extents come from
// the weight tensor.
struct ConvParams {
  std::size_t stride = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
  // Transposed convolution only; must be smaller than stride.
  std::size_t output_padding = 0;
};

// input NCHW, weight [O, I, kh, kw], bias [O] or undefined.
Tensor Conv2d(Tape& tape, const Tensor& input, const Tensor& weight,
              const Tensor& bias, const ConvParams& params);
// input NCHW, weight [I, O, kh, kw] (same memory layout as the adjoint
// Conv2d weight), bias [O] or undefined. Output extent is
// (H - 1) * stride - 2 * pad + k + output_padding.
Tensor Deconv2d(Tape& tape, const Tensor& input, const Tensor& weight,
                const Tensor& bias, const ConvParams& params);

// Binary ops broadcast with numpy rules.
Tensor Add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor Sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor Mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor Div(Tape& tape, const Tensor& a, const Tensor& b);

Tensor AddScalar(Tape& tape, const Tensor& x, double c);
Tensor MulScalar(Tape& tape, const Tensor& x, double c);

// Subgradient 0 at the kink.
Tensor Relu(Tape& tape, const Tensor& x);
Tensor LeakyRelu(Tape& tape, const Tensor& x, double negative_slope);
Tensor Square(Tape& tape, const Tensor& x);
// Rejects non-positive entries.
Tensor Log(Tape& tape, const Tensor& x);
Tensor Exp(Tape& tape, const Tensor& x);
// Gradient 1 on the closed interval [lo, hi], 0 outside.
Tensor Clamp(Tape& tape, const Tensor& x, double lo, double hi);
Tensor Softplus(Tape& tape, const Tensor& x);
Tensor Tanh(Tape& tape, const Tensor& x);
Tensor Sigmoid(Tape& tape, const Tensor& x);
// Requires x >= 0; gradient at 0 is taken as 0 when exponent < 1.
Tensor PowScalar(Tape& tape, const Tensor& x, double exponent);

Tensor Sum(Tape& tape, const Tensor& x);
Tensor Mean(Tape& tape, const Tensor& x);
// NCHW -> [N, C, 1, 1].
Tensor SpatialMean(Tape& tape, const Tensor& x);
Tensor Reshape(Tape& tape, const Tensor& x, Shape shape);

}  // namespace caebench::ad

#endif  // CAEBENCH_TENSOR_HPP_

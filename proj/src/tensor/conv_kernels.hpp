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

#ifndef CAEBENCH_TENSOR_CONV_KERNELS_HPP_
#define CAEBENCH_TENSOR_CONV_KERNELS_HPP_

// im2col + GEMM convolution kernels, templated on the scalar type so the
// 64-bit training path and the 32-bit inference path share one
// implementation. Transposed convolution is expressed through the adjoint
// routines: deconv forward is ConvBackwardInput, and so on.

#include <Eigen/Core>

#include <cstddef>
#include <vector>

#include "caebench/aligned.hpp"

namespace caebench::kernels {

struct ConvShape {
  std::size_t batch = 0;
  std::size_t in_channels = 0;
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;

  std::size_t patch() const { return in_channels * kernel_h * kernel_w; }
  std::size_t in_plane() const { return in_h * in_w; }
  std::size_t out_plane() const { return out_h * out_w; }
};

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMatrix = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMapMatrix = Eigen::Map<const RowMatrix<T>>;

template <class T>
void Im2Col(const ConvShape& s, const T* image, T* col) {
  const std::size_t plane = s.out_plane();
  for (std::size_t c = 0; c < s.in_channels; ++c) {
    const T* src = image + c * s.in_plane();
    for (std::size_t ki = 0; ki < s.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < s.kernel_w; ++kj) {
        T* dst = col + ((c * s.kernel_h + ki) * s.kernel_w + kj) * plane;
        for (std::size_t oh = 0; oh < s.out_h; ++oh) {
          const long ih = static_cast<long>(oh * s.stride + ki) - static_cast<long>(s.pad_h);
          T* row = dst + oh * s.out_w;
          if (ih < 0 || ih >= static_cast<long>(s.in_h)) {
            for (std::size_t ow = 0; ow < s.out_w; ++ow) row[ow] = T(0);
            continue;
          }
          const T* src_row = src + static_cast<std::size_t>(ih) * s.in_w;
          for (std::size_t ow = 0; ow < s.out_w; ++ow) {
            const long iw = static_cast<long>(ow * s.stride + kj) - static_cast<long>(s.pad_w);
            row[ow] = (iw < 0 || iw >= static_cast<long>(s.in_w))
                          ? T(0)
                          : src_row[static_cast<std::size_t>(iw)];
          }
        }
      }
    }
  }
}

// Accumulates col back into image (adjoint of Im2Col).
template <class T>
void Col2Im(const ConvShape& s, const T* col, T* image) {
  const std::size_t plane = s.out_plane();
  for (std::size_t c = 0; c < s.in_channels; ++c) {
    T* dst = image + c * s.in_plane();
    for (std::size_t ki = 0; ki < s.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < s.kernel_w; ++kj) {
        const T* src = col + ((c * s.kernel_h + ki) * s.kernel_w + kj) * plane;
        for (std::size_t oh = 0; oh < s.out_h; ++oh) {
          const long ih = static_cast<long>(oh * s.stride + ki) - static_cast<long>(s.pad_h);
          if (ih < 0 || ih >= static_cast<long>(s.in_h)) continue;
          T* dst_row = dst + static_cast<std::size_t>(ih) * s.in_w;
          const T* row = src + oh * s.out_w;
          for (std::size_t ow = 0; ow < s.out_w; ++ow) {
            const long iw = static_cast<long>(ow * s.stride + kj) - static_cast<long>(s.pad_w);
            if (iw < 0 || iw >= static_cast<long>(s.in_w)) continue;
            dst_row[static_cast<std::size_t>(iw)] += row[ow];
          }
        }
      }
    }
  }
}

// y[n] = W * im2col(x[n]) + b. Overwrites y.
template <class T>
void ConvForward(const ConvShape& s, const T* x, const T* w, const T* bias, T* y) {
  AlignedVector<T> col(s.patch() * s.out_plane());
  ConstMapMatrix<T> wm(w, s.out_channels, s.patch());
  for (std::size_t n = 0; n < s.batch; ++n) {
    Im2Col(s, x + n * s.in_channels * s.in_plane(), col.data());
    ConstMapMatrix<T> cm(col.data(), s.patch(), s.out_plane());
    MapMatrix<T> ym(y + n * s.out_channels * s.out_plane(), s.out_channels, s.out_plane());
    ym.noalias() = wm * cm;
    if (bias != nullptr) {
      for (std::size_t o = 0; o < s.out_channels; ++o) ym.row(o).array() += bias[o];
    }
  }
}

// dx[n] += col2im(W^T * dy[n]).
template <class T>
void ConvBackwardInput(const ConvShape& s, const T* w, const T* dy, T* dx) {
  AlignedVector<T> col(s.patch() * s.out_plane());
  ConstMapMatrix<T> wm(w, s.out_channels, s.patch());
  for (std::size_t n = 0; n < s.batch; ++n) {
    ConstMapMatrix<T> dym(dy + n * s.out_channels * s.out_plane(), s.out_channels, s.out_plane());
    MapMatrix<T> cm(col.data(), s.patch(), s.out_plane());
    cm.noalias() = wm.transpose() * dym;
    Col2Im(s, col.data(), dx + n * s.in_channels * s.in_plane());
  }
}

// dw += sum_n dy[n] * im2col(x[n])^T; db += spatial sums of dy.
template <class T>
void ConvBackwardWeight(const ConvShape& s, const T* x, const T* dy, T* dw, T* dbias) {
  AlignedVector<T> col(s.patch() * s.out_plane());
  MapMatrix<T> dwm(dw, s.out_channels, s.patch());
  for (std::size_t n = 0; n < s.batch; ++n) {
    Im2Col(s, x + n * s.in_channels * s.in_plane(), col.data());
    ConstMapMatrix<T> cm(col.data(), s.patch(), s.out_plane());
    ConstMapMatrix<T> dym(dy + n * s.out_channels * s.out_plane(), s.out_channels, s.out_plane());
    dwm.noalias() += dym * cm.transpose();
    if (dbias != nullptr) {
      // Plain left-to-right sum: the order must not depend on the address.
      const T* g = dy + n * s.out_channels * s.out_plane();
      for (std::size_t o = 0; o < s.out_channels; ++o) {
        T acc = 0;
        for (std::size_t i = 0; i < s.out_plane(); ++i) acc += g[o * s.out_plane() + i];
        dbias[o] += acc;
      }
    }
  }
}

}  // namespace caebench::kernels

#endif  // CAEBENCH_TENSOR_CONV_KERNELS_HPP_

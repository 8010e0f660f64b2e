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

#include "toy_model.hpp"

#include <algorithm>

namespace caebench::testing {
namespace {

// Per-channel kernel: weight[a, a, ky, kx] = value(ky, kx) for the diagonal
// pairs, zero elsewhere. Works for both [O, I, k, k] and [I, O, k, k].
template <typename Fn>
void Diagonal(ad::Tensor& w, Fn value) {
  auto d = w.mutable_data();
  std::fill(d.begin(), d.end(), 0.0);
  const std::size_t a_dim = w.dim(0), b_dim = w.dim(1);
  for (std::size_t a = 0; a < std::min(a_dim, b_dim); ++a)
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) d[((a * b_dim + a) * 3 + ky) * 3 + kx] = value(ky, kx);
}

void ZeroBias(ad::Tensor& b) {
  auto d = b.mutable_data();
  std::fill(d.begin(), d.end(), 0.0);
}

}  // namespace

codec::CodecModel NearIdentityModel(double latent_scale) {
  codec::Architecture arch;
  arch.units = 1;
  arch.filters = 3;
  arch.latent_channels = 3;
  codec::CodecModel model = codec::CodecModel::Create(arch, 1);
  auto delta = [](double s) { return [s](std::size_t ky, std::size_t kx) { return ky == 1 && kx == 1 ? s : 0.0; }; };
  auto& enc = model.encoder();
  auto& dec = model.decoder();
  for (auto* group : {&enc, &dec}) {
    for (auto& layer : *group) {
      Diagonal(layer.weight, delta(1.0));
      ZeroBias(layer.bias);
    }
  }
  Diagonal(enc.back().weight, delta(latent_scale));
  Diagonal(dec.front().weight, delta(1.0 / latent_scale));
  // Stride-2 transposed conv with taps at 1 and 2 copies each latent sample
  // into a 2x2 block.
  Diagonal(dec.back().weight, [](std::size_t ky, std::size_t kx) { return ky >= 1 && kx >= 1 ? 1.0 : 0.0; });
  return model;
}

}  // namespace caebench::testing

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

#ifndef CAEBENCH_TESTS_SYNTHETIC_HPP_
#define CAEBENCH_TESTS_SYNTHETIC_HPP_

#include <cstddef>
#include <cstdint>
#include <random>

#include "caebench/image.hpp"

namespace caebench::testing {

// Procedural "natural-ish" picture: smooth colour gradient, a few flat
// shapes with hard edges, a sinusoidal texture patch and mild noise.
Image SyntheticImage(std::size_t width, std::size_t height, std::uint64_t seed);

Image UniformNoiseImage(std::size_t width, std::size_t height, std::mt19937_64& rng);

}  // namespace caebench::testing

#endif  // CAEBENCH_TESTS_SYNTHETIC_HPP_

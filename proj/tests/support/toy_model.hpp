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

#ifndef CAEBENCH_TESTS_TOY_MODEL_HPP_
#define CAEBENCH_TESTS_TOY_MODEL_HPP_

#include "caebench/model.hpp"

namespace caebench::testing {

// One-unit model (n = 1, 3 filters, K = 3) wired by hand as subsample ->
// scale by `latent_scale` -> round -> unscale -> nearest-neighbour upsample.
// Positive inputs pass through the leaky rectifiers unchanged.
codec::CodecModel NearIdentityModel(double latent_scale);

}  // namespace caebench::testing

#endif  // CAEBENCH_TESTS_TOY_MODEL_HPP_

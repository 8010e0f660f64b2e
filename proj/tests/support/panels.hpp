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

#ifndef CAEBENCH_TESTS_PANELS_HPP_
#define CAEBENCH_TESTS_PANELS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "caebench/subjstats.hpp"

namespace caebench::testing {

struct PanelShape {
  std::size_t subjects = 16;
  std::vector<std::string> codecs = {"c1", "c2", "c3", "c4", "c5", "c6"};
  std::size_t contents = 7;
  std::vector<std::string> rates = {"R1", "R2", "R3", "R4"};
  std::vector<double> targets = {0.12, 0.25, 0.5, 0.75};
  bool references = true;
};

// Every subject rates every stimulus. A stimulus is "low" or "high" quality
// (depending on codec, rate and content); honest subjects draw uniformly from
// {1,2,3} or {3,4,5} accordingly, references from {4,5}. Actual bitrates sit
// within 5% of the targets.
subj::ScoreMatrix ConsistentPanel(const PanelShape& shape, std::uint64_t seed);

// As ConsistentPanel, but subject `deviant` answers 5 on low and 1 on high
// stimuli for a fraction `share` of the coded stimuli.
subj::ScoreMatrix DeviantPanel(const PanelShape& shape, std::uint64_t seed, const std::string& deviant,
                               double share);

std::string SubjectName(std::size_t i);
std::string StimulusName(const std::string& codec, std::size_t content, const std::string& rate);

}  // namespace caebench::testing

#endif  // CAEBENCH_TESTS_PANELS_HPP_

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

#ifndef CAEBENCH_SESSION_HPP_
#define CAEBENCH_SESSION_HPP_

// ACR-HR test construction: stimulus inventory, per-subject randomized
// presentation orders split into two sessions, and a short training list.

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace caebench::session {

// Media layout under `media_root`:
//   <codec>/<content>/<rate>.<ext>    coded stimuli
//   reference/<content>.<ext>         hidden references
//   bitrates.csv                      codec,content,rate_id,actual_bpp
struct InventoryConfig {
  std::vector<std::string> codecs;
  std::vector<std::string> contents;
  std::vector<std::string> rates;  // lowest bitrate first
  std::filesystem::path media_root;
  bool include_references = true;
  std::vector<std::string> extensions = {"png", "ppm"};
  std::uint64_t seed = 0;  // only permutes the opaque ids
  // Training items show one content at the extreme rates. Empty selects the
  // first content; a content outside `contents` needs its own media files.
  bool training = true;
  std::string training_content;
};

inline constexpr const char* kReferenceCodec = "reference";

struct InventoryItem {
  std::string id;  // opaque: s001, s002, ...
  std::string codec;
  std::string content;
  std::string rate_id;     // empty for references and training items
  double actual_bpp = 0;   // NaN for references
  bool is_reference = false;
  bool is_training = false;
  std::filesystem::path media;  // relative to the media root
};

struct Inventory {
  std::filesystem::path media_root;
  std::vector<InventoryItem> items;  // sorted by id
  std::vector<InventoryItem> training;

  std::size_t coded_count() const;
  std::size_t reference_count() const;
  const InventoryItem* Find(const std::string& id) const;
};

// Every missing media file or bitrate is listed in one kNotFound error.
Inventory BuildInventory(const InventoryConfig& config);

struct SessionPlan {
  std::string subject;
  std::vector<std::string> training;
  std::array<std::vector<std::string>, 2> sessions;
};

// Deterministic in (seed, subject). Throws kInfeasible when one content
// holds more than half of the stimuli.
SessionPlan Randomize(const Inventory& inventory, const std::string& subject, std::uint64_t seed);

// Order in which no two neighbours share `keys[i]`; exposed for testing.
// Returns a permutation of 0..keys.size()-1.
std::vector<std::size_t> NonAdjacentOrder(const std::vector<std::string>& keys, std::uint64_t seed);

// manifest.csv: stimulus_id,codec,content,rate_id,actual_bpp,is_reference,is_training,media
void WriteManifest(const Inventory& inventory, std::ostream& out);
Inventory ReadManifest(std::istream& in, const std::filesystem::path& media_root);

// plan.csv: subject_id,session,position,stimulus_id with session in
// {training, 1, 2} and 1-based positions.
void WritePlans(const std::vector<SessionPlan>& plans, std::ostream& out);
std::vector<SessionPlan> ReadPlans(std::istream& in);

struct DesignConfig {
  InventoryConfig inventory;
  std::vector<std::string> subjects;
  std::uint64_t seed = 0;
};

// Builds the inventory and one plan per subject, then writes manifest.csv
// and plan.csv into `out_dir`.
struct Design {
  Inventory inventory;
  std::vector<SessionPlan> plans;
};
Design MakeDesign(const DesignConfig& config);
void WriteDesign(const Design& design, const std::filesystem::path& out_dir);
Design ReadDesign(const std::filesystem::path& dir, const std::filesystem::path& media_root);

}  // namespace caebench::session

#endif  // CAEBENCH_SESSION_HPP_

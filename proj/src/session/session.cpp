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

#include "caebench/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "caebench/error.hpp"
#include "common/csv.hpp"

namespace caebench::session {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kRepairAttempts = 32;

constexpr const char* kManifestHeader = "stimulus_id,codec,content,rate_id,actual_bpp,is_reference,is_training,media";
constexpr const char* kPlanHeader = "subject_id,session,position,stimulus_id";
constexpr const char* kBitratesHeader = "codec,content,rate_id,actual_bpp";

std::uint64_t SplitMix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t Fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ull;
  return h;
}

// std::uniform_int_distribution differs between standard libraries; plans
// must not.
std::size_t Below(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do v = rng();
  while (v >= limit);
  return static_cast<std::size_t>(v % n);
}

template <class T>
void Shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[Below(rng, i)]);
}

// Walks left to right; a clash at i is fixed by pulling forward the next
// element whose key differs from i-1. Only later positions change, so one
// pass suffices or proves this shuffle unrepairable.
bool Repair(std::vector<std::size_t>& order, const std::vector<std::string>& keys) {
  for (std::size_t i = 1; i < order.size(); ++i) {
    const std::string& prev = keys[order[i - 1]];
    if (keys[order[i]] != prev) continue;
    std::size_t j = i + 1;
    while (j < order.size() && keys[order[j]] == prev) ++j;
    if (j == order.size()) return false;
    std::swap(order[i], order[j]);
  }
  return true;
}

// Always picks the content with the most items left, excluding the previous
// one. Never gets stuck while the largest group is at most half (rounded
// up) of what remains.
std::vector<std::size_t> Greedy(const std::vector<std::string>& keys, std::mt19937_64& rng) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < keys.size(); ++i) groups[keys[i]].push_back(i);
  for (auto& [_, g] : groups) Shuffle(g, rng);
  std::vector<std::size_t> order;
  std::string prev;
  bool first = true;
  while (order.size() < keys.size()) {
    std::vector<std::string> best;
    std::size_t best_count = 0;
    for (const auto& [k, g] : groups) {
      if (g.empty() || (!first && k == prev)) continue;
      if (g.size() > best_count) {
        best_count = g.size();
        best.assign(1, k);
      } else if (g.size() == best_count) {
        best.push_back(k);
      }
    }
    if (best.empty()) Fail(ErrorKind::kInfeasible, "no non-adjacent order exists");
    const std::string pick = best[Below(rng, best.size())];
    order.push_back(groups[pick].back());
    groups[pick].pop_back();
    prev = pick;
    first = false;
  }
  return order;
}

std::string OpaqueId(char prefix, std::size_t index, std::size_t total) {
  const int width = std::max<int>(3, static_cast<int>(std::to_string(total).size()));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, index);
  return buf;
}

std::optional<std::filesystem::path> FindMedia(const std::filesystem::path& root, const std::filesystem::path& stem,
                                               const std::vector<std::string>& extensions) {
  for (const auto& ext : extensions) {
    std::filesystem::path rel = stem;
    rel += "." + ext;
    const auto full = root / rel;
    std::error_code ec;
    if (std::filesystem::is_regular_file(full, ec) && std::ifstream(full, std::ios::binary).good()) return rel;
  }
  return std::nullopt;
}

std::string Describe(const std::filesystem::path& stem, const std::vector<std::string>& extensions) {
  std::string s = stem.generic_string() + ".{";
  for (std::size_t i = 0; i < extensions.size(); ++i) s += (i ? "," : "") + extensions[i];
  return s + "}";
}

using BitrateKey = std::tuple<std::string, std::string, std::string>;

std::map<BitrateKey, double> ReadBitrates(const std::filesystem::path& path) {
  std::map<BitrateKey, double> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line_no == 1 && line.rfind(kBitratesHeader, 0) == 0) continue;
    const auto f = csv::SplitLine(line, line_no);
    if (f.size() != 4) csv::LineError(ErrorKind::kFormat, line_no, path.filename().string() + ": expected 4 fields");
    const double bpp = csv::ParseDouble(f[3], line_no, "actual_bpp");
    if (bpp < 0) csv::LineError(ErrorKind::kFormat, line_no, "negative actual_bpp");
    if (!out.emplace(BitrateKey{f[0], f[1], f[2]}, bpp).second) {
      csv::LineError(ErrorKind::kConflict, line_no, "duplicate bitrate entry");
    }
  }
  return out;
}

void CheckNames(const std::vector<std::string>& names, const char* what) {
  if (names.empty()) Fail(ErrorKind::kInvalidArgument, std::string("no ") + what + " configured");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty() || n.find_first_of("/\\") != std::string::npos || n == "." || n == "..") {
      Fail(ErrorKind::kInvalidArgument, std::string("bad ") + what + " name '" + n + "'");
    }
    if (!seen.insert(n).second) Fail(ErrorKind::kInvalidArgument, std::string("duplicate ") + what + " '" + n + "'");
  }
}

}  // namespace

std::size_t Inventory::coded_count() const {
  return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [](const auto& i) { return !i.is_reference; }));
}

std::size_t Inventory::reference_count() const { return items.size() - coded_count(); }

const InventoryItem* Inventory::Find(const std::string& id) const {
  for (const auto* list : {&items, &training}) {
    for (const auto& i : *list)
      if (i.id == id) return &i;
  }
  return nullptr;
}

Inventory BuildInventory(const InventoryConfig& config) {
  CheckNames(config.codecs, "codec");
  CheckNames(config.contents, "content");
  CheckNames(config.rates, "rate");
  if (std::find(config.codecs.begin(), config.codecs.end(), kReferenceCodec) != config.codecs.end()) {
    Fail(ErrorKind::kInvalidArgument, std::string("'") + kReferenceCodec + "' is reserved for hidden references");
  }
  if (config.extensions.empty()) Fail(ErrorKind::kInvalidArgument, "no media extensions configured");

  const auto bitrates_path = config.media_root / "bitrates.csv";
  const auto bitrates = ReadBitrates(bitrates_path);
  std::vector<std::string> missing;
  const bool have_bitrates = std::filesystem::exists(bitrates_path);
  if (!have_bitrates) missing.push_back("bitrates.csv");

  auto coded = [&](const std::string& codec, const std::string& content, const std::string& rate,
                   bool required_bpp) -> std::optional<InventoryItem> {
    InventoryItem it;
    it.codec = codec;
    it.content = content;
    it.rate_id = rate;
    const auto stem = std::filesystem::path(codec) / content / rate;
    const auto media = FindMedia(config.media_root, stem, config.extensions);
    const auto bpp = bitrates.find({codec, content, rate});
    bool ok = true;
    if (!media) {
      missing.push_back(Describe(stem, config.extensions));
      ok = false;
    }
    if (bpp == bitrates.end()) {
      if (required_bpp && have_bitrates) missing.push_back("bitrate for " + codec + "/" + content + "/" + rate);
      if (required_bpp) ok = false;
      it.actual_bpp = kNaN;
    } else {
      it.actual_bpp = bpp->second;
    }
    if (!ok) return std::nullopt;
    it.media = *media;
    return it;
  };
  auto reference = [&](const std::string& content) -> std::optional<InventoryItem> {
    InventoryItem it;
    it.codec = kReferenceCodec;
    it.content = content;
    it.actual_bpp = kNaN;
    it.is_reference = true;
    const auto stem = std::filesystem::path(kReferenceCodec) / content;
    const auto media = FindMedia(config.media_root, stem, config.extensions);
    if (!media) {
      missing.push_back(Describe(stem, config.extensions));
      return std::nullopt;
    }
    it.media = *media;
    return it;
  };

  std::vector<InventoryItem> items;
  for (const auto& codec : config.codecs)
    for (const auto& content : config.contents)
      for (const auto& rate : config.rates)
        if (auto it = coded(codec, content, rate, true)) items.push_back(std::move(*it));
  if (config.include_references) {
    for (const auto& content : config.contents)
      if (auto it = reference(content)) items.push_back(std::move(*it));
  }

  std::vector<InventoryItem> training;
  if (config.training) {
    const std::string content = config.training_content.empty() ? config.contents.front() : config.training_content;
    const std::string lo = config.rates.front(), hi = config.rates.back();
    const std::string a = config.codecs.front(), b = config.codecs.back();
    if (config.include_references)
      if (auto it = reference(content)) training.push_back(std::move(*it));
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& [codec, rate] : {std::pair{a, lo}, std::pair{b, hi}, std::pair{b, lo}, std::pair{a, hi}}) {
      if (!seen.insert({codec, rate}).second) continue;
      if (auto it = coded(codec, content, rate, false)) training.push_back(std::move(*it));
    }
  }

  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::string what = std::to_string(missing.size()) + " missing under " + config.media_root.string() + ":";
    for (const auto& m : missing) what += "\n  " + m;
    Fail(ErrorKind::kNotFound, what);
  }

  // Ids carry no order information about codec, content or rate.
  std::mt19937_64 rng(SplitMix(config.seed ^ 0x1d5e55a11ull));
  Shuffle(items, rng);
  for (std::size_t i = 0; i < items.size(); ++i) items[i].id = OpaqueId('s', i + 1, items.size());
  for (std::size_t i = 0; i < training.size(); ++i) {
    training[i].id = OpaqueId('t', i + 1, training.size());
    training[i].is_training = true;
  }
  Inventory inv;
  inv.media_root = config.media_root;
  inv.items = std::move(items);
  inv.training = std::move(training);
  return inv;
}

std::vector<std::size_t> NonAdjacentOrder(const std::vector<std::string>& keys, std::uint64_t seed) {
  if (keys.empty()) Fail(ErrorKind::kInvalidArgument, "nothing to order");
  std::map<std::string, std::size_t> counts;
  for (const auto& k : keys) ++counts[k];
  const auto top = std::max_element(counts.begin(), counts.end(), [](const auto& x, const auto& y) { return x.second < y.second; });
  const std::size_t limit = (keys.size() + 1) / 2;
  if (top->second > limit) {
    Fail(ErrorKind::kInfeasible, "content '" + top->first + "' has " + std::to_string(top->second) + " of " +
                                     std::to_string(keys.size()) + " stimuli; at most " + std::to_string(limit) +
                                     " can be kept apart");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(keys.size());
  for (int attempt = 0; attempt < kRepairAttempts; ++attempt) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Shuffle(order, rng);
    if (Repair(order, keys)) return order;
  }
  return Greedy(keys, rng);
}

SessionPlan Randomize(const Inventory& inventory, const std::string& subject, std::uint64_t seed) {
  if (inventory.items.empty()) Fail(ErrorKind::kInvalidArgument, "empty inventory");
  if (subject.empty()) Fail(ErrorKind::kInvalidArgument, "empty subject id");
  std::vector<std::string> keys;
  for (const auto& it : inventory.items) keys.push_back(it.content);
  const auto order = NonAdjacentOrder(keys, SplitMix(seed) ^ Fnv1a(subject));
  SessionPlan plan;
  plan.subject = subject;
  const std::size_t first = (order.size() + 1) / 2;
  for (std::size_t i = 0; i < order.size(); ++i) plan.sessions[i < first ? 0 : 1].push_back(inventory.items[order[i]].id);
  for (const auto& t : inventory.training) plan.training.push_back(t.id);
  return plan;
}

void WriteManifest(const Inventory& inventory, std::ostream& out) {
  out << kManifestHeader << '\n';
  for (const auto* list : {&inventory.items, &inventory.training}) {
    for (const auto& i : *list) {
      out << csv::Join({i.id, i.codec, i.content, i.rate_id, csv::Number(i.actual_bpp), i.is_reference ? "1" : "0",
                        i.is_training ? "1" : "0", i.media.generic_string()})
          << '\n';
    }
  }
}

Inventory ReadManifest(std::istream& in, const std::filesystem::path& media_root) {
  Inventory inv;
  inv.media_root = media_root;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line != kManifestHeader) csv::LineError(ErrorKind::kFormat, 1, "unexpected manifest header");
      continue;
    }
    if (line.empty() || line == "\r") continue;
    const auto f = csv::SplitLine(line, line_no);
    if (f.size() != 8) csv::LineError(ErrorKind::kFormat, line_no, "expected 8 fields");
    InventoryItem it;
    it.id = f[0];
    it.codec = f[1];
    it.content = f[2];
    it.rate_id = f[3];
    it.actual_bpp = f[4].empty() ? kNaN : csv::ParseDouble(f[4], line_no, "actual_bpp");
    it.is_reference = csv::ParseBool(f[5], line_no, "is_reference");
    it.is_training = csv::ParseBool(f[6], line_no, "is_training");
    it.media = f[7];
    if (it.id.empty() || it.media.empty()) csv::LineError(ErrorKind::kFormat, line_no, "empty id or media");
    if (it.media.is_absolute() || it.media.lexically_normal().string().rfind("..", 0) == 0) {
      csv::LineError(ErrorKind::kFormat, line_no, "media path must stay inside the media root");
    }
    if (!ids.insert(it.id).second) csv::LineError(ErrorKind::kConflict, line_no, "duplicate stimulus id " + it.id);
    if (!it.is_reference && !it.is_training && std::isnan(it.actual_bpp)) {
      csv::LineError(ErrorKind::kFormat, line_no, "coded stimulus without actual_bpp");
    }
    (it.is_training ? inv.training : inv.items).push_back(std::move(it));
  }
  return inv;
}

void WritePlans(const std::vector<SessionPlan>& plans, std::ostream& out) {
  out << kPlanHeader << '\n';
  for (const auto& p : plans) {
    auto emit = [&](const std::string& label, const std::vector<std::string>& ids) {
      for (std::size_t i = 0; i < ids.size(); ++i) out << csv::Join({p.subject, label, std::to_string(i + 1), ids[i]}) << '\n';
    };
    emit("training", p.training);
    emit("1", p.sessions[0]);
    emit("2", p.sessions[1]);
  }
}

std::vector<SessionPlan> ReadPlans(std::istream& in) {
  std::vector<SessionPlan> plans;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line != kPlanHeader) csv::LineError(ErrorKind::kFormat, 1, "unexpected plan header");
      continue;
    }
    if (line.empty() || line == "\r") continue;
    const auto f = csv::SplitLine(line, line_no);
    if (f.size() != 4) csv::LineError(ErrorKind::kFormat, line_no, "expected 4 fields");
    auto [pos, fresh] = index.emplace(f[0], plans.size());
    if (fresh) {
      plans.emplace_back();
      plans.back().subject = f[0];
    }
    SessionPlan& p = plans[pos->second];
    std::vector<std::string>* list = nullptr;
    if (f[1] == "training") list = &p.training;
    else if (f[1] == "1") list = &p.sessions[0];
    else if (f[1] == "2") list = &p.sessions[1];
    else csv::LineError(ErrorKind::kFormat, line_no, "session must be training, 1 or 2");
    const long position = csv::ParseInt(f[2], line_no, "position");
    if (position != static_cast<long>(list->size()) + 1) csv::LineError(ErrorKind::kFormat, line_no, "positions must run 1, 2, ...");
    list->push_back(f[3]);
  }
  return plans;
}

Design MakeDesign(const DesignConfig& config) {
  if (config.subjects.empty()) Fail(ErrorKind::kInvalidArgument, "no subjects configured");
  std::set<std::string> seen;
  for (const auto& s : config.subjects) {
    if (s.empty() || !seen.insert(s).second) Fail(ErrorKind::kInvalidArgument, "subject ids must be unique and non-empty");
  }
  Design d;
  d.inventory = BuildInventory(config.inventory);
  for (const auto& s : config.subjects) d.plans.push_back(Randomize(d.inventory, s, config.seed));
  return d;
}

void WriteDesign(const Design& design, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto open = [&](const char* name) {
    std::ofstream out(out_dir / name, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorKind::kIo, "cannot write " + (out_dir / name).string());
    return out;
  };
  auto manifest = open("manifest.csv");
  WriteManifest(design.inventory, manifest);
  auto plan = open("plan.csv");
  WritePlans(design.plans, plan);
  if (!manifest || !plan) Fail(ErrorKind::kIo, "write failed in " + out_dir.string());
}

Design ReadDesign(const std::filesystem::path& dir, const std::filesystem::path& media_root) {
  std::ifstream manifest(dir / "manifest.csv");
  if (!manifest) Fail(ErrorKind::kIo, "cannot open " + (dir / "manifest.csv").string());
  std::ifstream plan(dir / "plan.csv");
  if (!plan) Fail(ErrorKind::kIo, "cannot open " + (dir / "plan.csv").string());
  Design d;
  d.inventory = ReadManifest(manifest, media_root);
  d.plans = ReadPlans(plan);
  for (const auto& p : d.plans) {
    for (const auto* list : {&p.training, &p.sessions[0], &p.sessions[1]})
      for (const auto& id : *list)
        if (!d.inventory.Find(id)) Fail(ErrorKind::kFormat, "plan for " + p.subject + " names unknown stimulus " + id);
  }
  return d;
}

}  // namespace caebench::session

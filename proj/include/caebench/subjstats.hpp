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

#ifndef CAEBENCH_SUBJSTATS_HPP_
#define CAEBENCH_SUBJSTATS_HPP_

// Opinion-score analysis: subject screening, MOS / DMOS with Student-t
// intervals, and per-rate pairwise codec comparisons.

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "caebench/stats.hpp"

namespace caebench::subj {

struct Stimulus {
  std::string id;
  std::string codec;
  std::string content;
  std::string rate_id;    // empty for hidden references
  double actual_bpp = 0;  // NaN when unknown (references)
  bool is_reference = false;

  bool operator==(const Stimulus& o) const;
};

inline constexpr const char* kScoreCsvHeader =
    "subject_id,stimulus_id,codec,content,rate_id,actual_bpp,is_reference,score";

// Subjects x stimuli, ratings 1..5, at most one per pair. Subjects and
// stimuli are kept sorted by id so results never depend on input order.
class ScoreMatrix {
 public:
  // Registers a stimulus; re-registering must repeat the same metadata.
  void AddStimulus(const Stimulus& s);
  // Throws kInvalidArgument for a score outside 1..5, kConflict for a second
  // rating of the same pair, kNotFound for an unregistered stimulus.
  void AddRating(const std::string& subject, const std::string& stimulus, int score);

  const std::map<std::string, Stimulus>& stimuli() const { return stimuli_; }
  std::vector<std::string> subjects() const;
  std::optional<int> Score(const std::string& subject, const std::string& stimulus) const;
  // Ratings of one stimulus in subject-id order.
  std::vector<double> ScoresOf(const std::string& stimulus) const;
  std::size_t rating_count() const;

  ScoreMatrix WithoutSubjects(const std::vector<std::string>& subjects) const;

  // Score CSV. Errors carry the 1-based line number.
  static ScoreMatrix ReadCsv(std::istream& in);
  static ScoreMatrix ReadCsv(const std::filesystem::path& path);
  void WriteCsv(std::ostream& out) const;

 private:
  std::map<std::string, Stimulus> stimuli_;
  std::map<std::string, std::map<std::string, int>> ratings_;  // subject -> stimulus -> score
};

struct SubjectScreening {
  std::string subject;
  std::size_t scored = 0;
  std::size_t above = 0;  // P
  std::size_t below = 0;  // Q
  bool rejected = false;
};

struct ScreeningResult {
  std::vector<SubjectScreening> subjects;
  std::vector<std::string> rejected;
  ScoreMatrix clean;
};

// Per-stimulus mean, sample deviation and kurtosis m4 / m2^2; thresholds at
// 2 sigma when 2 <= kurtosis <= 4, otherwise sqrt(20) sigma. A subject is
// rejected when (P + Q) / scored > 0.05 and |P - Q| / (P + Q) < 0.3.
// Needs at least three subjects.
ScreeningResult ScreenOutliers(const ScoreMatrix& scores);

struct MosResult {
  std::string stimulus_id;
  double mos = 0.0;
  std::optional<double> ci95;  // half width, needs n >= 2
  std::size_t n = 0;
  bool operator==(const MosResult&) const = default;
};

MosResult Mos(const ScoreMatrix& scores, const std::string& stimulus);
// Differential scores score - reference + 5 clamped to [1, 5], over subjects
// who rated both. Throws kNotFound when nobody did.
MosResult Dmos(const ScoreMatrix& scores, const std::string& stimulus, const std::string& reference);
// Hidden reference for the stimulus's content, if one was registered.
std::optional<std::string> ReferenceFor(const ScoreMatrix& scores, const std::string& stimulus);

struct RateTarget {
  double target_bpp = 0.0;
  std::optional<double> threshold_bpp;  // default: 15% of the target
  double threshold() const { return threshold_bpp.value_or(0.15 * target_bpp); }
};
using ThresholdTable = std::map<std::string, RateTarget>;

// rate_id,target_bpp,threshold_bpp (threshold may be empty).
ThresholdTable ReadThresholds(const std::filesystem::path& path);
ThresholdTable ReadThresholds(std::istream& in);

struct PairCell {
  std::size_t n = 0;  // contents where the row codec is significantly better
  std::size_t m = 0;  // comparable contents
};

struct PairwiseMatrix {
  std::string rate_id;
  std::vector<std::string> codecs;
  std::vector<std::vector<PairCell>> cells;  // [row][col]
  const PairCell& at(const std::string& row, const std::string& col) const;
};

// A content is comparable for (A, B) when both coded stimuli exist, both
// hit the rate target within the threshold (every stimulus counts as on
// target if the table has no entry for the rate) and both sides carry at
// least two ratings.
PairwiseMatrix BuildPairwiseMatrix(const ScoreMatrix& scores, const std::string& rate_id,
                                   const ThresholdTable& thresholds, double alpha = 0.05);

struct AnalysisConfig {
  ThresholdTable thresholds;
  bool exclude_lowest_rate = true;
  bool screen = true;
  double alpha = 0.05;
};

struct Analysis {
  ScreeningResult screening;
  std::vector<MosResult> mos;
  std::vector<MosResult> dmos;
  std::vector<PairwiseMatrix> matrices;
};

Analysis Analyze(const ScoreMatrix& scores, const AnalysisConfig& config);

// Rate ids from lowest to highest bitrate: by target when the table covers
// every rate, otherwise by mean actual bpp (id order on ties).
std::vector<std::string> RatesByBitrate(const ScoreMatrix& scores, const ThresholdTable& thresholds);

// Writes mos.csv, dmos.csv, pairwise.csv and outliers.csv into `dir`.
void ExportAnalysis(const Analysis& analysis, const ScoreMatrix& scores, const std::filesystem::path& dir);
std::vector<MosResult> ReadMosCsv(const std::filesystem::path& path);

}  // namespace caebench::subj

#endif  // CAEBENCH_SUBJSTATS_HPP_

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

#include "caebench/subjstats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "caebench/error.hpp"
#include "common/csv.hpp"

namespace caebench::subj {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using csv::LineError;
using csv::ParseDouble;
using csv::ParseInt;

bool ParseBool(const std::string& s, std::size_t line) { return csv::ParseBool(s, line, "is_reference"); }

std::ifstream OpenIn(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string());
  return in;
}

std::ofstream OpenOut(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path.string());
  return out;
}

void Close(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) Fail(ErrorKind::kIo, "write failed for " + path.string());
}

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

MosResult FromSample(const std::string& id, const std::vector<double>& v) {
  const stats::MeanCi ci = stats::MeanWithCi(v);
  return {id, ci.mean, ci.half_width, ci.n};
}

}  // namespace

bool Stimulus::operator==(const Stimulus& o) const {
  const bool bpp_same = (std::isnan(actual_bpp) && std::isnan(o.actual_bpp)) || actual_bpp == o.actual_bpp;
  return id == o.id && codec == o.codec && content == o.content && rate_id == o.rate_id && bpp_same &&
         is_reference == o.is_reference;
}

void ScoreMatrix::AddStimulus(const Stimulus& s) {
  if (s.id.empty()) Fail(ErrorKind::kInvalidArgument, "stimulus id is empty");
  auto [it, inserted] = stimuli_.emplace(s.id, s);
  if (!inserted && !(it->second == s)) {
    Fail(ErrorKind::kConflict, "stimulus " + s.id + " registered with different metadata");
  }
}

void ScoreMatrix::AddRating(const std::string& subject, const std::string& stimulus, int score) {
  if (score < 1 || score > 5) {
    Fail(ErrorKind::kInvalidArgument, "score " + std::to_string(score) + " outside 1..5");
  }
  if (subject.empty()) Fail(ErrorKind::kInvalidArgument, "subject id is empty");
  if (!stimuli_.contains(stimulus)) Fail(ErrorKind::kNotFound, "unknown stimulus " + stimulus);
  auto [it, inserted] = ratings_[subject].emplace(stimulus, score);
  if (!inserted) Fail(ErrorKind::kConflict, "subject " + subject + " already rated " + stimulus);
}

std::vector<std::string> ScoreMatrix::subjects() const {
  std::vector<std::string> out;
  for (const auto& [s, _] : ratings_) out.push_back(s);
  return out;
}

std::optional<int> ScoreMatrix::Score(const std::string& subject, const std::string& stimulus) const {
  const auto it = ratings_.find(subject);
  if (it == ratings_.end()) return std::nullopt;
  const auto jt = it->second.find(stimulus);
  if (jt == it->second.end()) return std::nullopt;
  return jt->second;
}

std::vector<double> ScoreMatrix::ScoresOf(const std::string& stimulus) const {
  std::vector<double> out;
  for (const auto& [subject, row] : ratings_) {
    const auto it = row.find(stimulus);
    if (it != row.end()) out.push_back(it->second);
  }
  return out;
}

std::size_t ScoreMatrix::rating_count() const {
  std::size_t n = 0;
  for (const auto& [_, row] : ratings_) n += row.size();
  return n;
}

ScoreMatrix ScoreMatrix::WithoutSubjects(const std::vector<std::string>& subjects) const {
  ScoreMatrix out = *this;
  for (const auto& s : subjects) out.ratings_.erase(s);
  return out;
}

ScoreMatrix ScoreMatrix::ReadCsv(std::istream& in) {
  ScoreMatrix m;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) return m;  // empty file: no ratings
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (line != kScoreCsvHeader) {
    LineError(ErrorKind::kFormat, 1, std::string("expected header '") + kScoreCsvHeader + "'");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = csv::SplitLine(line, line_no);
    if (f.size() != 8) {
      LineError(ErrorKind::kFormat, line_no, "expected 8 fields, found " + std::to_string(f.size()));
    }
    Stimulus s;
    s.id = f[1];
    s.codec = f[2];
    s.content = f[3];
    s.rate_id = f[4];
    s.is_reference = ParseBool(f[6], line_no);
    if (f[5].empty()) {
      if (!s.is_reference) LineError(ErrorKind::kFormat, line_no, "actual_bpp missing for a coded stimulus");
      s.actual_bpp = kNaN;
    } else {
      s.actual_bpp = ParseDouble(f[5], line_no, "actual_bpp");
    }
    if (!s.is_reference && s.rate_id.empty()) LineError(ErrorKind::kFormat, line_no, "rate_id missing");
    if (s.content.empty()) LineError(ErrorKind::kFormat, line_no, "content missing");
    const long score = ParseInt(f[7], line_no, "score");
    try {
      m.AddStimulus(s);
      m.AddRating(f[0], s.id, static_cast<int>(std::clamp<long>(score, -1000, 1000)));
    } catch (const Error& e) {
      LineError(e.kind() == ErrorKind::kConflict ? ErrorKind::kConflict : ErrorKind::kFormat, line_no, e.what());
    }
  }
  return m;
}

ScoreMatrix ScoreMatrix::ReadCsv(const std::filesystem::path& path) {
  auto in = OpenIn(path);
  return ReadCsv(in);
}

void ScoreMatrix::WriteCsv(std::ostream& out) const {
  out << kScoreCsvHeader << '\n';
  for (const auto& [subject, row] : ratings_) {
    for (const auto& [id, score] : row) {
      const Stimulus& s = stimuli_.at(id);
      out << csv::Join({subject, id, s.codec, s.content, s.rate_id, csv::Number(s.actual_bpp),
                        s.is_reference ? "1" : "0", std::to_string(score)})
          << '\n';
    }
  }
}

ScreeningResult ScreenOutliers(const ScoreMatrix& scores) {
  const auto subjects = scores.subjects();
  if (subjects.size() < 3) Fail(ErrorKind::kInvalidArgument, "screening needs at least three subjects");
  std::map<std::string, SubjectScreening> tally;
  for (const auto& s : subjects) tally[s].subject = s;

  for (const auto& [id, _] : scores.stimuli()) {
    std::vector<std::pair<std::string, double>> rated;
    for (const auto& s : subjects) {
      if (auto v = scores.Score(s, id)) rated.emplace_back(s, *v);
    }
    for (const auto& [s, _v] : rated) ++tally[s].scored;
    if (rated.size() < 2) continue;
    const double n = static_cast<double>(rated.size());
    double mean = 0.0;
    for (const auto& [_s, v] : rated) mean += v;
    mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (const auto& [_s, v] : rated) {
      const double d = (v - mean) * (v - mean);
      m2 += d;
      m4 += d * d;
    }
    if (m2 == 0.0) continue;  // unanimous: nobody deviates
    const double sigma = std::sqrt(m2 / (n - 1.0));
    const double kurtosis = (m4 / n) / ((m2 / n) * (m2 / n));
    const double k = (kurtosis >= 2.0 && kurtosis <= 4.0) ? 2.0 : std::sqrt(20.0);
    for (const auto& [s, v] : rated) {
      if (v >= mean + k * sigma) ++tally[s].above;
      if (v <= mean - k * sigma) ++tally[s].below;
    }
  }

  ScreeningResult result;
  for (auto& [s, t] : tally) {
    const double pq = static_cast<double>(t.above + t.below);
    if (t.scored > 0 && pq > 0.0) {
      const double ratio = pq / static_cast<double>(t.scored);
      const double balance = std::abs(static_cast<double>(t.above) - static_cast<double>(t.below)) / pq;
      t.rejected = ratio > 0.05 && balance < 0.3;
    }
    if (t.rejected) result.rejected.push_back(s);
    result.subjects.push_back(t);
  }
  result.clean = scores.WithoutSubjects(result.rejected);
  return result;
}

MosResult Mos(const ScoreMatrix& scores, const std::string& stimulus) {
  if (!scores.stimuli().contains(stimulus)) Fail(ErrorKind::kNotFound, "unknown stimulus " + stimulus);
  const auto v = scores.ScoresOf(stimulus);
  if (v.empty()) Fail(ErrorKind::kInvalidArgument, "stimulus " + stimulus + " has no ratings");
  return FromSample(stimulus, v);
}

MosResult Dmos(const ScoreMatrix& scores, const std::string& stimulus, const std::string& reference) {
  std::vector<double> diffs;
  for (const auto& s : scores.subjects()) {
    const auto v = scores.Score(s, stimulus);
    const auto r = scores.Score(s, reference);
    if (v && r) diffs.push_back(std::clamp(*v - *r + 5, 1, 5));
  }
  if (diffs.empty()) {
    Fail(ErrorKind::kNotFound, "no subject rated both " + stimulus + " and its reference " + reference);
  }
  return FromSample(stimulus, diffs);
}

std::optional<std::string> ReferenceFor(const ScoreMatrix& scores, const std::string& stimulus) {
  const auto it = scores.stimuli().find(stimulus);
  if (it == scores.stimuli().end()) return std::nullopt;
  for (const auto& [id, s] : scores.stimuli()) {
    if (s.is_reference && s.content == it->second.content && id != stimulus) return id;
  }
  return std::nullopt;
}

ThresholdTable ReadThresholds(std::istream& in) {
  ThresholdTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto f = csv::SplitLine(line, line_no);
    if (line_no == 1 && !f.empty() && f[0] == "rate_id") continue;
    if (f.size() < 2 || f.size() > 3) {
      LineError(ErrorKind::kFormat, line_no, "expected rate_id,target_bpp[,threshold_bpp]");
    }
    RateTarget t;
    t.target_bpp = ParseDouble(f[1], line_no, "target_bpp");
    if (t.target_bpp <= 0.0) LineError(ErrorKind::kFormat, line_no, "target_bpp must be positive");
    if (f.size() == 3 && !f[2].empty()) {
      t.threshold_bpp = ParseDouble(f[2], line_no, "threshold_bpp");
      if (*t.threshold_bpp < 0.0) LineError(ErrorKind::kFormat, line_no, "threshold_bpp must be >= 0");
    }
    if (!table.emplace(f[0], t).second) LineError(ErrorKind::kFormat, line_no, "duplicate rate " + f[0]);
  }
  return table;
}

ThresholdTable ReadThresholds(const std::filesystem::path& path) {
  auto in = OpenIn(path);
  return ReadThresholds(in);
}

const PairCell& PairwiseMatrix::at(const std::string& row, const std::string& col) const {
  const auto r = std::find(codecs.begin(), codecs.end(), row);
  const auto c = std::find(codecs.begin(), codecs.end(), col);
  if (r == codecs.end() || c == codecs.end()) Fail(ErrorKind::kNotFound, "codec not in matrix");
  return cells[static_cast<std::size_t>(r - codecs.begin())][static_cast<std::size_t>(c - codecs.begin())];
}

PairwiseMatrix BuildPairwiseMatrix(const ScoreMatrix& scores, const std::string& rate_id,
                                   const ThresholdTable& thresholds, double alpha) {
  PairwiseMatrix matrix;
  matrix.rate_id = rate_id;
  // codec -> content -> stimulus id
  std::map<std::string, std::map<std::string, std::string>> at_rate;
  for (const auto& [id, s] : scores.stimuli()) {
    if (!s.is_reference && s.rate_id == rate_id) at_rate[s.codec][s.content] = id;
  }
  for (const auto& [codec, _] : at_rate) matrix.codecs.push_back(codec);
  const std::size_t k = matrix.codecs.size();
  matrix.cells.assign(k, std::vector<PairCell>(k));

  const auto target = thresholds.find(rate_id);
  auto usable = [&](const std::string& id) {
    const Stimulus& s = scores.stimuli().at(id);
    if (target != thresholds.end() &&
        !(std::abs(s.actual_bpp - target->second.target_bpp) <= target->second.threshold())) {
      return false;
    }
    return scores.ScoresOf(id).size() >= 2;
  };

  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      PairCell& cell = matrix.cells[i][j];
      for (const auto& [content, a_id] : at_rate[matrix.codecs[i]]) {
        const auto& other = at_rate[matrix.codecs[j]];
        const auto b = other.find(content);
        if (b == other.end() || !usable(a_id) || !usable(b->second)) continue;
        ++cell.m;
        if (i == j) continue;
        const auto va = scores.ScoresOf(a_id);
        const auto vb = scores.ScoresOf(b->second);
        if (stats::WelchTest(va, vb, alpha).verdict == stats::Verdict::kFirstBetter) ++cell.n;
      }
    }
  }
  return matrix;
}

std::vector<std::string> RatesByBitrate(const ScoreMatrix& scores, const ThresholdTable& thresholds) {
  std::map<std::string, std::vector<double>> bpp;
  for (const auto& [_, s] : scores.stimuli()) {
    if (!s.is_reference) bpp[s.rate_id].push_back(s.actual_bpp);
  }
  const bool by_target = std::all_of(bpp.begin(), bpp.end(), [&](const auto& kv) { return thresholds.contains(kv.first); });
  std::vector<std::pair<double, std::string>> order;
  for (const auto& [rate, v] : bpp) {
    order.emplace_back(by_target ? thresholds.at(rate).target_bpp : Mean(v), rate);
  }
  std::sort(order.begin(), order.end());
  std::vector<std::string> out;
  for (const auto& [_, rate] : order) out.push_back(rate);
  return out;
}

Analysis Analyze(const ScoreMatrix& scores, const AnalysisConfig& config) {
  Analysis a;
  if (config.screen && scores.subjects().size() >= 3) {
    a.screening = ScreenOutliers(scores);
  } else {
    a.screening.clean = scores;
    for (const auto& s : scores.subjects()) {
      SubjectScreening t;
      t.subject = s;
      a.screening.subjects.push_back(t);
    }
  }
  const ScoreMatrix& clean = a.screening.clean;
  for (const auto& [id, s] : clean.stimuli()) {
    if (clean.ScoresOf(id).empty()) continue;
    a.mos.push_back(Mos(clean, id));
    if (s.is_reference) continue;
    if (const auto ref = ReferenceFor(clean, id)) {
      try {
        a.dmos.push_back(Dmos(clean, id, *ref));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNotFound) throw;
      }
    }
  }
  auto rates = RatesByBitrate(clean, config.thresholds);
  if (config.exclude_lowest_rate && !rates.empty()) rates.erase(rates.begin());
  for (const auto& r : rates) a.matrices.push_back(BuildPairwiseMatrix(clean, r, config.thresholds, config.alpha));
  return a;
}

void ExportAnalysis(const Analysis& analysis, const ScoreMatrix& scores, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  auto opt = [](const std::optional<double>& v) { return v ? csv::Number(*v) : std::string(); };

  {
    const auto path = dir / "mos.csv";
    auto out = OpenOut(path);
    out << "stimulus_id,codec,content,rate_id,actual_bpp,is_reference,n,mos,ci95\n";
    for (const auto& r : analysis.mos) {
      const Stimulus& s = scores.stimuli().at(r.stimulus_id);
      out << csv::Join({r.stimulus_id, s.codec, s.content, s.rate_id, csv::Number(s.actual_bpp),
                        s.is_reference ? "1" : "0", std::to_string(r.n), csv::Number(r.mos), opt(r.ci95)})
          << '\n';
    }
    Close(out, path);
  }
  {
    const auto path = dir / "dmos.csv";
    auto out = OpenOut(path);
    out << "stimulus_id,codec,content,rate_id,actual_bpp,n,dmos,ci95\n";
    for (const auto& r : analysis.dmos) {
      const Stimulus& s = scores.stimuli().at(r.stimulus_id);
      out << csv::Join({r.stimulus_id, s.codec, s.content, s.rate_id, csv::Number(s.actual_bpp),
                        std::to_string(r.n), csv::Number(r.mos), opt(r.ci95)})
          << '\n';
    }
    Close(out, path);
  }
  {
    const auto path = dir / "pairwise.csv";
    auto out = OpenOut(path);
    out << "rate_id,row_codec,col_codec,n,m\n";
    for (const auto& m : analysis.matrices) {
      for (std::size_t i = 0; i < m.codecs.size(); ++i)
        for (std::size_t j = 0; j < m.codecs.size(); ++j)
          out << csv::Join({m.rate_id, m.codecs[i], m.codecs[j], std::to_string(m.cells[i][j].n),
                            std::to_string(m.cells[i][j].m)})
              << '\n';
    }
    Close(out, path);
  }
  {
    const auto path = dir / "outliers.csv";
    auto out = OpenOut(path);
    out << "subject_id,scored,above,below,rejected\n";
    for (const auto& t : analysis.screening.subjects) {
      out << csv::Join({t.subject, std::to_string(t.scored), std::to_string(t.above), std::to_string(t.below),
                        t.rejected ? "1" : "0"})
          << '\n';
    }
    Close(out, path);
  }
}

std::vector<MosResult> ReadMosCsv(const std::filesystem::path& path) {
  auto in = OpenIn(path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<MosResult> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) continue;
    if (line.empty()) continue;
    const auto f = csv::SplitLine(line, line_no);
    if (f.size() != 9) LineError(ErrorKind::kFormat, line_no, "expected 9 fields");
    MosResult r;
    r.stimulus_id = f[0];
    r.n = static_cast<std::size_t>(ParseInt(f[6], line_no, "n"));
    r.mos = ParseDouble(f[7], line_no, "mos");
    if (!f[8].empty()) r.ci95 = ParseDouble(f[8], line_no, "ci95");
    out.push_back(r);
  }
  return out;
}

}  // namespace caebench::subj

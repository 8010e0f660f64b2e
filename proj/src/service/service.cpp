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

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "caebench/error.hpp"
#include "caebench/service.hpp"
#include "caebench/subjstats.hpp"

namespace caebench::service {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxNonce = 200;
constexpr std::size_t kMaxLabel = 64;

[[noreturn]] void SysFail(const std::string& what) {
  Fail(ErrorKind::kIo, what + ": " + std::strerror(errno));
}

std::string NowUtc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[80];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

std::string NewToken() {
  std::random_device rd;
  std::string s;
  for (int i = 0; i < 4; ++i) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(rd()));
    s += buf;
  }
  return s;
}

}  // namespace

// Append-only JSON lines. A line counts once its newline is on disk; a torn
// tail left by a crash is cut off on open.
class RatingLog {
 public:
  explicit RatingLog(const std::filesystem::path& path) : path_(path) {
    const bool existed = std::filesystem::exists(path);
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) SysFail("cannot open " + path.string());
    if (!existed) SyncDir();
  }
  ~RatingLog() {
    if (fd_ >= 0) ::close(fd_);
  }

  std::vector<std::string> ReadAll() {
    std::ifstream in(path_, std::ios::binary);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto last = data.rfind('\n');
    const std::size_t keep = last == std::string::npos ? 0 : last + 1;
    if (keep != data.size()) {
      if (::ftruncate(fd_, static_cast<off_t>(keep)) != 0) SysFail("cannot trim " + path_.string());
      if (::fsync(fd_) != 0) SysFail("fsync " + path_.string());
      data.resize(keep);
    }
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < data.size()) {
      const auto end = data.find('\n', start);
      lines.push_back(data.substr(start, end - start));
      start = end + 1;
    }
    return lines;
  }

  void Append(const std::string& line) {
    const std::string buf = line + '\n';
    std::size_t done = 0;
    while (done < buf.size()) {
      const ssize_t n = ::write(fd_, buf.data() + done, buf.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        SysFail("append to " + path_.string());
      }
      done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) SysFail("fsync " + path_.string());
  }

 private:
  void SyncDir() {
    const int dir = ::open(path_.parent_path().c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (dir < 0) return;
    ::fsync(dir);
    ::close(dir);
  }

  std::filesystem::path path_;
  int fd_ = -1;
};

EvalService::EvalService(const ServiceConfig& config) : config_(config) {
  design_ = session::ReadDesign(config.design_dir, config.media_root);
  std::filesystem::create_directories(config.state_dir);
  log_ = std::make_unique<RatingLog>(config.state_dir / kLogFile);
  Replay();
}

EvalService::~EvalService() = default;

void EvalService::Replay() {
  const auto lines = log_->ReadAll();
  for (std::size_t i = 0; i < lines.size(); ++i) Apply(lines[i], i + 1);
}

void EvalService::Apply(const std::string& line, std::size_t line_no) {
  auto bad = [&](const std::string& what) -> void {
    Fail(ErrorKind::kFormat, std::string(kLogFile) + " line " + std::to_string(line_no) + ": " + what);
  };
  json j;
  try {
    j = json::parse(line);
    const auto type = j.at("type").get<std::string>();
    if (type == "session") {
      Session s;
      s.id = j.at("session_id").get<std::string>();
      s.subject = j.at("subject_id").get<std::string>();
      s.label = j.at("session").get<std::string>();
      s.stimuli = j.at("stimuli").get<std::vector<std::string>>();
      if (sessions_.count(s.id) || by_subject_.count({s.subject, s.label})) bad("duplicate session");
      for (const auto& id : s.stimuli)
        if (!design_.inventory.Find(id)) bad("unknown stimulus " + id);
      by_subject_[{s.subject, s.label}] = s.id;
      sessions_.emplace(s.id, std::move(s));
    } else if (type == "rating") {
      const auto sid = j.at("session_id").get<std::string>();
      auto it = sessions_.find(sid);
      if (it == sessions_.end()) bad("rating for unknown session");
      Session& s = it->second;
      Record r{j.at("stimulus_id").get<std::string>(), j.at("score").get<int>(), j.at("nonce").get<std::string>()};
      if (s.records.size() >= s.stimuli.size() || s.stimuli[s.records.size()] != r.stimulus_id) bad("rating out of order");
      if (r.score < 1 || r.score > 5 || s.nonces.count(r.nonce)) bad("invalid rating");
      if (!rated_[s.subject].insert(r.stimulus_id).second) bad("second rating of one stimulus");
      s.nonces[r.nonce] = s.records.size();
      s.records.push_back(std::move(r));
    } else {
      bad("unknown record type");
    }
  } catch (const json::exception& e) {
    bad(e.what());
  }
}

std::vector<std::string> EvalService::ValidateStimuli(const std::string& subject,
                                                      const std::vector<std::string>& ids) const {
  if (ids.empty()) Fail(ErrorKind::kInvalidArgument, "session has no stimuli");
  std::set<std::string> seen;
  std::set<std::string> taken;
  for (const auto& [key, sid] : by_subject_) {
    if (key.first != subject) continue;
    const auto& other = sessions_.at(sid).stimuli;
    taken.insert(other.begin(), other.end());
  }
  for (const auto& id : ids) {
    if (!design_.inventory.Find(id)) Fail(ErrorKind::kInvalidArgument, "unknown stimulus " + id);
    if (!seen.insert(id).second) Fail(ErrorKind::kInvalidArgument, "stimulus " + id + " listed twice");
    if (taken.count(id)) Fail(ErrorKind::kConflict, "stimulus " + id + " already belongs to another session of " + subject);
  }
  return ids;
}

CreatedSession EvalService::CreateSession(const std::string& subject, const std::string& label,
                                          const std::optional<std::vector<std::string>>& stimuli) {
  if (subject.empty() || label.empty() || label.size() > kMaxLabel) {
    Fail(ErrorKind::kInvalidArgument, "subject_id and session are required");
  }
  std::unique_lock lock(mu_);
  if (by_subject_.count({subject, label})) {
    Fail(ErrorKind::kConflict, "subject " + subject + " already has session " + label);
  }
  std::vector<std::string> ids;
  if (stimuli) {
    ids = ValidateStimuli(subject, *stimuli);
  } else {
    const session::SessionPlan* plan = nullptr;
    for (const auto& p : design_.plans)
      if (p.subject == subject) plan = &p;
    if (!plan) Fail(ErrorKind::kNotFound, "no plan for subject " + subject);
    if (label == "training") ids = plan->training;
    else if (label == "1") ids = plan->sessions[0];
    else if (label == "2") ids = plan->sessions[1];
    else Fail(ErrorKind::kInvalidArgument, "session must be training, 1 or 2");
    ids = ValidateStimuli(subject, ids);
  }
  Session s;
  do s.id = NewToken();
  while (sessions_.count(s.id));
  s.subject = subject;
  s.label = label;
  s.stimuli = std::move(ids);
  const json rec = {{"type", "session"}, {"session_id", s.id}, {"subject_id", subject}, {"session", label},
                    {"stimuli", s.stimuli}, {"time", NowUtc()}};
  log_->Append(rec.dump());
  CreatedSession out{s.id, s.stimuli.size()};
  by_subject_[{subject, label}] = s.id;
  sessions_.emplace(s.id, std::move(s));
  return out;
}

std::optional<std::string> EvalService::FindSession(const std::string& subject, const std::string& label) const {
  std::shared_lock lock(mu_);
  const auto it = by_subject_.find({subject, label});
  if (it == by_subject_.end()) return std::nullopt;
  return it->second;
}

EvalService::Session& EvalService::Get(const std::string& id) {
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) Fail(ErrorKind::kNotFound, "unknown session");
  return it->second;
}

const EvalService::Session& EvalService::Get(const std::string& id) const {
  return const_cast<EvalService*>(this)->Get(id);
}

StimulusDescriptor EvalService::Next(const std::string& session_id) const {
  std::shared_lock lock(mu_);
  const Session& s = Get(session_id);
  StimulusDescriptor d;
  d.total = s.stimuli.size();
  if (s.records.size() == s.stimuli.size()) {
    d.done = true;
    d.position = d.total;
    return d;
  }
  d.stimulus_id = s.stimuli[s.records.size()];
  d.media_url = "/media/" + d.stimulus_id;
  d.position = s.records.size() + 1;
  d.training = design_.inventory.Find(d.stimulus_id)->is_training;
  return d;
}

RatingAck EvalService::Submit(const std::string& session_id, const std::string& stimulus_id, int score,
                              const std::string& nonce) {
  if (score < 1 || score > 5) Fail(ErrorKind::kInvalidArgument, "score must be an integer from 1 to 5");
  if (nonce.empty() || nonce.size() > kMaxNonce) Fail(ErrorKind::kInvalidArgument, "nonce must hold 1 to 200 characters");
  std::unique_lock lock(mu_);
  Session& s = Get(session_id);
  auto ack = [&](bool duplicate) {
    return RatingAck{duplicate, s.records.size(), s.stimuli.size(), s.records.size() == s.stimuli.size()};
  };
  if (const auto seen = s.nonces.find(nonce); seen != s.nonces.end()) {
    const Record& r = s.records[seen->second];
    if (r.stimulus_id == stimulus_id && r.score == score) return ack(true);
    Fail(ErrorKind::kConflict, "nonce already used for a different rating");
  }
  if (s.records.size() == s.stimuli.size()) Fail(ErrorKind::kConflict, "session already complete");
  if (s.stimuli[s.records.size()] != stimulus_id) {
    Fail(ErrorKind::kConflict, "stimulus " + stimulus_id + " is not the current one");
  }
  if (rated_[s.subject].count(stimulus_id)) Fail(ErrorKind::kConflict, "stimulus already rated by this subject");
  const json rec = {{"type", "rating"}, {"session_id", s.id}, {"subject_id", s.subject}, {"stimulus_id", stimulus_id},
                    {"score", score}, {"nonce", nonce}, {"time", NowUtc()}};
  log_->Append(rec.dump());
  rated_[s.subject].insert(stimulus_id);
  s.nonces[nonce] = s.records.size();
  s.records.push_back({stimulus_id, score, nonce});
  return ack(false);
}

void EvalService::ExportCsv(std::ostream& out, const std::optional<std::string>& subject) const {
  std::shared_lock lock(mu_);
  subj::ScoreMatrix m;
  for (const auto& [_, s] : sessions_) {
    if (subject && s.subject != *subject) continue;
    for (const auto& r : s.records) {
      const session::InventoryItem* item = design_.inventory.Find(r.stimulus_id);
      if (item->is_training) continue;
      m.AddStimulus({item->id, item->codec, item->content, item->rate_id, item->actual_bpp, item->is_reference});
      m.AddRating(s.subject, r.stimulus_id, r.score);
    }
  }
  m.WriteCsv(out);
}

std::filesystem::path EvalService::MediaPath(const std::string& stimulus_id) const {
  const session::InventoryItem* item = design_.inventory.Find(stimulus_id);
  if (!item) Fail(ErrorKind::kNotFound, "unknown stimulus");
  return config_.media_root / item->media;
}

std::size_t EvalService::rating_count() const {
  std::shared_lock lock(mu_);
  std::size_t n = 0;
  for (const auto& [_, s] : sessions_) n += s.records.size();
  return n;
}

}  // namespace caebench::service

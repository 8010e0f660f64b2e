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

#ifndef CAEBENCH_SERVICE_HPP_
#define CAEBENCH_SERVICE_HPP_

// Rating collection for live ACR-HR sessions. Every accepted rating is
// appended to a JSON-lines log and fsync'ed before it is acknowledged;
// restarting replays the log, so sessions resume where they stopped.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "caebench/session.hpp"

namespace caebench::service {

struct ServiceConfig {
  std::filesystem::path design_dir;  // manifest.csv + plan.csv
  std::filesystem::path media_root;
  std::filesystem::path state_dir;   // ratings.jsonl lives here
};

struct StimulusDescriptor {
  bool done = false;
  std::string stimulus_id;  // opaque; empty when done
  std::string media_url;
  std::size_t position = 0;  // 1-based index of this stimulus
  std::size_t total = 0;
  bool training = false;
};

struct RatingAck {
  bool duplicate = false;  // nonce seen before; nothing new was stored
  std::size_t rated = 0;
  std::size_t total = 0;
  bool done = false;
};

struct CreatedSession {
  std::string session_id;
  std::size_t total = 0;
};

inline constexpr const char* kLogFile = "ratings.jsonl";

class RatingLog;

class EvalService {
 public:
  explicit EvalService(const ServiceConfig& config);
  ~EvalService();
  EvalService(const EvalService&) = delete;
  EvalService& operator=(const EvalService&) = delete;

  // `label` is "training", "1" or "2". Without `stimuli` the order comes
  // from the loaded plan for (subject, label). kConflict if that pair
  // already has a session; FindSession then returns it.
  CreatedSession CreateSession(const std::string& subject, const std::string& label,
                               const std::optional<std::vector<std::string>>& stimuli = std::nullopt);
  std::optional<std::string> FindSession(const std::string& subject, const std::string& label) const;

  // kNotFound for an unknown session. Never advances the cursor.
  StimulusDescriptor Next(const std::string& session_id) const;

  // kInvalidArgument: score outside 1..5 or empty nonce. kConflict: not the
  // current stimulus, session finished, or the nonce was used for a
  // different rating. A repeated nonce with identical content is acked
  // again without storing anything.
  RatingAck Submit(const std::string& session_id, const std::string& stimulus_id, int score,
                   const std::string& nonce);

  // Score CSV of the non-training ratings, optionally for one subject.
  void ExportCsv(std::ostream& out, const std::optional<std::string>& subject = std::nullopt) const;

  // Absolute media path for a stimulus id; kNotFound otherwise.
  std::filesystem::path MediaPath(const std::string& stimulus_id) const;

  std::size_t rating_count() const;

 private:
  struct Record {
    std::string stimulus_id;
    int score = 0;
    std::string nonce;
  };
  struct Session {
    std::string id;
    std::string subject;
    std::string label;
    std::vector<std::string> stimuli;
    std::vector<Record> records;  // in presentation order
    std::map<std::string, std::size_t> nonces;
  };

  void Replay();
  void Apply(const std::string& line, std::size_t line_no);
  std::vector<std::string> ValidateStimuli(const std::string& subject, const std::vector<std::string>& ids) const;
  Session& Get(const std::string& id);
  const Session& Get(const std::string& id) const;

  ServiceConfig config_;
  session::Design design_;
  std::unique_ptr<RatingLog> log_;
  mutable std::shared_mutex mu_;
  std::map<std::string, Session> sessions_;
  std::map<std::pair<std::string, std::string>, std::string> by_subject_;  // (subject, label) -> id
  std::map<std::string, std::set<std::string>> rated_;  // subject -> stimuli
};

// HTTP front end. Routes:
//   POST /sessions                   {"subject_id", "session", ["stimuli"]}
//   GET  /sessions/{id}/next
//   POST /sessions/{id}/ratings      {"stimulus_id", "score", "nonce"}
//   GET  /export?format=csv[&subject=...]
//   GET  /media/{stimulus_id}
//   GET  /healthz
class HttpServer {
 public:
  explicit HttpServer(EvalService& service, const std::filesystem::path& static_dir = {});
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port.
  int Bind(const std::string& host, int port);
  // Blocks until Stop().
  void Listen();
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace caebench::service

#endif  // CAEBENCH_SERVICE_HPP_

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

#include <httplib.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "caebench/error.hpp"
#include "caebench/service.hpp"

namespace caebench::service {

using nlohmann::json;

namespace {

int StatusFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kFormat:
      return 400;
    case ErrorKind::kNotFound:
      return 404;
    case ErrorKind::kConflict:
      return 409;
    default:
      return 500;
  }
}

void NoCache(httplib::Response& res) {
  res.set_header("Cache-Control", "no-store, no-cache, must-revalidate, max-age=0");
  res.set_header("Pragma", "no-cache");
  res.set_header("Expires", "0");
}

void SendJson(httplib::Response& res, int status, const json& body) {
  res.status = status;
  NoCache(res);
  res.set_content(body.dump(), "application/json");
}

void SendError(httplib::Response& res, int status, const std::string& what, json extra = json::object()) {
  extra["error"] = what;
  SendJson(res, status, extra);
}

json ParseBody(const httplib::Request& req) {
  json j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) Fail(ErrorKind::kInvalidArgument, "body must be a JSON object");
  return j;
}

std::string StringField(const json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end() || !it->is_string()) Fail(ErrorKind::kInvalidArgument, std::string(name) + " must be a string");
  return it->get<std::string>();
}

const char* MediaType(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".ppm") return "image/x-portable-pixmap";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  return "application/octet-stream";
}

template <class F>
httplib::Server::Handler Guard(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      SendError(res, StatusFor(e.kind()), e.what());
    } catch (const std::exception& e) {
      SendError(res, 500, e.what());
    }
  };
}

}  // namespace

struct HttpServer::Impl {
  EvalService& service;
  httplib::Server server;
  explicit Impl(EvalService& s) : service(s) {}
};

HttpServer::HttpServer(EvalService& service, const std::filesystem::path& static_dir)
    : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  EvalService& svc = service;

  srv.Post("/sessions", Guard([&svc](const httplib::Request& req, httplib::Response& res) {
             const json body = ParseBody(req);
             const std::string subject = StringField(body, "subject_id");
             const std::string label = StringField(body, "session");
             std::optional<std::vector<std::string>> stimuli;
             if (const auto it = body.find("stimuli"); it != body.end()) {
               if (!it->is_array()) Fail(ErrorKind::kInvalidArgument, "stimuli must be an array of ids");
               stimuli.emplace();
               for (const auto& v : *it) {
                 if (!v.is_string()) Fail(ErrorKind::kInvalidArgument, "stimuli must be an array of ids");
                 stimuli->push_back(v.get<std::string>());
               }
             }
             try {
               const CreatedSession c = svc.CreateSession(subject, label, stimuli);
               SendJson(res, 201, {{"session_id", c.session_id}, {"total", c.total}});
             } catch (const Error& e) {
               if (e.kind() != ErrorKind::kConflict) throw;
               json extra = json::object();
               if (const auto existing = svc.FindSession(subject, label)) extra["session_id"] = *existing;
               SendError(res, 409, e.what(), extra);
             }
           }));

  srv.Get(R"(/sessions/([0-9a-f]+)/next)", Guard([&svc](const httplib::Request& req, httplib::Response& res) {
            const StimulusDescriptor d = svc.Next(req.matches[1]);
            json body = {{"done", d.done}, {"position", d.position}, {"total", d.total}};
            if (!d.done) {
              body["stimulus_id"] = d.stimulus_id;
              body["media_url"] = d.media_url;
              body["training"] = d.training;
            }
            SendJson(res, 200, body);
          }));

  srv.Post(R"(/sessions/([0-9a-f]+)/ratings)", Guard([&svc](const httplib::Request& req, httplib::Response& res) {
             const json body = ParseBody(req);
             const std::string stimulus = StringField(body, "stimulus_id");
             const std::string nonce = StringField(body, "nonce");
             const auto score = body.find("score");
             if (score == body.end() || !score->is_number_integer()) {
               Fail(ErrorKind::kInvalidArgument, "score must be an integer from 1 to 5");
             }
             const long long v = score->get<long long>();
             const int clipped = (v < 1 || v > 5) ? 0 : static_cast<int>(v);
             const RatingAck ack = svc.Submit(req.matches[1], stimulus, clipped, nonce);
             SendJson(res, 200, {{"accepted", true}, {"duplicate", ack.duplicate}, {"rated", ack.rated},
                                 {"total", ack.total}, {"done", ack.done}});
           }));

  srv.Get("/export", Guard([&svc](const httplib::Request& req, httplib::Response& res) {
            const std::string format = req.has_param("format") ? req.get_param_value("format") : "csv";
            if (format != "csv") Fail(ErrorKind::kInvalidArgument, "only format=csv is supported");
            std::optional<std::string> subject;
            if (req.has_param("subject")) subject = req.get_param_value("subject");
            std::ostringstream out;
            svc.ExportCsv(out, subject);
            NoCache(res);
            res.set_content(out.str(), "text/csv; charset=utf-8");
          }));

  srv.Get(R"(/media/([A-Za-z0-9_-]+))", Guard([&svc](const httplib::Request& req, httplib::Response& res) {
            const auto path = svc.MediaPath(req.matches[1]);
            std::error_code ec;
            const auto size = std::filesystem::file_size(path, ec);
            if (ec) Fail(ErrorKind::kNotFound, "media unavailable");
            auto file = std::make_shared<std::ifstream>(path, std::ios::binary);
            if (!*file) Fail(ErrorKind::kNotFound, "media unavailable");
            NoCache(res);
            res.set_content_provider(static_cast<std::size_t>(size), MediaType(path),
                                     [file](std::size_t offset, std::size_t length, httplib::DataSink& sink) {
                                       char buf[64 * 1024];
                                       file->clear();
                                       file->seekg(static_cast<std::streamoff>(offset));
                                       file->read(buf, static_cast<std::streamsize>(std::min(length, sizeof buf)));
                                       const auto n = file->gcount();
                                       if (n <= 0) return false;
                                       sink.write(buf, static_cast<std::size_t>(n));
                                       return true;
                                     });
          }));

  srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { SendJson(res, 200, {{"ok", true}}); });

  if (!static_dir.empty() && !srv.set_mount_point("/", static_dir.string())) {
    Fail(ErrorKind::kIo, "cannot serve " + static_dir.string());
  }
}

HttpServer::~HttpServer() { Stop(); }

int HttpServer::Bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    const int bound = srv.bind_to_any_port(host);
    if (bound < 0) Fail(ErrorKind::kIo, "cannot bind " + host);
    return bound;
  }
  if (!srv.bind_to_port(host, port)) Fail(ErrorKind::kIo, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::Listen() { impl_->server.listen_after_bind(); }

void HttpServer::Stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace caebench::service

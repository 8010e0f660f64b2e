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

#include "caebench/caebench.h"

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "caebench/bitstream.hpp"
#include "caebench/error.hpp"
#include "caebench/image.hpp"
#include "caebench/metrics.hpp"
#include "caebench/model.hpp"
#include "caebench/service.hpp"
#include "caebench/session.hpp"
#include "caebench/subjstats.hpp"
#include "caebench/train.hpp"
#include "common/csv.hpp"

struct cae_model {
  caebench::codec::CodecModel model;
};

struct cae_service {
  std::unique_ptr<caebench::service::EvalService> service;
  std::unique_ptr<caebench::service::HttpServer> http;
};

namespace {

using caebench::Error;
using caebench::ErrorKind;
using caebench::Fail;

thread_local std::string g_last_error;

cae_status ToStatus(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return CAE_ERR_INVALID_ARGUMENT;
    case ErrorKind::kShape: return CAE_ERR_SHAPE;
    case ErrorKind::kFormat: return CAE_ERR_FORMAT;
    case ErrorKind::kIo: return CAE_ERR_IO;
    case ErrorKind::kNumeric: return CAE_ERR_NUMERIC;
    case ErrorKind::kInfeasible: return CAE_ERR_INFEASIBLE;
    case ErrorKind::kModelMismatch: return CAE_ERR_MODEL_MISMATCH;
    case ErrorKind::kNotFound: return CAE_ERR_NOT_FOUND;
    case ErrorKind::kConflict: return CAE_ERR_CONFLICT;
  }
  return CAE_ERR_INTERNAL;
}

// Runs f, converting every exception into a status and a message.
template <class F>
cae_status Call(F&& f) {
  try {
    f();
    g_last_error.clear();
    return CAE_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return ToStatus(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return CAE_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return CAE_ERR_INTERNAL;
}

void Require(bool ok, const char* what) {
  if (!ok) Fail(ErrorKind::kInvalidArgument, what);
}

std::vector<std::uint8_t> ReadBytes(const char* path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, std::string("cannot open ") + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteBytes(const char* path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, std::string("cannot write ") + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorKind::kIo, std::string("write failed: ") + path);
}

cae_stream_info Info(const caebench::codec::BitstreamHeader& h, std::uint64_t bytes) {
  cae_stream_info s{};
  s.width = h.width;
  s.height = h.height;
  s.tile_size = h.tile_size;
  s.overlap = h.overlap;
  s.tiles = h.tile_count;
  s.latent_channels = h.latent_channels;
  s.model_hash = h.model_hash;
  s.bytes = bytes;
  s.bits_per_pixel = 8.0 * static_cast<double>(bytes) / (static_cast<double>(h.width) * h.height);
  return s;
}

caebench::codec::Distortion ToDistortion(cae_metric m) {
  if (m == CAE_METRIC_MSE) return caebench::codec::Distortion::kMse;
  if (m == CAE_METRIC_MSSSIM) return caebench::codec::Distortion::kMsSsim;
  Fail(ErrorKind::kInvalidArgument, "unknown metric");
}

std::vector<std::string> Strings(const char* const* items, std::size_t n, const char* what) {
  Require(n == 0 || items != nullptr, what);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    Require(items[i] != nullptr, what);
    out.emplace_back(items[i]);
  }
  return out;
}

}  // namespace

extern "C" {

const char* cae_version(void) { return "1.0.0"; }

const char* cae_status_name(cae_status s) {
  switch (s) {
    case CAE_OK: return "ok";
    case CAE_ERR_INVALID_ARGUMENT: return "invalid argument";
    case CAE_ERR_SHAPE: return "shape error";
    case CAE_ERR_FORMAT: return "format error";
    case CAE_ERR_IO: return "i/o error";
    case CAE_ERR_NUMERIC: return "numeric error";
    case CAE_ERR_INFEASIBLE: return "infeasible";
    case CAE_ERR_MODEL_MISMATCH: return "model mismatch";
    case CAE_ERR_NOT_FOUND: return "not found";
    case CAE_ERR_CONFLICT: return "conflict";
    case CAE_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* cae_last_error(void) { return g_last_error.c_str(); }

cae_status cae_model_create(uint32_t units, uint32_t filters, uint32_t latent_channels, uint64_t seed,
                            cae_model** out) {
  return Call([&] {
    Require(out != nullptr, "null output handle");
    Require(units >= 1 && units <= 8 && filters >= 1 && latent_channels >= 1 && latent_channels <= 65535,
            "architecture out of range");
    *out = new cae_model{caebench::codec::CodecModel::Create({units, filters, latent_channels}, seed)};
  });
}

cae_status cae_model_load(const char* path, cae_model** out) {
  return Call([&] {
    Require(path && out, "null argument");
    *out = new cae_model{caebench::codec::CodecModel::Load(path)};
  });
}

cae_status cae_model_save(const cae_model* model, const char* path) {
  return Call([&] {
    Require(model && path, "null argument");
    model->model.Save(path);
  });
}

cae_status cae_model_get_info(const cae_model* model, cae_model_info* info) {
  return Call([&] {
    Require(model && info, "null argument");
    const auto& a = model->model.arch();
    info->units = static_cast<uint32_t>(a.units);
    info->filters = static_cast<uint32_t>(a.filters);
    info->latent_channels = static_cast<uint32_t>(a.latent_channels);
    info->downscale = static_cast<uint32_t>(a.downscale());
    info->hash = model->model.Hash();
    info->lambda = model->model.meta().lambda;
    info->metric = model->model.meta().distortion == caebench::codec::Distortion::kMse ? CAE_METRIC_MSE : CAE_METRIC_MSSSIM;
    info->iterations = model->model.meta().iterations;
  });
}

void cae_model_free(cae_model* model) { delete model; }

void cae_train_config_default(cae_train_config* c) {
  if (!c) return;
  const caebench::codec::TrainConfig d;
  c->lambda = d.lambda;
  c->metric = CAE_METRIC_MSE;
  c->iterations = d.iterations;
  c->batch = static_cast<uint32_t>(d.batch);
  c->learning_rate = d.learning_rate;
  c->crop = static_cast<uint32_t>(d.crop);
  c->seed = d.seed;
}

cae_status cae_train(const cae_model* initial, const char* const* image_paths, size_t image_count,
                     const cae_train_config* config, const char* loss_csv, cae_train_callback callback, void* user,
                     cae_model** out, cae_train_report* report) {
  return Call([&] {
    Require(initial && config && out, "null argument");
    Require(image_count > 0, "no training images");
    std::vector<caebench::Image> images;
    for (const auto& p : Strings(image_paths, image_count, "null image path")) images.push_back(caebench::ReadImage(p));
    caebench::codec::TrainConfig tc;
    tc.lambda = config->lambda;
    tc.distortion = ToDistortion(config->metric);
    tc.iterations = config->iterations;
    tc.batch = config->batch;
    tc.learning_rate = config->learning_rate;
    tc.crop = config->crop;
    tc.seed = config->seed;

    std::ofstream csv_out;
    if (loss_csv) {
      csv_out.open(loss_csv, std::ios::trunc);
      if (!csv_out) Fail(ErrorKind::kIo, std::string("cannot write ") + loss_csv);
      csv_out << "iteration,loss,distortion,rate_bits,bits_per_pixel\n";
    }
    auto on_step = [&](const caebench::codec::LossLogEntry& e) {
      if (csv_out.is_open()) {
        csv_out << e.iteration << ',' << caebench::csv::Number(e.report.loss) << ','
                << caebench::csv::Number(e.report.distortion) << ',' << caebench::csv::Number(e.report.rate_bits) << ','
                << caebench::csv::Number(e.report.bits_per_pixel) << '\n';
      }
      if (callback) callback(e.iteration, e.report.loss, e.report.distortion, e.report.bits_per_pixel, user);
    };
    auto result = caebench::codec::Train(initial->model, images, tc, on_step);
    if (csv_out.is_open() && !csv_out.flush()) Fail(ErrorKind::kIo, std::string("write failed: ") + loss_csv);
    if (report) {
      report->iterations_run = result.log.size();
      report->skipped_steps = result.skipped_steps;
      report->aborted = result.aborted ? 1 : 0;
      report->final_loss = result.log.empty() ? std::numeric_limits<double>::quiet_NaN() : result.log.back().report.loss;
    }
    *out = new cae_model{std::move(result.model)};
  });
}

void cae_encode_options_default(cae_encode_options* o) {
  if (!o) return;
  o->tile_size = 256;
  o->overlap = 0;
  o->threads = 0;
}

cae_status cae_encode_file(const cae_model* model, const char* image_path, const char* stream_path,
                           const cae_encode_options* options, cae_encode_report* report) {
  return Call([&] {
    Require(model && image_path && stream_path, "null argument");
    cae_encode_options o;
    cae_encode_options_default(&o);
    if (options) o = *options;
    const caebench::Image image = caebench::ReadImage(image_path);
    const auto r = caebench::codec::EncodeImage(model->model, image, {o.tile_size, o.overlap, o.threads});
    WriteBytes(stream_path, r.bytes);
    if (report) {
      report->stream = Info(r.header, r.bytes.size());
      report->payload_bits = r.payload_bits;
      report->estimated_bits = r.estimated_bits;
    }
  });
}

cae_status cae_decode_file(const cae_model* model, const char* stream_path, const char* image_path, uint32_t threads,
                           int abut, cae_stream_info* info) {
  return Call([&] {
    Require(model && stream_path && image_path, "null argument");
    const auto bytes = ReadBytes(stream_path);
    caebench::codec::DecodeOptions o;
    o.mode = abut ? caebench::tiling::StitchMode::kAbut : caebench::tiling::StitchMode::kOverlapBlend;
    o.threads = threads;
    const caebench::Image image = caebench::codec::DecodeImage(model->model, bytes, o);
    caebench::WriteImage(image, image_path);
    if (info) *info = Info(caebench::codec::ReadHeader(bytes), bytes.size());
  });
}

cae_status cae_stream_info_read(const char* stream_path, cae_stream_info* info) {
  return Call([&] {
    Require(stream_path && info, "null argument");
    const auto bytes = ReadBytes(stream_path);
    *info = Info(caebench::codec::ReadHeader(bytes), bytes.size());
  });
}

cae_status cae_metrics_files(const char* reference_path, const char* distorted_path, const char* stream_path,
                             cae_quality* quality) {
  return Call([&] {
    Require(reference_path && distorted_path && quality, "null argument");
    const caebench::Image ref = caebench::ReadImage(reference_path);
    const caebench::Image dist = caebench::ReadImage(distorted_path);
    const auto q = caebench::metrics::Evaluate(ref, dist);
    *quality = cae_quality{};
    quality->identical = q.psnr.identical() ? 1 : 0;
    quality->psnr_db = q.psnr.db.value_or(std::numeric_limits<double>::infinity());
    for (int c = 0; c < 3; ++c) quality->channel_mse[c] = q.psnr.channel_mse[c];
    quality->ms_ssim = q.ms_ssim;
    if (stream_path) {
      std::error_code ec;
      const auto size = std::filesystem::file_size(stream_path, ec);
      if (ec) Fail(ErrorKind::kIo, std::string("cannot stat ") + stream_path);
      quality->has_bits_per_pixel = 1;
      quality->bits_per_pixel = 8.0 * static_cast<double>(size) / (static_cast<double>(ref.width) * ref.height);
    }
  });
}

void cae_analyze_options_default(cae_analyze_options* o) {
  if (!o) return;
  o->thresholds_path = nullptr;
  o->include_lowest_rate = 0;
  o->skip_screening = 0;
  o->alpha = 0.05;
}

cae_status cae_analyze(const char* scores_csv, const cae_analyze_options* options, const char* out_dir,
                       cae_analyze_report* report) {
  return Call([&] {
    Require(scores_csv && out_dir, "null argument");
    cae_analyze_options o;
    cae_analyze_options_default(&o);
    if (options) o = *options;
    Require(o.alpha > 0 && o.alpha < 1, "alpha must lie in (0, 1)");
    const auto scores = caebench::subj::ScoreMatrix::ReadCsv(std::filesystem::path(scores_csv));
    caebench::subj::AnalysisConfig cfg;
    if (o.thresholds_path) cfg.thresholds = caebench::subj::ReadThresholds(std::filesystem::path(o.thresholds_path));
    cfg.exclude_lowest_rate = !o.include_lowest_rate;
    cfg.screen = !o.skip_screening;
    cfg.alpha = o.alpha;
    const auto analysis = caebench::subj::Analyze(scores, cfg);
    caebench::subj::ExportAnalysis(analysis, scores, out_dir);
    if (report) {
      report->subjects = scores.subjects().size();
      report->rejected_subjects = analysis.screening.rejected.size();
      report->stimuli = scores.stimuli().size();
      report->ratings = scores.rating_count();
      report->matrices = analysis.matrices.size();
    }
  });
}

cae_status cae_session_design(const cae_design_config* config, const char* out_dir, cae_design_report* report) {
  return Call([&] {
    Require(config && out_dir && config->media_root, "null argument");
    caebench::session::DesignConfig d;
    d.inventory.codecs = Strings(config->codecs, config->codec_count, "null codec");
    d.inventory.contents = Strings(config->contents, config->content_count, "null content");
    d.inventory.rates = Strings(config->rates, config->rate_count, "null rate");
    d.inventory.media_root = config->media_root;
    d.inventory.include_references = config->include_references != 0;
    d.inventory.training = config->training != 0;
    if (config->training_content) d.inventory.training_content = config->training_content;
    d.inventory.seed = config->seed;
    d.subjects = Strings(config->subjects, config->subject_count, "null subject");
    d.seed = config->seed;
    const auto design = caebench::session::MakeDesign(d);
    caebench::session::WriteDesign(design, out_dir);
    if (report) {
      report->coded = design.inventory.coded_count();
      report->references = design.inventory.reference_count();
      report->training = design.inventory.training.size();
      report->subjects = design.plans.size();
      report->session_sizes[0] = design.plans.front().sessions[0].size();
      report->session_sizes[1] = design.plans.front().sessions[1].size();
    }
  });
}

cae_status cae_service_open(const char* design_dir, const char* media_root, const char* state_dir,
                            const char* static_dir, cae_service** out) {
  return Call([&] {
    Require(design_dir && media_root && state_dir && out, "null argument");
    auto s = std::make_unique<cae_service>();
    s->service = std::make_unique<caebench::service::EvalService>(
        caebench::service::ServiceConfig{design_dir, media_root, state_dir});
    s->http = std::make_unique<caebench::service::HttpServer>(*s->service,
                                                              static_dir ? std::filesystem::path(static_dir) : "");
    *out = s.release();
  });
}

cae_status cae_service_bind(cae_service* service, const char* host, int port, int* bound_port) {
  return Call([&] {
    Require(service && host, "null argument");
    Require(port >= 0 && port <= 65535, "port out of range");
    const int p = service->http->Bind(host, port);
    if (bound_port) *bound_port = p;
  });
}

cae_status cae_service_run(cae_service* service) {
  return Call([&] {
    Require(service != nullptr, "null argument");
    service->http->Listen();
  });
}

void cae_service_stop(cae_service* service) {
  if (service) service->http->Stop();
}

size_t cae_service_rating_count(const cae_service* service) {
  return service ? service->service->rating_count() : 0;
}

void cae_service_free(cae_service* service) { delete service; }

}  // extern "C"

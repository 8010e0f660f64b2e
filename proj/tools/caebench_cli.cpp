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

// caebench command-line tool. Talks to the core exclusively through the C
// API in caebench/caebench.h.

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <pthread.h>
#include <string>
#include <thread>
#include <vector>

#include "caebench/caebench.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct Failure {
  int code;
  std::string message;
};

// Throws on failure so every subcommand can be written straight-line.
void Check(cae_status s, const std::string& context) {
  if (s == CAE_OK) return;
  const int code = (s == CAE_ERR_INTERNAL || s == CAE_ERR_NUMERIC) ? kExitInternal : kExitData;
  throw Failure{code, context + ": " + cae_status_name(s) + ": " + cae_last_error()};
}

struct ModelHandle {
  cae_model* ptr = nullptr;
  ~ModelHandle() { cae_model_free(ptr); }
};

std::vector<const char*> CStrings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string data;
  double lambda = 0.0;
  std::string metric = "mse";
  std::uint64_t iters = 1000;
  std::uint32_t batch = 16;
  double lr = 1e-4;
  std::uint32_t crop = 128;
  std::uint64_t seed = 0;
  std::string out;
  std::string loss_csv;
  std::string init;
  std::uint32_t units = 3;
  std::uint32_t filters = 128;
  std::uint32_t latent = 48;
  std::uint64_t log_every = 100;
};

int RunTrain(const TrainArgs& a) {
  std::vector<std::string> images;
  if (!fs::is_directory(a.data)) throw Failure{kExitData, "--data: not a directory: " + a.data};
  for (const auto& e : fs::directory_iterator(a.data)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".png" || ext == ".ppm")) images.push_back(e.path().string());
  }
  std::sort(images.begin(), images.end());
  if (images.empty()) throw Failure{kExitData, "--data: no .png or .ppm images in " + a.data};

  ModelHandle init, trained;
  if (!a.init.empty()) Check(cae_model_load(a.init.c_str(), &init.ptr), "loading " + a.init);
  else Check(cae_model_create(a.units, a.filters, a.latent, a.seed, &init.ptr), "creating model");

  cae_train_config cfg;
  cae_train_config_default(&cfg);
  cfg.lambda = a.lambda;
  cfg.metric = a.metric == "mse" ? CAE_METRIC_MSE : CAE_METRIC_MSSSIM;
  cfg.iterations = a.iters;
  cfg.batch = a.batch;
  cfg.learning_rate = a.lr;
  cfg.crop = a.crop;
  cfg.seed = a.seed;
  const std::string loss_csv = a.loss_csv.empty() ? a.out + ".loss.csv" : a.loss_csv;
  struct Progress {
    std::uint64_t every;
  } progress{a.log_every};
  auto cb = [](std::uint64_t it, double loss, double dist, double bpp, void* user) {
    const auto* p = static_cast<Progress*>(user);
    if (p->every && it % p->every == 0) {
      std::fprintf(stderr, "iter %llu loss %.6g distortion %.6g bpp %.4f\n", static_cast<unsigned long long>(it), loss,
                   dist, bpp);
    }
  };
  cae_train_report report{};
  Check(cae_train(init.ptr, CStrings(images).data(), images.size(), &cfg, loss_csv.c_str(), cb, &progress,
                  &trained.ptr, &report),
        "training");
  Check(cae_model_save(trained.ptr, a.out.c_str()), "saving " + a.out);
  cae_model_info info{};
  Check(cae_model_get_info(trained.ptr, &info), "model info");
  std::printf("checkpoint=%s hash=%016llx iterations=%llu skipped=%llu final_loss=%.6g\n", a.out.c_str(),
              static_cast<unsigned long long>(info.hash), static_cast<unsigned long long>(report.iterations_run),
              static_cast<unsigned long long>(report.skipped_steps), report.final_loss);
  if (report.aborted) {
    std::fprintf(stderr, "training diverged; saved the last finite parameters\n");
    return kExitData;
  }
  return kExitOk;
}

// ---- encode / decode -----------------------------------------------------

struct CodecArgs {
  std::string model;
  std::string in;
  std::string out;
  std::uint32_t tile = 256;
  std::uint32_t overlap = 0;
  std::uint32_t threads = 0;
  bool abut = false;
};

int RunEncode(const CodecArgs& a) {
  ModelHandle m;
  Check(cae_model_load(a.model.c_str(), &m.ptr), "loading " + a.model);
  cae_encode_options o{a.tile, a.overlap, a.threads};
  cae_encode_report r{};
  Check(cae_encode_file(m.ptr, a.in.c_str(), a.out.c_str(), &o, &r), "encoding " + a.in);
  std::printf("width=%u height=%u tiles=%u bytes=%llu bpp=%s estimated_bits=%.1f payload_bits=%llu\n", r.stream.width,
              r.stream.height, r.stream.tiles, static_cast<unsigned long long>(r.stream.bytes),
              Num(r.stream.bits_per_pixel).c_str(), r.estimated_bits, static_cast<unsigned long long>(r.payload_bits));
  return kExitOk;
}

int RunDecode(const CodecArgs& a) {
  ModelHandle m;
  Check(cae_model_load(a.model.c_str(), &m.ptr), "loading " + a.model);
  cae_stream_info info{};
  Check(cae_decode_file(m.ptr, a.in.c_str(), a.out.c_str(), a.threads, a.abut ? 1 : 0, &info), "decoding " + a.in);
  std::printf("width=%u height=%u bpp=%s\n", info.width, info.height, Num(info.bits_per_pixel).c_str());
  return kExitOk;
}

// ---- metrics -------------------------------------------------------------

struct MetricsArgs {
  std::string ref;
  std::string dist;
  std::string bitstream;
  std::string image_id;
  std::string codec_id;
  bool header = true;
};

int RunMetrics(const MetricsArgs& a) {
  cae_quality q{};
  Check(cae_metrics_files(a.ref.c_str(), a.dist.c_str(), a.bitstream.empty() ? nullptr : a.bitstream.c_str(), &q),
        "metrics");
  const std::string image_id = a.image_id.empty() ? fs::path(a.ref).stem().string() : a.image_id;
  const std::string codec_id = a.codec_id.empty() ? fs::path(a.dist).parent_path().filename().string() : a.codec_id;
  char psnr[32], msssim[32];
  std::snprintf(psnr, sizeof psnr, "%.6f", q.psnr_db);
  std::snprintf(msssim, sizeof msssim, "%.8f", q.ms_ssim);
  if (a.header) std::printf("image_id,codec_id,bpp,psnr,msssim\n");
  std::printf("%s,%s,%s,%s,%s\n", image_id.c_str(), codec_id.c_str(),
              q.has_bits_per_pixel ? Num(q.bits_per_pixel).c_str() : "", q.identical ? "inf" : psnr, msssim);
  if (q.identical) std::fprintf(stderr, "note: images are identical; PSNR is unbounded\n");
  return kExitOk;
}

// ---- analyze -------------------------------------------------------------

struct AnalyzeArgs {
  std::string scores;
  std::string thresholds;
  std::string out;
  bool include_lowest = false;
  bool no_screening = false;
  double alpha = 0.05;
};

int RunAnalyze(const AnalyzeArgs& a) {
  cae_analyze_options o;
  cae_analyze_options_default(&o);
  o.thresholds_path = a.thresholds.empty() ? nullptr : a.thresholds.c_str();
  o.include_lowest_rate = a.include_lowest;
  o.skip_screening = a.no_screening;
  o.alpha = a.alpha;
  cae_analyze_report r{};
  Check(cae_analyze(a.scores.c_str(), &o, a.out.c_str(), &r), "analyzing " + a.scores);
  std::printf("subjects=%zu rejected=%zu stimuli=%zu ratings=%zu matrices=%zu out=%s\n", r.subjects,
              r.rejected_subjects, r.stimuli, r.ratings, r.matrices, a.out.c_str());
  return kExitOk;
}

// ---- session -------------------------------------------------------------

struct DesignArgs {
  std::string media;
  std::vector<std::string> codecs;
  std::vector<std::string> contents;
  std::vector<std::string> rates;
  std::vector<std::string> subject_ids;
  std::uint32_t subjects = 16;
  std::uint64_t seed = 0;
  std::string out;
  bool no_references = false;
  bool no_training = false;
  std::string training_content;
};

int RunDesign(const DesignArgs& a) {
  std::vector<std::string> subjects = a.subject_ids;
  if (subjects.empty()) {
    for (std::uint32_t i = 1; i <= a.subjects; ++i) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "subj%02u", i);
      subjects.push_back(buf);
    }
  }
  const auto codecs = CStrings(a.codecs), contents = CStrings(a.contents), rates = CStrings(a.rates),
             subj = CStrings(subjects);
  cae_design_config c{};
  c.codecs = codecs.data();
  c.codec_count = codecs.size();
  c.contents = contents.data();
  c.content_count = contents.size();
  c.rates = rates.data();
  c.rate_count = rates.size();
  c.subjects = subj.data();
  c.subject_count = subj.size();
  c.media_root = a.media.c_str();
  c.include_references = !a.no_references;
  c.training = !a.no_training;
  c.training_content = a.training_content.empty() ? nullptr : a.training_content.c_str();
  c.seed = a.seed;
  cae_design_report r{};
  Check(cae_session_design(&c, a.out.c_str(), &r), "session design");
  std::printf("coded_stimuli=%zu references=%zu training=%zu subjects=%zu session_sizes=%zu,%zu out=%s\n", r.coded,
              r.references, r.training, r.subjects, r.session_sizes[0], r.session_sizes[1], a.out.c_str());
  return kExitOk;
}

struct ServeArgs {
  std::string design;
  std::string media;
  std::string state;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
};

int RunServe(const ServeArgs& a) {
  // Block the stop signals before any server thread exists; a dedicated
  // thread waits for them and shuts the server down.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  cae_service* svc = nullptr;
  Check(cae_service_open(a.design.c_str(), a.media.c_str(), a.state.c_str(),
                         a.static_dir.empty() ? nullptr : a.static_dir.c_str(), &svc),
        "opening service");
  struct Guard {
    cae_service* s;
    ~Guard() { cae_service_free(s); }
  } guard{svc};
  int port = 0;
  Check(cae_service_bind(svc, a.host.c_str(), a.port, &port), "binding");
  std::printf("listening on http://%s:%d (%zu ratings on record)\n", a.host.c_str(), port, cae_service_rating_count(svc));
  std::fflush(stdout);

  std::atomic<bool> stopping{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    stopping = true;
    cae_service_stop(svc);
  });
  const cae_status s = cae_service_run(svc);
  if (!stopping) {
    // Listener ended on its own; release the waiter.
    pthread_kill(waiter.native_handle(), SIGTERM);
  }
  waiter.join();
  Check(s, "serving");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"caebench: learned image compression workbench and subjective evaluation tools"};
  app.set_config("--config", "", "Read options from an INI/TOML file; command-line flags take precedence");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cae_version()));

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a codec on a directory of images");
  t->add_option("--data", train.data, "Directory of .png/.ppm training images")->required();
  t->add_option("--lambda", train.lambda, "Rate-distortion trade-off weight")->required()->check(CLI::PositiveNumber);
  t->add_option("--metric", train.metric, "Distortion term")->check(CLI::IsMember({"mse", "msssim"}))->capture_default_str();
  t->add_option("--iters", train.iters, "Optimiser steps")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--batch", train.batch, "Crops per step")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--lr", train.lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--crop", train.crop, "Square crop size in pixels")->capture_default_str();
  t->add_option("--seed", train.seed, "Seed for initialisation, crops and noise")->capture_default_str();
  t->add_option("--out", train.out, "Checkpoint to write")->required();
  t->add_option("--loss-csv", train.loss_csv, "Per-iteration loss log (default: <out>.loss.csv)");
  t->add_option("--init", train.init, "Start from this checkpoint instead of a fresh model");
  t->add_option("--units", train.units, "Down/upsampling units")->capture_default_str();
  t->add_option("--filters", train.filters, "Channels inside the transforms")->capture_default_str();
  t->add_option("--latent", train.latent, "Latent channels")->capture_default_str();
  t->add_option("--log-every", train.log_every, "Progress line interval (0: silent)")->capture_default_str();

  CodecArgs enc, dec;
  auto* e = app.add_subcommand("encode", "Compress an image");
  e->add_option("--model", enc.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  e->add_option("--in", enc.in, "Input image (.png/.ppm)")->required()->check(CLI::ExistingFile);
  e->add_option("--out", enc.out, "Bitstream to write")->required();
  e->add_option("--tile", enc.tile, "Tile core size")->capture_default_str();
  e->add_option("--overlap", enc.overlap, "Extra context around each tile core (0 or 32 typical)")->capture_default_str();
  e->add_option("--threads", enc.threads, "Worker threads (0: all cores)")->capture_default_str();
  auto* d = app.add_subcommand("decode", "Reconstruct an image from a bitstream");
  d->add_option("--model", dec.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  d->add_option("--in", dec.in, "Bitstream")->required()->check(CLI::ExistingFile);
  d->add_option("--out", dec.out, "Image to write (.png/.ppm)")->required();
  d->add_option("--threads", dec.threads, "Worker threads (0: all cores)")->capture_default_str();
  d->add_flag("--abut", dec.abut, "Paste tile cores without cross-fading");

  MetricsArgs met;
  auto* m = app.add_subcommand("metrics", "PSNR and MS-SSIM of a distorted image");
  m->add_option("--ref", met.ref, "Reference image")->required();
  m->add_option("--dist", met.dist, "Distorted image")->required();
  m->add_option("--bitstream", met.bitstream, "Bitstream whose size gives the bpp column");
  m->add_option("--image-id", met.image_id, "image_id column (default: reference file stem)");
  m->add_option("--codec-id", met.codec_id, "codec_id column (default: distorted image's directory)");
  m->add_flag("!--no-header", met.header, "Omit the CSV header");

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "MOS, DMOS, outlier screening and pairwise matrices from a score CSV");
  a->add_option("--scores", an.scores, "Score CSV")->required();
  a->add_option("--thresholds", an.thresholds, "rate_id,target_bpp[,threshold_bpp] table");
  a->add_option("--out", an.out, "Output directory")->required();
  a->add_flag("--include-lowest-rate", an.include_lowest, "Also build a matrix for the lowest rate");
  a->add_flag("--no-screening", an.no_screening, "Keep every subject");
  a->add_option("--alpha", an.alpha, "Significance level of the Welch tests")->capture_default_str();

  auto* s = app.add_subcommand("session", "Subjective test design and rating service");
  s->require_subcommand(1);
  DesignArgs des;
  auto* sd = s->add_subcommand("design", "Build the stimulus inventory and per-subject plans");
  sd->add_option("--media", des.media, "Media root")->required();
  sd->add_option("--codecs", des.codecs, "Codec directory names")->required()->delimiter(',');
  sd->add_option("--contents", des.contents, "Content names")->required()->delimiter(',');
  sd->add_option("--rates", des.rates, "Rate ids, lowest bitrate first")->required()->delimiter(',');
  sd->add_option("--subjects", des.subjects, "Number of subjects (ids subj01, subj02, ...)")->capture_default_str();
  sd->add_option("--subject-ids", des.subject_ids, "Explicit subject ids")->delimiter(',');
  sd->add_option("--seed", des.seed, "Randomisation seed")->capture_default_str();
  sd->add_option("--out", des.out, "Output directory for manifest.csv and plan.csv")->required();
  sd->add_flag("--no-references", des.no_references, "Leave out hidden references");
  sd->add_flag("--no-training", des.no_training, "No training list");
  sd->add_option("--training-content", des.training_content, "Content shown during training (default: first)");
  ServeArgs srv;
  auto* ss = s->add_subcommand("serve", "Run the rating service");
  ss->add_option("--design", srv.design, "Directory with manifest.csv and plan.csv")->required();
  ss->add_option("--media", srv.media, "Media root")->required();
  ss->add_option("--state", srv.state, "Directory for the rating log")->required();
  ss->add_option("--host", srv.host, "Listen address")->capture_default_str();
  ss->add_option("--port", srv.port, "Listen port (0: any free port)")->capture_default_str()->check(CLI::Range(0, 65535));
  ss->add_option("--static", srv.static_dir, "Serve the rating UI from this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  // Log the resolved options of the chosen subcommand for reproducibility.
  CLI::App* chosen = &app;
  std::string name;
  while (!chosen->get_subcommands().empty()) {
    chosen = chosen->get_subcommands().front();
    name += (name.empty() ? "" : " ") + chosen->get_name();
  }
  std::cerr << "# caebench " << name << "\n" << chosen->config_to_str(true, false) << std::flush;
  try {
    if (t->parsed()) return RunTrain(train);
    if (e->parsed()) return RunEncode(enc);
    if (d->parsed()) return RunDecode(dec);
    if (m->parsed()) return RunMetrics(met);
    if (a->parsed()) return RunAnalyze(an);
    if (sd->parsed()) return RunDesign(des);
    if (ss->parsed()) return RunServe(srv);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.code;
  } catch (const std::exception& ex) {
    std::cerr << "internal error: " << ex.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}

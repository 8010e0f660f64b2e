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

// Drives the installed command-line tool as a subprocess.

#include <httplib.h>
#include <signal.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "caebench/image.hpp"
#include "caebench/model.hpp"
#include "caebench/subjstats.hpp"
#include "doctest.h"
#include "media_tree.hpp"
#include "panels.hpp"
#include "process.hpp"
#include "synthetic.hpp"
#include "toy_model.hpp"

using namespace caebench;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

testing::ProcessResult Cli(std::vector<std::string> args) {
  args.insert(args.begin(), CAEBENCH_CLI_PATH);
  return testing::RunProcess(args);
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> Fields(const std::string& line) {
  std::vector<std::string> f(1);
  for (char c : line) {
    if (c == ',') f.emplace_back();
    else if (c != '\n' && c != '\r') f.back() += c;
  }
  return f;
}

// Last non-empty stdout line split on commas.
std::vector<std::string> LastRow(const std::string& out) {
  std::istringstream in(out);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  return Fields(last);
}

// Pattern pair shared with the NumPy oracle in tests/oracles.
void WriteOraclePair(std::size_t w, std::size_t h, const fs::path& ref, const fs::path& dist) {
  Image a(w, h), b(w, h);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const long k = static_cast<long>((x * 37 + y * 91 + c * 13 + (x * y) % 29) % 256);
        const long d = std::clamp<long>(k + static_cast<long>((x * x + 3 * y + 7 * c) % 17) - 8, 0, 255);
        a.at(c, y, x) = static_cast<float>(k / 255.0);
        b.at(c, y, x) = static_cast<float>(d / 255.0);
      }
  WriteImage(a, ref);
  WriteImage(b, dist);
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(Cli({}).exit_code == 1);
  CHECK(Cli({"--help"}).exit_code == 0);
  CHECK(Cli({"frobnicate"}).exit_code == 1);
  CHECK(Cli({"train", "--data", ".", "--lambda", "1", "--metric", "psnr", "--out", "x"}).exit_code == 1);
  CHECK(Cli({"train", "--data", ".", "--lambda", "0", "--out", "x"}).exit_code == 1);
  CHECK(Cli({"encode", "--model", "/nonexistent", "--in", "a", "--out", "b"}).exit_code == 1);
  const auto help = Cli({"train", "--help"});
  CHECK(help.out.find("--batch") != std::string::npos);
  CHECK(help.out.find("16") != std::string::npos);
  CHECK(help.out.find("0.0001") != std::string::npos);
}

TEST_CASE("train smoke run writes a loadable checkpoint and loss log") {
  testing::TempDir dir("cli_train");
  fs::create_directories(dir.path() / "data");
  for (int i = 0; i < 3; ++i) WriteImage(testing::SyntheticImage(48, 40, i), dir.path() / "data" / (std::to_string(i) + ".png"));
  const auto ckpt = (dir.path() / "m.ckpt").string();
  const std::vector<std::string> args = {"train", "--data", (dir.path() / "data").string(), "--lambda", "1000",
                                         "--iters", "100", "--batch", "2", "--crop", "16", "--units", "1",
                                         "--filters", "4", "--latent", "4", "--seed", "9", "--out", ckpt};
  const auto r = Cli(args);
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK(r.err.find("# caebench train") != std::string::npos);
  CHECK(r.err.find("seed=9") != std::string::npos);
  const auto model = codec::CodecModel::Load(ckpt);
  CHECK(model.meta().iterations == 100);
  CHECK(model.arch().latent_channels == 4);
  const std::string log = Slurp(ckpt + ".loss.csv");
  CHECK(log.rfind("iteration,loss,distortion,rate_bits,bits_per_pixel\n", 0) == 0);
  CHECK(std::count(log.begin(), log.end(), '\n') == 101);

  // Same seed, same bytes.
  auto again = args;
  again.back() = (dir.path() / "m2.ckpt").string();
  REQUIRE(Cli(again).exit_code == 0);
  CHECK(Slurp(ckpt) == Slurp(again.back()));
  CHECK(Slurp(ckpt + ".loss.csv") == Slurp(again.back() + ".loss.csv"));

  CHECK(Cli({"train", "--data", (dir.path() / "missing").string(), "--lambda", "1", "--out", ckpt}).exit_code == 2);
}

TEST_CASE("encode and decode preserve dimensions; foreign models are refused") {
  testing::TempDir dir("cli_codec");
  const auto model = dir.path() / "toy.ckpt", other = dir.path() / "other.ckpt";
  testing::NearIdentityModel(4.0).Save(model);
  codec::CodecModel::Create({1, 3, 3}, 1).Save(other);
  const auto img = dir.path() / "in.png", bin = dir.path() / "in.cae", out = dir.path() / "out.ppm";
  WriteImage(testing::SyntheticImage(77, 53, 3), img);
  const auto e = Cli({"encode", "--model", model.string(), "--in", img.string(), "--out", bin.string(), "--tile", "32",
                      "--overlap", "8"});
  INFO(e.err);
  REQUIRE(e.exit_code == 0);
  CHECK(e.out.find("bpp=") != std::string::npos);
  REQUIRE(Cli({"decode", "--model", model.string(), "--in", bin.string(), "--out", out.string()}).exit_code == 0);
  const Image back = ReadImage(out);
  CHECK(back.width == 77);
  CHECK(back.height == 53);
  const auto bad = Cli({"decode", "--model", other.string(), "--in", bin.string(), "--out", out.string()});
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.find("model mismatch") != std::string::npos);
  std::ofstream(dir.path() / "junk.cae") << "not a bitstream";
  CHECK(Cli({"decode", "--model", model.string(), "--in", (dir.path() / "junk.cae").string(), "--out", out.string()})
            .exit_code == 2);
}

TEST_CASE("overlapped tiles cost more bits on a 1024x1024 image") {
  testing::TempDir dir("cli_overlap");
  const auto model = dir.path() / "toy.ckpt";
  testing::NearIdentityModel(4.0).Save(model);
  const auto img = dir.path() / "big.png";
  WriteImage(testing::SyntheticImage(1024, 1024, 5), img);
  std::uintmax_t sizes[2];
  for (int i = 0; i < 2; ++i) {
    const auto bin = dir.path() / ("o" + std::to_string(i) + ".cae");
    REQUIRE(Cli({"encode", "--model", model.string(), "--in", img.string(), "--out", bin.string(), "--overlap",
                 i ? "32" : "0"})
                .exit_code == 0);
    sizes[i] = fs::file_size(bin);
  }
  CHECK(sizes[1] > sizes[0]);
}

TEST_CASE("metrics rows") {
  testing::TempDir dir("cli_metrics");
  const auto ref = dir.path() / "ref.png", dist = dir.path() / "dist.png";
  WriteOraclePair(64, 48, ref, dist);
  auto r = Cli({"metrics", "--ref", ref.string(), "--dist", dist.string(), "--image-id", "pat", "--codec-id", "toy"});
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.rfind("image_id,codec_id,bpp,psnr,msssim\n", 0) == 0);
  auto row = LastRow(r.out);
  REQUIRE(row.size() == 5);
  CHECK(row[0] == "pat");
  CHECK(row[1] == "toy");
  CHECK(row[2].empty());
  CHECK(std::stod(row[3]) == doctest::Approx(34.415234867035998).epsilon(1e-7));
  CHECK(std::stod(row[4]) == doctest::Approx(0.99659058704453862).epsilon(1e-8));

  r = Cli({"metrics", "--ref", ref.string(), "--dist", ref.string(), "--bitstream", ref.string(), "--no-header"});
  REQUIRE(r.exit_code == 0);
  row = LastRow(r.out);
  CHECK(row[3] == "inf");
  CHECK(row[4] == "1.00000000");
  CHECK(std::stod(row[2]) == doctest::Approx(8.0 * static_cast<double>(fs::file_size(ref)) / (64 * 48)));
  CHECK(r.err.find("identical") != std::string::npos);

  CHECK(Cli({"metrics", "--ref", ref.string(), "--dist", (dir.path() / "nope.png").string()}).exit_code == 2);
}

TEST_CASE("analyze reproduces the golden exports") {
  testing::TempDir dir("cli_analyze");
  testing::PanelShape shape;
  const auto scores = testing::DeviantPanel(shape, 2024, "subj03", 0.6);
  {
    std::ofstream out(dir.path() / "scores.csv");
    scores.WriteCsv(out);
    std::ofstream th(dir.path() / "thresholds.csv");
    th << "rate_id,target_bpp\n";
    for (std::size_t i = 0; i < shape.rates.size(); ++i) th << shape.rates[i] << ',' << shape.targets[i] << '\n';
  }
  const auto r = Cli({"analyze", "--scores", (dir.path() / "scores.csv").string(), "--thresholds",
                      (dir.path() / "thresholds.csv").string(), "--out", (dir.path() / "out").string()});
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("rejected=1") != std::string::npos);
  const fs::path golden = fs::path(CAEBENCH_TEST_DATA_DIR) / "golden";
  for (const char* name : {"mos.csv", "dmos.csv", "pairwise.csv", "outliers.csv"}) {
    CAPTURE(name);
    CHECK(Slurp(dir.path() / "out" / name) == Slurp(golden / name));
  }
}

TEST_CASE("analyze edge cases") {
  testing::TempDir dir("cli_analyze_edge");
  std::ofstream(dir.path() / "empty.csv") << "";
  auto r = Cli({"analyze", "--scores", (dir.path() / "empty.csv").string(), "--out", (dir.path() / "o").string()});
  REQUIRE(r.exit_code == 0);
  CHECK(Slurp(dir.path() / "o" / "mos.csv") == "stimulus_id,codec,content,rate_id,actual_bpp,is_reference,n,mos,ci95\n");
  CHECK(Slurp(dir.path() / "o" / "pairwise.csv") == "rate_id,row_codec,col_codec,n,m\n");

  std::ofstream(dir.path() / "bad.csv") << subj::kScoreCsvHeader << "\nu1,s1,A,k,R1,0.5,0,3\nu1,s2,A,k,R1,0.5,0,six\n";
  r = Cli({"analyze", "--scores", (dir.path() / "bad.csv").string(), "--out", (dir.path() / "o2").string()});
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("line 3") != std::string::npos);
}

TEST_CASE("session design through the CLI and a config file") {
  testing::TempDir dir("cli_design");
  const auto shape = testing::StudyMediaShape();
  testing::WriteMediaTree(dir.path() / "media", shape);
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
    return s;
  };
  {
    std::ofstream cfg(dir.path() / "design.ini");
    cfg << "[session.design]\nmedia=\"" << (dir.path() / "media").string() << "\"\ncodecs=\"" << join(shape.codecs)
        << "\"\ncontents=\"" << join(shape.contents) << "\"\nrates=\"" << join(shape.rates) << "\"\nseed=17\n";
  }
  const auto r = Cli({"--config", (dir.path() / "design.ini").string(), "session", "design", "--out",
                      (dir.path() / "d").string()});
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("coded_stimuli=168") != std::string::npos);
  CHECK(r.out.find("references=7") != std::string::npos);
  CHECK(r.err.find("seed=17") != std::string::npos);
  const std::string manifest = Slurp(dir.path() / "d" / "manifest.csv");
  CHECK(std::count(manifest.begin(), manifest.end(), '\n') == 1 + 175 + 5);

  // Infeasible: a single content cannot be kept apart.
  const auto bad = Cli({"session", "design", "--media", (dir.path() / "media").string(), "--codecs", "hevc,jpegxt",
                        "--contents", "bike", "--rates", "R1", "--no-references", "--out", (dir.path() / "x").string()});
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.find("infeasible") != std::string::npos);
}

TEST_CASE("serve completes a scripted five-stimulus session and stops on SIGTERM") {
  testing::TempDir dir("cli_serve");
  testing::MediaShape shape{{"cae"}, {"k1", "k2", "k3", "k4", "k5"}, {"R1"}, false};
  testing::WriteMediaTree(dir.path() / "media", shape);
  REQUIRE(Cli({"session", "design", "--media", (dir.path() / "media").string(), "--codecs", "cae", "--contents",
               "k1,k2,k3,k4,k5", "--rates", "R1", "--no-references", "--no-training", "--subject-ids", "ann", "--out",
               (dir.path() / "d").string()})
              .exit_code == 0);
  testing::ChildProcess server({CAEBENCH_CLI_PATH, "session", "serve", "--design", (dir.path() / "d").string(),
                                "--media", (dir.path() / "media").string(), "--state", (dir.path() / "state").string(),
                                "--port", "0"});
  const int port = testing::ParsePort(server.WaitForLine("listening on", std::chrono::seconds(20)));
  REQUIRE(port > 0);
  httplib::Client cli("127.0.0.1", port);
  std::vector<std::string> ids;
  for (int i = 1; i <= 5; ++i) ids.push_back("s00" + std::to_string(i));
  auto created = cli.Post("/sessions", json{{"subject_id", "ann"}, {"session", "all"}, {"stimuli", ids}}.dump(),
                          "application/json");
  REQUIRE(created);
  REQUIRE(created->status == 201);
  const std::string sid = json::parse(created->body).at("session_id");
  int served = 0;
  for (;;) {
    auto nx = cli.Get("/sessions/" + sid + "/next");
    REQUIRE(nx);
    const json n = json::parse(nx->body);
    if (n.at("done")) break;
    REQUIRE(cli.Get(n.at("media_url").get<std::string>())->status == 200);
    auto ok = cli.Post("/sessions/" + sid + "/ratings",
                       json{{"stimulus_id", n.at("stimulus_id")}, {"score", 1 + served}, {"nonce", std::to_string(served)}}.dump(),
                       "application/json");
    REQUIRE(ok);
    CHECK(ok->status == 200);
    ++served;
  }
  CHECK(served == 5);
  const auto csv = cli.Get("/export?format=csv");
  CHECK(std::count(csv->body.begin(), csv->body.end(), '\n') == 6);
  server.Signal(SIGTERM);
  CHECK(server.Wait() == 0);
}

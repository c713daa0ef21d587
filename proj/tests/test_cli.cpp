// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

// Drives the command-line tool as a subprocess.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(INTNET_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  std::FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

int count_lines_starting(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  int n = 0;
  for (std::string line; std::getline(in, line);) n += line.rfind(prefix, 0) == 0;
  return n;
}

// One workspace per process: a small linear net, its images, a calibration and
// a converted model.
struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("intnet_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    REQUIRE(run("synth --topology linear --seed 3 --size 12 --count 4 --out " + p("net.fnet") + " --data " +
                p("data"))
                .code == 0);
    REQUIRE(run("calibrate --model " + p("net.fnet") + " --data " + p("data") + " --method nsigma --n 3 --out " +
                p("calib.txt"))
                .code == 0);
    REQUIRE(run("convert --model " + p("net.fnet") + " --calib " + p("calib.txt") + " --out " + p("net.inet") +
                " --out-float " + p("adjusted.fnet"))
                .code == 0);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string p(const std::string& name) const { return (dir / name).string(); }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(run("").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("convert --bits 7").code == 1);
  CHECK(run("convert --model a --calib b --out c --bits 9").code == 1);
}

TEST_CASE("invalid inputs exit 2") {
  auto& w = ws();
  fs::create_directories(w.dir / "empty");
  CHECK(run("calibrate --model " + w.p("net.fnet") + " --data " + w.p("empty") + " --out " + w.p("x.txt")).code ==
        2);
  CHECK(run("infer --model " + w.p("missing.fnet") + " --data " + w.p("data") + " --out " + w.p("o")).code == 2);
  std::ofstream(w.p("bad.txt")) << "intnet-calibration 1\nmethod nsigma n=3\nlayer r h_rf=zz\n";
  CHECK(run("convert --model " + w.p("net.fnet") + " --calib " + w.p("bad.txt") + " --out " + w.p("x.inet")).code ==
        2);
  // an integer model where a float model is expected
  CHECK(run("calibrate --model " + w.p("net.inet") + " --data " + w.p("data") + " --out " + w.p("x.txt")).code == 2);
}

TEST_CASE("convert prints the conversion report and payload sizes") {
  auto& w = ws();
  const auto r = run("convert --model " + w.p("net.fnet") + " --calib " + w.p("calib.txt") + " --bits 6 --out " +
                     w.p("six.inet"));
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("intnet-conversion 1\n", 0) == 0);
  CHECK(r.out.find("bits 6\n") != std::string::npos);
  CHECK(r.out.find("max_int 63\n") != std::string::npos);
  CHECK(r.out.find("threshold_met 1\n") != std::string::npos);
  CHECK(r.out.find("int_weight_bytes ") != std::string::npos);
  CHECK(r.out.find("float_weight_bytes ") != std::string::npos);
  CHECK(fs::exists(w.p("six.inet")));
}

TEST_CASE("an unreachable PSNR target exits 3 but still writes the best model") {
  auto& w = ws();
  const auto r = run("convert --model " + w.p("net.fnet") + " --calib " + w.p("calib.txt") + " --data " +
                     w.p("data") + " --target-psnr 400 --n-cap 4 --out " + w.p("best.inet"));
  CHECK(r.code == 3);
  CHECK(r.out.find("threshold_met 0\n") != std::string::npos);
  CHECK(fs::exists(w.p("best.inet")));
}

TEST_CASE("infer writes one output per image") {
  auto& w = ws();
  REQUIRE(run("infer --int-model " + w.p("net.inet") + " --data " + w.p("data") + " --threads 2 --out " +
              w.p("out_int"))
              .code == 0);
  REQUIRE(run("infer --model " + w.p("net.fnet") + " --data " + w.p("data") + " --out " + w.p("out_float")).code ==
          0);
  for (const char* d : {"out_int", "out_float"}) {
    int files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(w.dir / d)) ++files;
    CHECK(files == 4);
  }
  REQUIRE(run("infer --int-model " + w.p("net.inet") + " --data " + w.p("data") + " --trace " + w.p("trace") +
              " --out " + w.p("out_trace"))
              .code == 0);
  CHECK(!fs::is_empty(w.dir / "trace"));
}

TEST_CASE("compare prints metrics and enforces the minimum PSNR") {
  auto& w = ws();
  const std::string base =
      "compare --model " + w.p("adjusted.fnet") + " --int-model " + w.p("net.inet") + " --data " + w.p("data");
  const auto ok = run(base + " --min-psnr 20");
  CHECK(ok.code == 0);
  for (const char* key : {"mode regress\n", "images 4\n", "psnr ", "pass 1\n"})
    CHECK(ok.out.find(key) != std::string::npos);
  const auto fail = run(base + " --min-psnr 500");
  CHECK(fail.code == 3);
  CHECK(fail.out.find("pass 0\n") != std::string::npos);
  CHECK(run(base + " --mode classify").code == 0);
}

TEST_CASE("bench prints one row per engine") {
  auto& w = ws();
  const auto both = run("bench --model " + w.p("net.fnet") + " --int-model " + w.p("net.inet") +
                        " --reps 1 --warmup 0 --threads 2");
  REQUIRE(both.code == 0);
  CHECK(count_lines_starting(both.out, "engine float reps=1 ") == 1);
  CHECK(count_lines_starting(both.out, "engine int reps=1 ") == 1);
  CHECK(both.out.find("int_outputs_identical 1") != std::string::npos);
  const auto int_only = run("bench --int-model " + w.p("net.inet") + " --reps 3");
  CHECK(count_lines_starting(int_only.out, "engine ") == 1);
  CHECK(run("bench").code != 0);
}

// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "odecme_cli_test";

int run_cli(const std::string& args, const std::string& stdout_file = "") {
  std::string cmd = std::string(ODECME_CLI_PATH) + " " + args;
  cmd += stdout_file.empty() ? " >/dev/null" : (" >" + stdout_file);
  cmd += " 2>/dev/null";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct WorkDir {
  WorkDir() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("usage errors exit with code two") {
  CHECK(run_cli("") == 2);
  CHECK(run_cli("register --no-such-flag") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("eval") == 2);  // nothing to evaluate
}

TEST_CASE("missing input files exit with code one") {
  WorkDir wd;
  CHECK(run_cli("register --fixed /nope_f.png --moving /nope_m.png --out-dir " +
                q(kWork / "x")) == 1);
}

TEST_CASE("synth, register, eval, gridplot, and bench round a full loop") {
  WorkDir wd;
  std::string synth_dir = q(kWork / "pair");
  REQUIRE(run_cli("synth --out-dir " + synth_dir +
                  " --width 24 --height 24 --sd-real 0.03 --seed 19") == 0);
  CHECK(fs::exists(kWork / "pair" / "fixed.png"));
  CHECK(fs::exists(kWork / "pair" / "moving.png"));
  CHECK(fs::exists(kWork / "pair" / "landmarks.csv"));
  CHECK(fs::exists(kWork / "pair" / "truth.json"));

  std::string reg_args = " --fixed " + q(kWork / "pair" / "fixed.png") +
                         " --moving " + q(kWork / "pair" / "moving.png") +
                         " --levels 2 --iters 5 --seed 21";
  REQUIRE(run_cli("register" + reg_args + " --out-dir " + q(kWork / "r1")) == 0);
  REQUIRE(run_cli("register" + reg_args + " --out-dir " + q(kWork / "r2")) == 0);
  CHECK(fs::exists(kWork / "r1" / "warped.png"));
  CHECK(slurp(kWork / "r1" / "result.json") == slurp(kWork / "r2" / "result.json"));

  std::string eval_out = (kWork / "eval.txt").string();
  REQUIRE(run_cli("eval --transform " + q(kWork / "r1" / "result.json") +
                      " --landmarks " + q(kWork / "pair" / "landmarks.csv") +
                      " --ref " + q(kWork / "pair" / "fixed.png") + " --test " +
                      q(kWork / "r1" / "warped.png"),
                  eval_out) == 0);
  std::string report = slurp(eval_out);
  CHECK(report.find("naed ") != std::string::npos);
  CHECK(report.find("ssim ") != std::string::npos);
  CHECK(report.find("psnr ") != std::string::npos);
  double naed_val = -1.0;
  std::istringstream(report.substr(report.find("naed ") + 5)) >> naed_val;
  CHECK(naed_val >= 0.0);
  CHECK(naed_val < 1.0);

  REQUIRE(run_cli("gridplot --transform " + q(kWork / "r1" / "result.json") +
                  " --out " + q(kWork / "grid.csv") + " --lines 3 --samples 5") == 0);
  CHECK(fs::exists(kWork / "grid.csv"));

  fs::create_directories(kWork / "bench");
  fs::copy_file(kWork / "pair" / "fixed.png", kWork / "bench" / "a_fixed.png");
  fs::copy_file(kWork / "pair" / "moving.png", kWork / "bench" / "a_moving.png");
  fs::copy_file(kWork / "pair" / "landmarks.csv",
                kWork / "bench" / "a_landmarks.csv");
  REQUIRE(run_cli("bench --dir " + q(kWork / "bench") + " --out " +
                  q(kWork / "bench.csv") + " --levels 2 --iters 5 --seed 21") == 0);
  std::string csv = slurp(kWork / "bench.csv");
  CHECK(csv.rfind("pair,naed,ssim,psnr,wall_s\n", 0) == 0);
  CHECK(csv.find("\na,") != std::string::npos);
  CHECK(csv.find("\nmean,") != std::string::npos);
  CHECK(csv.find("\nstd,") != std::string::npos);

  fs::remove_all(kWork);
}

TEST_CASE("the evaluator consumes truth transforms directly") {
  WorkDir wd;
  REQUIRE(run_cli("synth --out-dir " + q(kWork / "p") +
                  " --width 24 --height 24 --sd-real 0.03 --seed 23") == 0);
  std::string out = (kWork / "truth_eval.txt").string();
  REQUIRE(run_cli("eval --transform " + q(kWork / "p" / "truth.json") +
                      " --landmarks " + q(kWork / "p" / "landmarks.csv"),
                  out) == 0);
  std::string report = slurp(out);
  CHECK(report.find("naed 0\n") != std::string::npos);  // exact by construction
  fs::remove_all(kWork);
}

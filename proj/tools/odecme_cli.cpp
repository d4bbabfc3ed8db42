// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Talks to the core exclusively through the C API;
// everything here is argument plumbing, file naming, and CSV assembly.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "odecme.h"

namespace fs = std::filesystem;

namespace {

int exit_code_for(odecme_status s) {
  switch (s) {
    case ODECME_OK: return 0;
    case ODECME_ERR_INVALID_ARGUMENT:
    case ODECME_ERR_DIMENSION: return 2;
    case ODECME_ERR_NUMERIC: return 3;
    default: return 1;
  }
}

[[noreturn]] void die(odecme_status s, const std::string& what) {
  std::fprintf(stderr, "odecme: %s: %s\n", what.c_str(), odecme_last_error());
  std::exit(exit_code_for(s));
}

[[noreturn]] void die_usage(const std::string& what) {
  std::fprintf(stderr, "odecme: %s\n", what.c_str());
  std::exit(2);
}

void check(odecme_status s, const std::string& what) {
  if (s != ODECME_OK) die(s, what);
}

struct ImageDel {
  void operator()(odecme_image* p) const { odecme_image_destroy(p); }
};
struct ResultDel {
  void operator()(odecme_result* p) const { odecme_result_destroy(p); }
};
struct LandmarksDel {
  void operator()(odecme_landmarks* p) const { odecme_landmarks_destroy(p); }
};
using ImagePtr = std::unique_ptr<odecme_image, ImageDel>;
using ResultPtr = std::unique_ptr<odecme_result, ResultDel>;
using LandmarksPtr = std::unique_ptr<odecme_landmarks, LandmarksDel>;

ImagePtr load_image(const std::string& path) {
  odecme_image* p = nullptr;
  check(odecme_image_load(path.c_str(), &p), "loading '" + path + "'");
  return ImagePtr(p);
}

ResultPtr load_result(const std::string& path) {
  odecme_result* p = nullptr;
  check(odecme_result_load_json(path.c_str(), &p), "loading '" + path + "'");
  return ResultPtr(p);
}

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Shared register/bench knobs; strings stay alive for the options struct.
struct RegisterFlags {
  std::string group = "aff2";
  bool real = false;
  std::string solver = "rk4";
  std::string loss = "mse";
  int levels = 4;
  double downscale = 2.0;
  int n_terms = 10;
  int iters = 500;
  double lr_theta = 0.1, lr_phi = 0.01, lr_u = 0.01;
  std::uint64_t seed = 0;
  int mine_batch = 0;
  std::string mask;
  bool drmime = false;
  int warmup = 0;
  bool converge = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--group", group, "transform family: aff2, se3, sim3");
    auto* re = cmd->add_flag("--real", real,
                             "real coefficients (default complex)");
    auto* cpx = cmd->add_flag_function(
        "--complex", [this](std::int64_t) { real = false; },
        "complex coefficients (default)");
    cpx->excludes(re);
    cmd->add_option("--solver", solver, "coefficient ODE solver: euler or rk4");
    cmd->add_option("--loss", loss, "similarity score: mine, mse, or ncc");
    cmd->add_option("--levels", levels, "pyramid depth L");
    cmd->add_option("--downscale", downscale, "per-level shrink factor d");
    cmd->add_option("--n-terms", n_terms, "matrix-exponential series terms");
    cmd->add_option("--iters", iters, "gradient-ascent iterations");
    cmd->add_option("--lr-theta", lr_theta, "critic learning rate");
    cmd->add_option("--lr-phi", lr_phi, "flow-net learning rate");
    cmd->add_option("--lr-u", lr_u, "coefficient learning rate");
    cmd->add_option("--seed", seed, "run seed");
    cmd->add_option("--mine-batch", mine_batch, "MINE sample count (0 = auto)");
    cmd->add_option("--mask", mask, "generator on/off list, e.g. 1,1,0,0,0,0");
    cmd->add_flag("--drmime", drmime, "predecessor mode: one shared real v")
        ->excludes(cpx);
    cmd->add_option("--warmup", warmup, "MINE critic-only iterations first");
    cmd->add_flag("--converge", converge,
                  "stop early when the objective plateaus");
  }

  odecme_register_options options() const {
    odecme_register_options opt;
    odecme_register_options_init(&opt);
    opt.group = group.c_str();
    opt.complex_coefficients = (real || drmime) ? 0 : 1;
    opt.solver = solver.c_str();
    opt.loss = loss.c_str();
    opt.levels = levels;
    opt.downscale = downscale;
    opt.n_terms = n_terms;
    opt.iterations = iters;
    opt.lr_theta = lr_theta;
    opt.lr_phi = lr_phi;
    opt.lr_u = lr_u;
    opt.seed = seed;
    opt.mine_batch = mine_batch;
    opt.generator_mask = mask.empty() ? nullptr : mask.c_str();
    opt.drmime_mode = drmime ? 1 : 0;
    opt.warmup_iterations = warmup;
    opt.convergence_stop = converge ? 1 : 0;
    return opt;
  }
};

std::string image_ext(const odecme_image* img) {
  int32_t dims[3], rank, channels;
  check(odecme_image_dims(img, dims, &rank, &channels), "querying image");
  return rank == 3 ? ".raw" : ".png";
}

// ---- register ---------------------------------------------------------

struct RegisterArgs {
  std::string fixed, moving, out_dir, params_out;
  RegisterFlags flags;
};

void run_register(const RegisterArgs& a) {
  ImagePtr fixed = load_image(a.fixed);
  ImagePtr moving = load_image(a.moving);
  odecme_register_options opt = a.flags.options();
  opt.emit_params = a.params_out.empty() ? 0 : 1;

  odecme_result* raw = nullptr;
  check(odecme_register(fixed.get(), moving.get(), &opt, &raw), "registering");
  ResultPtr res(raw);

  fs::create_directories(a.out_dir);
  std::string result_path = (fs::path(a.out_dir) / "result.json").string();
  check(odecme_result_save_json(res.get(), result_path.c_str()),
        "writing '" + result_path + "'");

  odecme_image* wraw = nullptr;
  check(odecme_warp(moving.get(), res.get(), 0, &wraw), "warping");
  ImagePtr warped(wraw);
  std::string warped_path =
      (fs::path(a.out_dir) / ("warped" + image_ext(warped.get()))).string();
  check(odecme_image_save(warped.get(), warped_path.c_str()),
        "writing '" + warped_path + "'");

  if (!a.params_out.empty()) {
    const char* json = nullptr;
    check(odecme_result_params_json(res.get(), &json), "reading checkpoint");
    std::ofstream out(a.params_out, std::ios::binary);
    if (!out || !(out << json).flush())
      die_usage("cannot write '" + a.params_out + "'");
  }

  const double* hist = nullptr;
  int32_t n = 0;
  check(odecme_result_objective(res.get(), &hist, &n), "reading history");
  std::printf("wrote %s\n", result_path.c_str());
  std::printf("wrote %s\n", warped_path.c_str());
  if (n > 0) std::printf("final objective %s after %d iterations\n",
                         g17(hist[n - 1]).c_str(), n);
}

// ---- eval ---------------------------------------------------------------

struct EvalArgs {
  std::string transform, landmarks, landmarks2, ref, test;
  bool fire = false;
};

void run_eval(const EvalArgs& a) {
  bool any = false;
  if (!a.landmarks.empty()) {
    if (a.transform.empty())
      die_usage("--landmarks needs --transform for the frame sizes");
    ResultPtr res = load_result(a.transform);
    odecme_landmarks* lraw = nullptr;
    if (a.fire)
      check(odecme_landmarks_load_fire(
                a.landmarks.c_str(),
                a.landmarks2.empty() ? nullptr : a.landmarks2.c_str(), &lraw),
            "loading '" + a.landmarks + "'");
    else
      check(odecme_landmarks_load(a.landmarks.c_str(), &lraw),
            "loading '" + a.landmarks + "'");
    LandmarksPtr lm(lraw);
    double v = 0.0;
    check(odecme_naed(lm.get(), res.get(), &v), "computing naed");
    std::printf("naed %s\n", g17(v).c_str());
    any = true;
  } else if (!a.landmarks2.empty() || a.fire) {
    die_usage("--landmarks2/--fire-format need --landmarks");
  }
  if (!a.ref.empty() || !a.test.empty()) {
    if (a.ref.empty() || a.test.empty())
      die_usage("--ref and --test must be given together");
    ImagePtr ref = load_image(a.ref);
    ImagePtr test = load_image(a.test);
    double s = 0.0, p = 0.0;
    check(odecme_ssim(ref.get(), test.get(), &s), "computing ssim");
    check(odecme_psnr(ref.get(), test.get(), &p), "computing psnr");
    std::printf("ssim %s\n", g17(s).c_str());
    std::printf("psnr %s\n", g17(p).c_str());
    any = true;
  }
  if (!any) die_usage("nothing to evaluate: pass --landmarks or --ref/--test");
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  std::string input, out_dir;
  std::string group = "aff2";
  double sd_real = 0.1, sd_imag = 0.0;
  std::uint64_t seed = 0;
  int width = 256, height = 256, depth = 1, channels = 1;
  std::uint64_t image_seed = 1;
};

void run_synth(const SynthArgs& a) {
  ImagePtr source;
  if (!a.input.empty()) {
    source = load_image(a.input);
  } else {
    odecme_image* p = nullptr;
    check(odecme_test_image(a.width, a.height, a.depth, a.channels,
                            a.image_seed, &p),
          "making test image");
    source.reset(p);
  }

  odecme_image *fraw = nullptr, *mraw = nullptr;
  odecme_landmarks* lraw = nullptr;
  odecme_result* traw = nullptr;
  check(odecme_synth(source.get(), a.group.c_str(), a.sd_real, a.sd_imag,
                     a.seed, &fraw, &mraw, &lraw, &traw),
        "synthesizing");
  ImagePtr fixed(fraw), moving(mraw);
  LandmarksPtr lm(lraw);
  ResultPtr truth(traw);

  fs::create_directories(a.out_dir);
  std::string ext = image_ext(fixed.get());
  const std::pair<const char*, const odecme_image*> images[] = {
      {"fixed", fixed.get()}, {"moving", moving.get()}};
  for (const auto& [name, img] : images) {
    std::string p = (fs::path(a.out_dir) / (name + ext)).string();
    check(odecme_image_save(img, p.c_str()), "writing '" + p + "'");
    std::printf("wrote %s\n", p.c_str());
  }
  std::string lm_path = (fs::path(a.out_dir) / "landmarks.csv").string();
  check(odecme_landmarks_save(lm.get(), lm_path.c_str()),
        "writing '" + lm_path + "'");
  std::printf("wrote %s\n", lm_path.c_str());
  std::string truth_path = (fs::path(a.out_dir) / "truth.json").string();
  check(odecme_result_save_json(truth.get(), truth_path.c_str()),
        "writing '" + truth_path + "'");
  std::printf("wrote %s\n", truth_path.c_str());
}

// ---- gridplot -------------------------------------------------------------

struct GridArgs {
  std::string transform, out;
  bool inverse = false;
  int lines = 10, samples = 50;
};

void run_gridplot(const GridArgs& a) {
  ResultPtr res = load_result(a.transform);
  check(odecme_grid_csv(res.get(), a.inverse ? 1 : 0, a.lines, a.samples,
                        a.out.c_str()),
        "writing '" + a.out + "'");
  std::printf("wrote %s\n", a.out.c_str());
}

// ---- bench ---------------------------------------------------------------

struct BenchArgs {
  std::string dir, out;
  RegisterFlags flags;
};

struct BenchRow {
  std::string name;
  double naed = std::nan("");
  double ssim = std::nan("");
  double psnr = std::nan("");
  double wall = 0.0;
};

void run_bench(const BenchArgs& a) {
  // Pairs are "<stem>_fixed.<ext>" + "<stem>_moving.<ext>", with an optional
  // "<stem>_landmarks.csv" beside them.
  std::vector<std::pair<std::string, fs::path>> pairs;
  if (!fs::is_directory(a.dir)) die_usage("'" + a.dir + "' is not a directory");
  for (const auto& entry : fs::directory_iterator(a.dir)) {
    if (!entry.is_regular_file()) continue;
    std::string stem = entry.path().stem().string();
    const std::string tag = "_fixed";
    if (stem.size() <= tag.size() ||
        stem.compare(stem.size() - tag.size(), tag.size(), tag) != 0)
      continue;
    pairs.emplace_back(stem.substr(0, stem.size() - tag.size()), entry.path());
  }
  std::sort(pairs.begin(), pairs.end());
  if (pairs.empty()) die_usage("no '*_fixed.*' images under '" + a.dir + "'");

  odecme_register_options opt = a.flags.options();
  std::vector<BenchRow> rows;
  for (const auto& [stem, fixed_path] : pairs) {
    fs::path moving_path = fixed_path;
    moving_path.replace_filename(stem + "_moving" +
                                 fixed_path.extension().string());
    if (!fs::exists(moving_path))
      die_usage("missing counterpart '" + moving_path.string() + "'");

    ImagePtr fixed = load_image(fixed_path.string());
    ImagePtr moving = load_image(moving_path.string());

    auto t0 = std::chrono::steady_clock::now();
    odecme_result* rraw = nullptr;
    check(odecme_register(fixed.get(), moving.get(), &opt, &rraw),
          "registering '" + stem + "'");
    ResultPtr res(rraw);
    BenchRow row;
    row.name = stem;
    row.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
                   .count();

    fs::path lm_path = fixed_path;
    lm_path.replace_filename(stem + "_landmarks.csv");
    if (fs::exists(lm_path)) {
      odecme_landmarks* lraw = nullptr;
      check(odecme_landmarks_load(lm_path.string().c_str(), &lraw),
            "loading '" + lm_path.string() + "'");
      LandmarksPtr lm(lraw);
      check(odecme_naed(lm.get(), res.get(), &row.naed), "computing naed");
    }

    odecme_image* wraw = nullptr;
    check(odecme_warp(moving.get(), res.get(), 0, &wraw), "warping");
    ImagePtr warped(wraw);
    check(odecme_ssim(fixed.get(), warped.get(), &row.ssim), "computing ssim");
    check(odecme_psnr(fixed.get(), warped.get(), &row.psnr), "computing psnr");

    std::printf("%s: naed %s ssim %s psnr %s wall %ss\n", stem.c_str(),
                g17(row.naed).c_str(), g17(row.ssim).c_str(),
                g17(row.psnr).c_str(), g17(row.wall).c_str());
    rows.push_back(std::move(row));
  }

  // footer aggregates recompute exactly from the printed rows: %.17g output
  // round-trips doubles, and mean/std are computed from those same values
  // (population std, finite entries only).
  auto column = [&](auto get) {
    std::vector<double> v;
    for (const BenchRow& r : rows) {
      double x = get(r);
      if (std::isfinite(x)) v.push_back(x);
    }
    return v;
  };
  auto mean_of = [](const std::vector<double>& v) {
    if (v.empty()) return std::nan("");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto std_of = [&](const std::vector<double>& v) {
    if (v.empty()) return std::nan("");
    double m = mean_of(v), s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
  };

  std::ofstream out(a.out, std::ios::binary);
  if (!out) die_usage("cannot write '" + a.out + "'");
  out << "pair,naed,ssim,psnr,wall_s\n";
  for (const BenchRow& r : rows)
    out << r.name << ',' << g17(r.naed) << ',' << g17(r.ssim) << ','
        << g17(r.psnr) << ',' << g17(r.wall) << "\n";
  for (const char* agg : {"mean", "std"}) {
    bool is_mean = agg[0] == 'm';
    auto stat = [&](std::vector<double> v) {
      return is_mean ? mean_of(v) : std_of(v);
    };
    out << agg << ',' << g17(stat(column([](const BenchRow& r) { return r.naed; })))
        << ',' << g17(stat(column([](const BenchRow& r) { return r.ssim; })))
        << ',' << g17(stat(column([](const BenchRow& r) { return r.psnr; })))
        << ',' << g17(stat(column([](const BenchRow& r) { return r.wall; })))
        << "\n";
  }
  if (!out.flush()) die_usage("failed writing '" + a.out + "'");
  std::printf("wrote %s (%zu pairs)\n", a.out.c_str(), rows.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diffeomorphic registration via complex matrix exponentials"};
  app.require_subcommand(1);

  RegisterArgs reg;
  CLI::App* c_reg = app.add_subcommand("register", "align moving to fixed");
  c_reg->add_option("--fixed", reg.fixed, "reference image")->required();
  c_reg->add_option("--moving", reg.moving, "image to align")->required();
  c_reg->add_option("--out-dir", reg.out_dir, "output directory")->required();
  c_reg->add_option("--params-out", reg.params_out,
                    "also write the optimizer checkpoint JSON here");
  reg.flags.attach(c_reg);

  EvalArgs ev;
  CLI::App* c_eval = app.add_subcommand("eval", "score a finished alignment");
  c_eval->add_option("--transform", ev.transform, "result JSON");
  c_eval->add_option("--landmarks", ev.landmarks, "landmark CSV (or file 1)");
  c_eval->add_option("--landmarks2", ev.landmarks2,
                     "second points file for the split format");
  c_eval->add_flag("--fire-format", ev.fire,
                   "headerless whitespace landmark table(s)");
  c_eval->add_option("--ref", ev.ref, "reference image for ssim/psnr");
  c_eval->add_option("--test", ev.test, "image compared against --ref");

  SynthArgs sy;
  CLI::App* c_synth = app.add_subcommand("synth", "make a benchmark pair");
  c_synth->add_option("--input", sy.input, "source image (default: generated)");
  c_synth->add_option("--out-dir", sy.out_dir, "output directory")->required();
  c_synth->add_option("--group", sy.group, "transform family");
  c_synth->add_option("--sd-real", sy.sd_real, "real coefficient spread");
  c_synth->add_option("--sd-imag", sy.sd_imag, "imaginary coefficient spread");
  c_synth->add_option("--seed", sy.seed, "transform seed");
  c_synth->add_option("--width", sy.width, "generated image width");
  c_synth->add_option("--height", sy.height, "generated image height");
  c_synth->add_option("--depth", sy.depth, "generated volume depth");
  c_synth->add_option("--channels", sy.channels, "generated channel count");
  c_synth->add_option("--image-seed", sy.image_seed, "generated texture seed");

  GridArgs gr;
  CLI::App* c_grid = app.add_subcommand("gridplot",
                                        "transformed grid lines as CSV");
  c_grid->add_option("--transform", gr.transform, "result JSON")->required();
  c_grid->add_option("--out", gr.out, "polyline CSV path")->required();
  c_grid->add_flag("--inverse", gr.inverse, "plot the inverse transform");
  c_grid->add_option("--lines", gr.lines, "grid lines per axis");
  c_grid->add_option("--samples", gr.samples, "samples per line");

  BenchArgs be;
  CLI::App* c_bench = app.add_subcommand("bench", "run a directory of pairs");
  c_bench->add_option("--dir", be.dir, "directory of *_fixed/*_moving images")
      ->required();
  c_bench->add_option("--out", be.out, "results CSV path")->required();
  be.flags.attach(c_bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (c_reg->parsed()) run_register(reg);
  if (c_eval->parsed()) run_eval(ev);
  if (c_synth->parsed()) run_synth(sy);
  if (c_grid->parsed()) run_gridplot(gr);
  if (c_bench->parsed()) run_bench(be);
  return 0;
}

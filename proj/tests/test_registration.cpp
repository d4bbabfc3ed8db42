// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "odecme/error.hpp"
#include "odecme/matexp.hpp"
#include "odecme/metrics.hpp"
#include "odecme/params.hpp"
#include "odecme/registration.hpp"

using namespace odecme;

namespace {

RegistrationConfig small_config() {
  RegistrationConfig cfg;
  cfg.levels = 2;
  cfg.iterations = 10;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("zero iterations yield the identity transform") {
  Image fixed = make_test_image(16, 16, 1, 1, 50);
  Image moving = make_test_image(16, 16, 1, 1, 51);
  RegistrationConfig cfg = small_config();
  cfg.iterations = 0;
  TransformResult r = register_images(fixed, moving, cfg);

  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
  CHECK((r.h.re - eye).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.h.im.cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.h_inv.re - eye).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.iterations_run == 0);
  CHECK(r.loss_history.empty());

  Image warped = warp(moving, r.h);
  for (size_t i = 0; i < moving.data.size(); ++i)
    CHECK(std::abs(warped.data[i] - moving.data[i]) < 1e-12);
}

TEST_CASE("identical runs serialize byte-identically") {
  Image fixed = make_test_image(16, 16, 1, 1, 52);
  SynthPair sp = synth_pair(fixed, GroupSpec::Aff2, 0.03, 0.0, 7);
  TransformResult a = register_images(sp.fixed, sp.moving, small_config());
  TransformResult b = register_images(sp.fixed, sp.moving, small_config());
  CHECK(result_json(a) == result_json(b));

  RegistrationConfig other = small_config();
  other.seed = 4;
  TransformResult c = register_images(sp.fixed, sp.moving, other);
  CHECK(result_json(a) != result_json(c));
}

TEST_CASE("result json round-trips through parse and re-serialize") {
  Image fixed = make_test_image(16, 16, 1, 1, 53);
  SynthPair sp = synth_pair(fixed, GroupSpec::Aff2, 0.03, 0.0, 8);
  RegistrationConfig cfg = small_config();
  cfg.loss = LossKind::NCC;
  cfg.solver = SolverKind::Euler;
  cfg.mask = parse_mask("1,1,1,1,0,0", cfg.group);
  TransformResult r = register_images(sp.fixed, sp.moving, cfg);

  std::string text = result_json(r);
  TransformResult back = result_from_json(text);
  CHECK(result_json(back) == text);
  CHECK(back.solver == SolverKind::Euler);
  CHECK(back.loss == LossKind::NCC);
  CHECK(back.mask == r.mask);
  CHECK(back.fixed_dims == r.fixed_dims);

  std::string path =
      (std::filesystem::temp_directory_path() / "result_roundtrip.json").string();
  save_result(path, r);
  TransformResult loaded = load_result(path);
  CHECK(result_json(loaded) == text);
  std::remove(path.c_str());
}

TEST_CASE("malformed result json is rejected with the right code") {
  for (const char* bad : {"not json at all", "{\"group\":\"aff2\"}", "[1,2,3]"}) {
    try {
      result_from_json(bad);
      FAIL("expected a throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidArgument);
    }
  }
}

TEST_CASE("predecessor mode keeps one shared real vector") {
  Image fixed = make_test_image(16, 16, 1, 1, 54);
  SynthPair sp = synth_pair(fixed, GroupSpec::Aff2, 0.02, 0.0, 9);
  RegistrationConfig cfg = small_config();
  cfg.drmime_mode = true;
  cfg.complex_coeffs = false;
  TransformResult r = register_images(sp.fixed, sp.moving, cfg);
  REQUIRE(r.trajectory.size() == 2);
  CHECK(r.trajectory[0] == r.trajectory[1]);  // no per-level flow
  CHECK(r.trajectory[0].size() == 6);         // real coefficients only

  RegistrationConfig bad = cfg;
  bad.complex_coeffs = true;
  CHECK_THROWS_AS(register_images(sp.fixed, sp.moving, bad), Error);
}

TEST_CASE("masked generators stay silent") {
  Image fixed = make_test_image(16, 16, 1, 1, 55);
  SynthPair sp = synth_pair(fixed, GroupSpec::Aff2, 0.02, 0.0, 10);
  RegistrationConfig cfg = small_config();
  cfg.iterations = 15;
  cfg.mask = parse_mask("1,1,0,0,0,0", cfg.group);  // translations only
  TransformResult r = register_images(sp.fixed, sp.moving, cfg);

  for (const auto& row : r.trajectory)
    for (int k = 2; k < 6; ++k) {
      CHECK(row[static_cast<size_t>(k)] == 0.0);      // real part
      CHECK(row[static_cast<size_t>(k + 6)] == 0.0);  // imaginary part
    }
  // the recovered matrix is then a pure (complex) translation.
  CHECK(r.h.re(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.h.re(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.h.re(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(r.h.re(0, 2)) > 0.0);  // translation did move
}

TEST_CASE("forward and inverse matrices invert each other after a run") {
  Image fixed = make_test_image(16, 16, 1, 1, 56);
  SynthPair sp = synth_pair(fixed, GroupSpec::Aff2, 0.03, 0.0, 11);
  TransformResult r = register_images(sp.fixed, sp.moving, small_config());
  ComplexMatrix prod = complex_matmul(r.h, r.h_inv);
  CHECK((prod.re - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(prod.im.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("aligned identical images plateau and stop early") {
  Image fixed = make_test_image(16, 16, 1, 1, 57);
  RegistrationConfig cfg = small_config();
  cfg.iterations = 80;
  cfg.convergence_stop = true;
  TransformResult r = register_images(fixed, fixed, cfg);
  CHECK(r.converged);
  CHECK(r.iterations_run < 80);
  CHECK(r.loss_history.size() == static_cast<size_t>(r.iterations_run));
}

TEST_CASE("history length matches iterations when running to the limit") {
  Image fixed = make_test_image(16, 16, 1, 1, 58);
  SynthPair sp = synth_pair(fixed, GroupSpec::Aff2, 0.02, 0.0, 12);
  TransformResult r = register_images(sp.fixed, sp.moving, small_config());
  CHECK(r.iterations_run == 10);
  CHECK(r.loss_history.size() == 10);
  CHECK_FALSE(r.converged);
  CHECK(r.schedule.scales.size() == 2);
  CHECK(r.schedule.scales[0] == 1.0);
  CHECK(r.schedule.scales[1] == 0.5);
}

TEST_CASE("checkpoints are attached only on request") {
  Image fixed = make_test_image(16, 16, 1, 1, 59);
  SynthPair sp = synth_pair(fixed, GroupSpec::Aff2, 0.02, 0.0, 13);
  RegistrationConfig cfg = small_config();
  cfg.iterations = 3;
  TransformResult bare = register_images(sp.fixed, sp.moving, cfg);
  CHECK(bare.params_checkpoint.empty());

  cfg.emit_params = true;
  TransformResult full = register_images(sp.fixed, sp.moving, cfg);
  REQUIRE_FALSE(full.params_checkpoint.empty());
  ParameterTape params = ParameterTape::from_checkpoint_json(full.params_checkpoint);
  CHECK(params.has_segment("u"));
  CHECK(params.has_segment("phi"));
  CHECK(params.adam_steps() == 3);
}

TEST_CASE("configuration and shape guards") {
  Image fixed = make_test_image(16, 16, 1, 1, 60);
  Image moving = make_test_image(16, 12, 1, 1, 61);
  Image volume = make_test_image(8, 8, 8, 1, 62);

  RegistrationConfig cfg = small_config();
  CHECK_NOTHROW(register_images(fixed, moving, cfg));  // sizes may differ

  RegistrationConfig bad = cfg;
  bad.levels = 0;
  CHECK_THROWS_AS(register_images(fixed, moving, bad), Error);
  bad = cfg;
  bad.downscale = 1.0;
  CHECK_THROWS_AS(register_images(fixed, moving, bad), Error);
  bad = cfg;
  bad.iterations = -1;
  CHECK_THROWS_AS(register_images(fixed, moving, bad), Error);
  bad = cfg;
  bad.lr_u = -0.1;
  CHECK_THROWS_AS(register_images(fixed, moving, bad), Error);
  bad = cfg;
  bad.n_terms = 0;
  CHECK_THROWS_AS(register_images(fixed, moving, bad), Error);

  // a spatial-rank mismatch between group and images is a dimension error.
  bad = cfg;
  bad.group = GroupSpec::SE3;
  try {
    register_images(fixed, moving, bad);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Dimension);
  }
  bad = cfg;
  try {
    register_images(volume, moving, bad);  // 3-D vs 2-D pair
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Dimension);
  }
}

TEST_CASE("volumes register with the rigid group") {
  Image img = make_test_image(12, 10, 9, 1, 63);
  SynthPair sp = synth_pair(img, GroupSpec::SE3, 0.02, 0.0, 14);
  RegistrationConfig cfg;
  cfg.group = GroupSpec::SE3;
  cfg.levels = 2;
  cfg.iterations = 5;
  cfg.seed = 6;
  TransformResult r = register_images(sp.fixed, sp.moving, cfg);
  CHECK(r.h.re.rows() == 4);
  CHECK(r.trajectory[0].size() == 12);  // six generators, both parts
  CHECK(naed(sp.landmarks, r.h_inv) < 0.5);  // sane, not asserting quality
}

// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <vector>

#include "odecme/gradcheck.hpp"

using namespace odecme;

TEST_CASE("the checker itself accepts a correct gradient") {
  GradCase c;
  c.name = "known-good";
  c.x0 = {0.3, -0.2};
  c.value = [](const std::vector<double>& x) {
    return std::vector<double>{x[0] * x[0] + 3.0 * x[1]};
  };
  c.grad = [](const std::vector<double>& x, int) {
    return std::vector<double>{2.0 * x[0], 3.0};
  };
  GradReport r = run_gradcheck(c);
  CHECK(r.pass);
  CHECK(r.n_in == 2);
}

TEST_CASE("the checker catches a planted wrong gradient") {
  GradCase c;
  c.name = "planted-bug";
  c.x0 = {0.3, -0.2};
  c.value = [](const std::vector<double>& x) {
    return std::vector<double>{x[0] * x[0] + 3.0 * x[1]};
  };
  c.grad = [](const std::vector<double>& x, int) {
    return std::vector<double>{2.0 * x[0], 2.0};  // wrong second slot
  };
  CHECK_FALSE(run_gradcheck(c).pass);
}

TEST_CASE("every registered gradient case") {
  const auto& cases = registered_grad_cases();
  REQUIRE(cases.size() > 25);  // tape ops, algebra, warps, flows, losses, objectives
  for (const GradCase& c : cases) {
    auto t0 = std::chrono::steady_clock::now();
    GradReport r = run_gradcheck(c);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    INFO(r.name << ": worst rel " << r.worst_rel << " at input " << r.worst_in
                << ", output " << r.worst_out << " (tol " << r.tol << ")");
    CHECK(r.pass);
    std::printf("  %-32s %5d in %3d out  worst %.3e  %.2fs\n", r.name.c_str(),
                r.n_in, r.n_out, r.worst_rel, secs);
  }
}

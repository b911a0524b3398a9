#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "metapop/error.hpp"
#include "metapop/landscape.hpp"
#include "metapop/random.hpp"

using namespace metapop;

namespace {

Landscape random_landscape(std::size_t n, std::uint64_t seed) {
  RandomStream rng(seed);
  std::vector<Patch> patches(n);
  for (auto& p : patches) p = {{5.0 * rng.uniform(), 5.0 * rng.uniform()}, 0.1 + 3.0 * rng.uniform()};
  return Landscape::build(patches, ExponentialKernel{0.7});
}

}  // namespace

TEST_CASE("exponential kernel at distance ln 2 is one half") {
  const auto l = Landscape::build({{{0.0}, 1.0}, {{std::log(2.0)}, 1.0}}, ExponentialKernel{1.0});
  CHECK(l.kernel(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(l.kernel(1, 0) == l.kernel(0, 1));
  CHECK(l.kernel(0, 0) == 0.0);
}

TEST_CASE("top-hat kernel height is the inverse ball volume") {
  const auto l1 = Landscape::build({{{0.0}, 1.0}, {{1.0}, 1.0}, {{3.5}, 1.0}}, TopHatKernel{2.0});
  CHECK(l1.kernel(0, 1) == doctest::Approx(0.25));
  CHECK(l1.kernel(0, 2) == 0.0);
  CHECK(l1.kernel(1, 2) == 0.0);

  const auto l2 = Landscape::build({{{0.0, 0.0}, 1.0}, {{1.0, 1.0}, 1.0}}, TopHatKernel{2.0});
  CHECK(l2.kernel(0, 1) == doctest::Approx(1.0 / (std::numbers::pi * 4.0)));
  CHECK(unit_ball_volume(1) == doctest::Approx(2.0));
  CHECK(unit_ball_volume(3) == doctest::Approx(4.0 * std::numbers::pi / 3.0));
}

TEST_CASE("ring kernel links neighbours and closes the cycle") {
  std::vector<Patch> patches;
  for (int i = 0; i < 4; ++i) patches.push_back({{double(i + 1)}, 1.0});
  const auto l = Landscape::build(patches, RingKernel{});
  const double expected[4][4] = {{0, 1, 0, 1}, {1, 0, 1, 0}, {0, 1, 0, 1}, {1, 0, 1, 0}};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(l.kernel(i, j) == expected[i][j]);
  }
  const auto two = Landscape::build({{{1.0}, 1.0}, {{2.0}, 1.0}}, RingKernel{});
  CHECK(two.kernel(0, 1) == 1.0);

  const auto gen = generate_landscape(RingLayout{4}, RingKernel{});
  for (int i = 0; i < 4; ++i) {
    CHECK(gen.patch(i).z[0] == double(i + 1));
    CHECK(gen.patch(i).a == 1.0);
    for (int j = 0; j < 4; ++j) CHECK(gen.kernel(i, j) == expected[i][j]);
  }
}

TEST_CASE("build rejects malformed input") {
  CHECK_THROWS_AS(Landscape::build({{{0.0}, 1.0}, {{0.0, 1.0}, 1.0}}, ExponentialKernel{1.0}), Error);
  CHECK_THROWS_AS(Landscape::build({{{0.0}, 1.0}}, ExponentialKernel{0.0}), Error);
  CHECK_THROWS_AS(Landscape::build({{{0.0}, 1.0}}, TopHatKernel{-1.0}), Error);
  CHECK_THROWS_AS(Landscape::build({{{0.0}, 0.0}}, ExponentialKernel{1.0}), Error);
  CHECK_THROWS_AS(Landscape::build({}, ExponentialKernel{1.0}), Error);
  const std::vector<Patch> two{{{0.0}, 1.0}, {{1.0}, 1.0}};
  CHECK_THROWS_AS(Landscape::build(two, ExplicitKernel{{0, 1, 2, 0}}), Error);
  CHECK_THROWS_AS(Landscape::build(two, ExplicitKernel{{0, -1, -1, 0}}), Error);
  CHECK_THROWS_AS(Landscape::build(two, ExplicitKernel{{1, 1, 1, 0}}), Error);
  CHECK_THROWS_AS(Landscape::build(two, ExplicitKernel{{0, 1, 1}}), Error);
  CHECK_NOTHROW(Landscape::build(two, ExplicitKernel{{0, 0.3, 0.3, 0}}));
}

TEST_CASE("connectivity examples") {
  const auto l = Landscape::build({{{0.0}, 2.0}, {{1.0}, 3.0}}, ExplicitKernel{{0, 0.5, 0.5, 0}});
  const auto s = l.connectivity(std::vector<double>{1.0, 1.0});
  CHECK(s[0] == doctest::Approx(0.75));
  CHECK(s[1] == doctest::Approx(0.5));
  const auto zero = l.connectivity(std::vector<double>{0.0, 0.0});
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);

  const auto ring = generate_landscape(RingLayout{3}, RingKernel{});
  const auto sr = ring.connectivity(std::vector<std::uint8_t>{1, 0, 1});
  // Hand sums: S_1 = (x_2 + x_3)/3, S_2 = (x_1 + x_3)/3, S_3 = (x_1 + x_2)/3.
  CHECK(sr[0] == doctest::Approx(1.0 / 3.0));
  CHECK(sr[1] == doctest::Approx(2.0 / 3.0));
  CHECK(sr[2] == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS_AS(l.connectivity(std::vector<double>{1.0}), Error);
  CHECK_THROWS_AS(l.connectivity(std::vector<double>{1.5, 0.0}), Error);
  CHECK_THROWS_AS(l.connectivity(std::vector<double>{-0.1, 0.0}), Error);
  CHECK_THROWS_AS(l.connectivity(std::vector<std::uint8_t>{2, 0}), Error);
}

TEST_CASE("single patch has zero connectivity") {
  const auto l = Landscape::build({{{0.0}, 4.0}}, ExponentialKernel{1.0});
  CHECK(l.connectivity(std::vector<double>{1.0})[0] == 0.0);
  CHECK(l.max_connectivity()[0] == 0.0);
}

TEST_CASE("uniform layout is deterministic, weighted by n and inside the box") {
  const auto a = generate_landscape(UniformBoxLayout{100, 2, 7}, ExponentialKernel{1.0});
  const auto b = generate_landscape(UniformBoxLayout{100, 2, 7}, ExponentialKernel{1.0});
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(a.patch(i).z == b.patch(i).z);
    CHECK(a.patch(i).a == 100.0);
  }
  const auto big = generate_landscape(UniformBoxLayout{1000, 1, 1}, ExponentialKernel{1.0});
  for (const auto& p : big.patches()) {
    CHECK(p.z[0] >= 0.0);
    CHECK(p.z[0] <= 1000.0);
  }
  const auto side = std::sqrt(100.0);
  for (const auto& p : a.patches()) {
    CHECK(p.z[0] <= side);
    CHECK(p.z[1] <= side);
  }
}

TEST_CASE("grid layout fills the lattice row by row") {
  const auto g = generate_landscape(GridLayout{5, 2}, ExponentialKernel{1.0});
  REQUIRE(g.size() == 5);
  CHECK(g.patch(0).z == std::vector<double>{0.0, 0.0});
  for (const auto& p : g.patches()) {
    CHECK(p.a == 1.0);
    CHECK(p.z[0] <= 2.0);
    CHECK(p.z[1] <= 2.0);
  }
}

TEST_CASE("connectivity is monotone and bounded by its value at the all-one state") {
  const auto l = random_landscape(30, 3);
  RandomStream rng(11);
  const auto& top = l.max_connectivity();
  const auto full = l.connectivity(std::vector<double>(30, 1.0));
  for (std::size_t i = 0; i < 30; ++i) CHECK(full[i] == doctest::Approx(top[i]).epsilon(1e-14));
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(30), y(30);
    for (std::size_t i = 0; i < 30; ++i) {
      x[i] = rng.uniform();
      y[i] = std::min(1.0, x[i] + 0.3 * rng.uniform());
    }
    const auto sx = l.connectivity(x);
    const auto sy = l.connectivity(y);
    for (std::size_t i = 0; i < 30; ++i) {
      CHECK(sx[i] <= sy[i] + 1e-15);
      CHECK(sy[i] <= top[i] + 1e-12);
    }
  }
}

TEST_CASE("relabelling patches permutes connectivity") {
  const auto l = random_landscape(12, 5);
  std::vector<std::size_t> perm(12);
  for (std::size_t i = 0; i < 12; ++i) perm[i] = (7 * i + 3) % 12;
  std::vector<Patch> permuted(12);
  for (std::size_t i = 0; i < 12; ++i) permuted[i] = l.patch(perm[i]);
  const auto lp = Landscape::build(permuted, ExponentialKernel{0.7});
  RandomStream rng(2);
  std::vector<double> x(12), xp(12);
  for (auto& v : x) v = rng.uniform();
  for (std::size_t i = 0; i < 12; ++i) xp[i] = x[perm[i]];
  const auto s = l.connectivity(x);
  const auto sp = lp.connectivity(xp);
  for (std::size_t i = 0; i < 12; ++i) CHECK(sp[i] == doctest::Approx(s[perm[i]]).epsilon(1e-13));
}

TEST_CASE("kernel matrix is bitwise symmetric") {
  const auto l = random_landscape(40, 9);
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t j = 0; j < 40; ++j) CHECK(l.kernel(i, j) == l.kernel(j, i));
  }
  const auto t = generate_landscape(UniformBoxLayout{60, 2, 4}, TopHatKernel{2.5});
  for (std::size_t i = 0; i < 60; ++i) {
    for (std::size_t j = 0; j < 60; ++j) CHECK(t.kernel(i, j) == t.kernel(j, i));
  }
}

TEST_CASE("sparse fast path matches the defining sum") {
  const auto l = generate_landscape(UniformBoxLayout{50, 2, 8}, TopHatKernel{1.5});
  RandomStream rng(4);
  std::vector<double> x(50);
  for (auto& v : x) v = rng.uniform();
  const auto s = l.connectivity(x);
  for (std::size_t i = 0; i < 50; ++i) {
    double direct = 0.0;
    for (std::size_t j = 0; j < 50; ++j) {
      if (j != i) direct += x[j] * l.patch(j).a * l.kernel(j, i);
    }
    CHECK(s[i] == doctest::Approx(direct / 50.0).epsilon(1e-13));
  }
}

TEST_CASE("rescaling weights and kernel leaves connectivity unchanged") {
  const auto l = random_landscape(20, 6);
  RandomStream rng(8);
  std::vector<double> x(20);
  for (auto& v : x) v = rng.uniform();
  const auto s = l.connectivity(x);
  for (double c : {0.1, 4.0, 10.0}) {
    const auto r = l.rescaled(c);
    CHECK(r.patch(3).a == doctest::Approx(c * l.patch(3).a));
    const auto sr = r.connectivity(x);
    for (std::size_t i = 0; i < 20; ++i) CHECK(sr[i] == doctest::Approx(s[i]).epsilon(1e-12));
  }
}

TEST_CASE("landscape files round-trip") {
  const auto l = generate_landscape(UniformBoxLayout{6, 2, 3}, TopHatKernel{2.0});
  std::stringstream buf;
  write_landscape(buf, l);
  const auto back = read_landscape(buf);
  REQUIRE(back.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(back.patch(i).z == l.patch(i).z);
    CHECK(back.patch(i).a == l.patch(i).a);
    for (std::size_t j = 0; j < 6; ++j) CHECK(back.kernel(i, j) == l.kernel(i, j));
  }

  std::stringstream explicit_text("1 2\n0 1\n1 1\nkernel matrix\n0 0.25\n0.25 0\n");
  const auto e = read_landscape(explicit_text);
  CHECK(e.kernel(0, 1) == 0.25);

  std::stringstream bare("1 2\n0 1\n1 1\n");
  CHECK(read_landscape(bare).kernel(0, 1) == doctest::Approx(std::exp(-1.0)));

  std::stringstream bad("2 3\n0 0 1\n");
  CHECK_THROWS_AS(read_landscape(bad), Error);
}

TEST_CASE("kernel specs parse") {
  CHECK(std::get<ExponentialKernel>(parse_kernel("exponential:2.5")).alpha == 2.5);
  CHECK(std::get<TopHatKernel>(parse_kernel("tophat:3")).radius == 3.0);
  CHECK(std::holds_alternative<RingKernel>(parse_kernel("ring")));
  CHECK_THROWS_AS(parse_kernel("gaussian:1"), Error);
  CHECK_THROWS_AS(parse_kernel("tophat"), Error);
}

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rcm/environment.hpp"
#include "rcm/rng.hpp"
#include "rcm/stats.hpp"

using namespace rcm;

TEST_CASE("constant law fills every edge with the constant") {
  LatticeSpec spec(2, 4, Boundary::free);
  Environment env = sample_environment(spec, ConductanceLaw::constant(1.0), 7);
  for (Vertex v = 0; v < spec.vertex_count(); ++v)
    for (int axis = 0; axis < spec.d; ++axis) {
      if (!spec.edge_exists(v, axis)) {
        CHECK(env.conductance(v, axis) == 0.0);
      } else {
        CHECK(env.conductance(v, axis) == 1.0);
      }
    }
}

TEST_CASE("identical (spec, law, seed) reproduces bit-identical values") {
  LatticeSpec spec(2, 32, Boundary::torus);
  auto law = ConductanceLaw::zero_uniform_mixture(0.8);
  Environment a = sample_environment(spec, law, 99);
  Environment b = sample_environment(spec, law, 99);
  REQUIRE(a.values.size() == b.values.size());
  for (size_t k = 0; k < a.values.size(); ++k) CHECK(a.values[k] == b.values[k]);
  Environment c = sample_environment(spec, law, 100);
  bool any_diff = false;
  for (size_t k = 0; k < a.values.size(); ++k) any_diff |= a.values[k] != c.values[k];
  CHECK(any_diff);
}

TEST_CASE("parallel sampler matches the serial reference bit for bit") {
  LatticeSpec spec(3, 16, Boundary::torus);
  auto law = ConductanceLaw::polynomial_tail(0.5);
  Environment par = sample_environment(spec, law, 4242);
  Environment ser = sample_environment_serial(spec, law, 4242);
  REQUIRE(par.values.size() == ser.values.size());
  for (size_t k = 0; k < par.values.size(); ++k) CHECK(par.values[k] == ser.values[k]);
}

TEST_CASE("bernoulli open-edge fraction lands in the exact 99.9% binomial band") {
  LatticeSpec spec(2, 100, Boundary::torus);
  CHECK(spec.edge_count() == 20000);
  // Central interval for Bin(20000, 0.6) at level 99.9%, from the lgamma
  // pmf scan; frozen values checked against the oracle at runtime.
  BinomialCI ci = binomial_exact_ci(20000, 0.6, 0.999);
  CHECK(ci.k_lo == 11772);
  CHECK(ci.k_hi == 12228);
  Environment env = sample_environment(spec, ConductanceLaw::bernoulli(0.6), 1);
  std::int64_t open = 0;
  for (double v : env.values) open += v > 0.0 ? 1 : 0;
  CHECK(open >= ci.k_lo);
  CHECK(open <= ci.k_hi);
}

TEST_CASE("threshold masks") {
  LatticeSpec spec(2, 4, Boundary::torus);
  SUBCASE("constant 1, xi = 0.5: all edges open") {
    Environment env = sample_environment(spec, ConductanceLaw::constant(1.0), 3);
    EdgeMask mask = threshold_mask(env, 0.5);
    for (auto b : mask.open) CHECK(b == 1);
  }
  SUBCASE("values {0, 0.3, 0.8}, xi = 0.5: exactly the 0.8 edges") {
    Environment env = sample_environment(spec, ConductanceLaw::constant(0.0), 3);
    env.values[0] = 0.0;
    env.values[1] = 0.3;
    env.values[2] = 0.8;
    EdgeMask mask = threshold_mask(env, 0.5);
    CHECK(mask.open[0] == 0);
    CHECK(mask.open[1] == 0);
    CHECK(mask.open[2] == 1);
  }
  SUBCASE("xi = 0 is the strict positivity field") {
    Environment env = sample_environment(spec, ConductanceLaw::zero_uniform_mixture(0.5), 17);
    EdgeMask mask = threshold_mask(env, 0.0);
    for (size_t k = 0; k < env.values.size(); ++k)
      CHECK(static_cast<bool>(mask.open[k]) == (env.values[k] > 0.0));
  }
}

TEST_CASE("weight_at") {
  SUBCASE("constant 1 on the torus gives 2d everywhere") {
    LatticeSpec spec(3, 4, Boundary::torus);
    Environment env = sample_environment(spec, ConductanceLaw::constant(1.0), 5);
    CHECK(weight_at(env, 0) == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(weight_at(env, spec.vertex_count() - 1) == doctest::Approx(6.0).epsilon(1e-15));
  }
  SUBCASE("isolated vertex has weight zero") {
    LatticeSpec spec(2, 4, Boundary::free);
    Environment env = sample_environment(spec, ConductanceLaw::constant(0.0), 5);
    CHECK(weight_at(env, 5) == 0.0);
  }
  SUBCASE("random environment equals the independent re-summation oracle") {
    LatticeSpec spec(2, 8, Boundary::torus);
    Environment env = sample_environment(spec, ConductanceLaw::zero_uniform_mixture(0.7), 11);
    for (Vertex x = 0; x < spec.vertex_count(); ++x) {
      Coords c = spec.decode(x);
      double expect = 0.0;
      for (int axis = 0; axis < spec.d; ++axis) {
        expect += env.values[static_cast<size_t>(x * spec.d + axis)];
        Coords cm = c;
        cm[axis] = (cm[axis] - 1 + spec.L) % spec.L;
        expect += env.values[static_cast<size_t>(spec.encode(cm) * spec.d + axis)];
      }
      CHECK(weight_at(env, x) == doctest::Approx(expect).epsilon(1e-15));
    }
  }
  SUBCASE("out-of-range vertex is an index error") {
    LatticeSpec spec(2, 4, Boundary::torus);
    Environment env = sample_environment(spec, ConductanceLaw::constant(1.0), 5);
    CHECK_THROWS_AS(weight_at(env, spec.vertex_count()), std::out_of_range);
  }
}

TEST_CASE("edge symmetry: the same value from either endpoint") {
  LatticeSpec spec(2, 10, Boundary::torus);
  Environment env = sample_environment(spec, ConductanceLaw::zero_uniform_mixture(0.9), 23);
  SplitMix64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Vertex x = static_cast<Vertex>(rng.next_half_open() * static_cast<double>(spec.vertex_count()));
    int axis = static_cast<int>(rng.next_half_open() * spec.d);
    Vertex y = spec.neighbor(x, axis, +1);
    CHECK(env.conductance_between(x, y) == env.conductance_between(y, x));
  }
}

TEST_CASE("polynomial tail CDF matches a^gamma within 3 standard errors") {
  LatticeSpec spec(2, 256, Boundary::torus);  // 131072 edges
  double gamma = 0.7;
  Environment env = sample_environment(spec, ConductanceLaw::polynomial_tail(gamma), 31);
  auto cdf_at = [&](double a) {
    std::int64_t cnt = 0;
    for (double v : env.values) cnt += v <= a ? 1 : 0;
    return static_cast<double>(cnt) / static_cast<double>(env.values.size());
  };
  std::int64_t n_edges = spec.edge_count();
  REQUIRE(n_edges >= 100000);
  for (double a : {0.1, 0.5, 1.0}) {
    double expect = std::pow(a, gamma);
    double se = std::sqrt(std::max(expect * (1 - expect), 1e-12) / static_cast<double>(n_edges));
    CHECK(std::abs(cdf_at(a) - expect) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("environment file round trip is bit-exact") {
  LatticeSpec spec(2, 12, Boundary::free);
  Environment env = sample_environment(spec, ConductanceLaw::two_point(0.5, 0.25, 0.75), 77);
  std::string path = "test_roundtrip.rcme";
  write_environment(env, path);
  Environment back = read_environment(path);
  CHECK(back.spec.d == env.spec.d);
  CHECK(back.spec.L == env.spec.L);
  CHECK((back.spec.boundary == env.spec.boundary));
  CHECK(back.seed == env.seed);
  CHECK(back.law_tag == env.law_tag);
  REQUIRE(back.values.size() == env.values.size());
  for (size_t k = 0; k < env.values.size(); ++k) CHECK(back.values[k] == env.values[k]);

  // Second write produces byte-identical files.
  std::string path2 = "test_roundtrip2.rcme";
  write_environment(back, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("law parameter validation") {
  CHECK_THROWS_AS(ConductanceLaw::bernoulli(1.5), std::invalid_argument);
  CHECK_THROWS_AS(ConductanceLaw::two_point(0.5, 0.8, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(ConductanceLaw::polynomial_tail(0.0), std::invalid_argument);
  CHECK_THROWS_AS(ConductanceLaw::constant(1.5), std::invalid_argument);
  CHECK_NOTHROW(ConductanceLaw::two_point(1.0, 0.5, 0.5));
  CHECK(ConductanceLaw::parse("zum:0.75").tag() == "zum:0.75");
  CHECK_THROWS_AS(ConductanceLaw::parse("nonsense:1"), std::invalid_argument);
}

TEST_CASE("lattice edge counts match the d-dimensional formulas") {
  LatticeSpec torus(3, 5, Boundary::torus);
  CHECK(torus.vertex_count() == 125);
  CHECK(torus.edge_count() == 3 * 125);
  LatticeSpec box(3, 5, Boundary::free);
  CHECK(box.edge_count() == 3 * 25 * 4);
}

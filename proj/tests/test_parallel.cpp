#include <doctest.h>

#include <omp.h>

#include "rcm/effective.hpp"
#include "rcm/environment.hpp"
#include "rcm/experiments.hpp"
#include "rcm/heat_kernel.hpp"
#include "rcm/renorm.hpp"

using namespace rcm;

// The parallel kernels must reproduce the serial reference exactly: per-edge
// draws are counter-based, per-replica streams are derived from the master
// seed, and reductions run in a fixed order.

TEST_CASE("environment sampling is independent of the thread count") {
  LatticeSpec spec(2, 64, Boundary::torus);
  auto law = ConductanceLaw::zero_uniform_mixture(0.8);
  int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  Environment one = sample_environment(spec, law, 31337);
  omp_set_num_threads(std::max(2, saved));
  Environment many = sample_environment(spec, law, 31337);
  omp_set_num_threads(saved);
  for (size_t k = 0; k < one.values.size(); ++k) CHECK(one.values[k] == many.values[k]);
}

TEST_CASE("effective conductances: parallel hole solves match the serial pass") {
  LatticeSpec spec(2, 24, Boundary::torus);
  Environment env = sample_environment(spec, ConductanceLaw::zero_uniform_mixture(0.85), 5150);
  XiStructure xs = build_xi_structure(env, 0.3);
  EffectiveOptions serial;
  serial.parallel = false;
  EffectiveWeights a = effective_conductances(env, xs, Window::whole(), {});
  EffectiveWeights b = effective_conductances(env, xs, Window::whole(), serial);
  REQUIRE(a.entries.size() == b.entries.size());
  for (size_t k = 0; k < a.entries.size(); ++k) {
    CHECK(a.entries[k].i == b.entries[k].i);
    CHECK(a.entries[k].j == b.entries[k].j);
    CHECK(a.entries[k].w == b.entries[k].w);
  }
  for (size_t k = 0; k < a.return_mass.size(); ++k)
    CHECK(a.return_mass[k] == b.return_mass[k]);
}

TEST_CASE("box classification: parallel and serial agree block by block") {
  LatticeSpec spec(2, 54, Boundary::free);
  auto masks = sample_mask_pair(spec, 0.85, 0.95, 777);
  ClassifyOptions serial;
  serial.parallel = false;
  BoxClassification a = classify_boxes(masks.first, masks.second, 4);
  BoxClassification b = classify_boxes(masks.first, masks.second, 4, serial);
  for (std::int64_t blk = 0; blk < a.grid.block_count; ++blk) {
    CHECK(a.color[static_cast<size_t>(blk)] == b.color[static_cast<size_t>(blk)]);
    CHECK(a.immaculate[static_cast<size_t>(blk)] == b.immaculate[static_cast<size_t>(blk)]);
    CHECK(a.crossing_cluster[static_cast<size_t>(blk)] ==
          b.crossing_cluster[static_cast<size_t>(blk)]);
  }
}

TEST_CASE("replica runner: parallel reduction equals the serial loop") {
  auto worker = [](std::int64_t rep) {
    SplitMix64 rng(derive_stream(4242, static_cast<std::uint64_t>(rep)));
    double acc = 0.0;
    for (int k = 0; k < 100; ++k) acc += rng.next_half_open();
    return acc;
  };
  auto par = run_replicas<double>(500, worker, true);
  auto ser = run_replicas<double>(500, worker, false);
  for (size_t k = 0; k < par.size(); ++k) CHECK(par[k] == ser[k]);
}

TEST_CASE("heat kernel matvec is thread-count independent") {
  LatticeSpec spec(2, 16, Boundary::torus);
  Environment env = sample_environment(spec, ConductanceLaw::zero_uniform_mixture(0.9), 99);
  SymmetricChain chain = full_chain(env);
  int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  auto p1 = heat_kernel_exact(chain, 0, 7.5);
  omp_set_num_threads(std::max(2, saved));
  auto p2 = heat_kernel_exact(chain, 0, 7.5);
  omp_set_num_threads(saved);
  for (size_t k = 0; k < p1.size(); ++k) CHECK(p1[k] == p2[k]);
}

TEST_CASE("walk ensembles reproduce bit-identically regardless of scheduling") {
  EnvRecipe recipe;
  recipe.d = 2;
  recipe.L = 32;
  recipe.law = ConductanceLaw::zero_uniform_mixture(0.8);
  recipe.env_seed = 21;
  int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  auto a = estimate_sigma2(recipe, RunMode::quenched, 0.0, {25.0}, 300, 5,
                           StartPolicy::center_alpha_giant);
  omp_set_num_threads(std::max(2, saved));
  auto b = estimate_sigma2(recipe, RunMode::quenched, 0.0, {25.0}, 300, 5,
                           StartPolicy::center_alpha_giant);
  omp_set_num_threads(saved);
  CHECK(a.sigma2.mean == b.sigma2.mean);
  CHECK(a.sigma2.se == b.sigma2.se);
}

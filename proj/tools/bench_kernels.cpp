// Wall-clock comparison of the OpenMP kernels against their serial
// references: edge sampling, replica walk ensembles, hole solves, box
// classification and the uniformization matvec.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "rcm/effective.hpp"
#include "rcm/environment.hpp"
#include "rcm/experiments.hpp"
#include "rcm/heat_kernel.hpp"
#include "rcm/renorm.hpp"

using namespace rcm;

namespace {

double time_of(const std::function<void()>& fn) {
  auto t0 = std::chrono::steady_clock::now();
  fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

void report(const std::string& name, double serial, double parallel) {
  std::printf("%-28s serial %8.3fs  parallel %8.3fs  speedup %.2fx\n", name.c_str(), serial,
              parallel, serial / parallel);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());

  {
    LatticeSpec spec(2, 2048, Boundary::torus);
    auto law = ConductanceLaw::zero_uniform_mixture(0.8);
    double ts = time_of([&] { sample_environment_serial(spec, law, 7); });
    double tp = time_of([&] { sample_environment(spec, law, 7); });
    report("edge sampling 2048^2", ts, tp);
  }

  {
    EnvRecipe recipe;
    recipe.d = 2;
    recipe.L = 128;
    recipe.law = ConductanceLaw::zero_uniform_mixture(0.8);
    recipe.env_seed = 3;
    Environment env = make_environment(recipe);
    auto worker = [&](std::int64_t rep) {
      SplitMix64 rng(derive_stream(11, static_cast<std::uint64_t>(rep)));
      ProbeTargets t;
      t.real_times = {400.0};
      return probe_walk(env, nullptr, env.spec.center_vertex(), t, rng).jumps;
    };
    double ts = time_of([&] { run_replicas<std::int64_t>(4000, worker, false); });
    double tp = time_of([&] { run_replicas<std::int64_t>(4000, worker, true); });
    report("walk replicas 4000x400", ts, tp);
  }

  {
    LatticeSpec spec(2, 192, Boundary::torus);
    Environment env = sample_environment(spec, ConductanceLaw::zero_uniform_mixture(0.78), 13);
    XiStructure xs = build_xi_structure(env, 0.08);
    EffectiveOptions serial;
    serial.parallel = false;
    double ts = time_of([&] { effective_conductances(env, xs, Window::whole(), serial); });
    double tp = time_of([&] { effective_conductances(env, xs, Window::whole(), {}); });
    std::printf("  (%zu holes)\n", xs.holes.holes.size());
    report("hole solves 192^2", ts, tp);
  }

  {
    LatticeSpec spec(2, 189, Boundary::free);
    auto masks = sample_mask_pair(spec, 0.85, 0.97, 5);
    ClassifyOptions serial;
    serial.parallel = false;
    double ts = time_of([&] { classify_boxes(masks.first, masks.second, 8, serial); });
    double tp = time_of([&] { classify_boxes(masks.first, masks.second, 8); });
    report("box classification N=8", ts, tp);
  }

  {
    LatticeSpec spec(2, 192, Boundary::torus);
    Environment env = sample_environment(spec, ConductanceLaw::constant(1.0), 2);
    SymmetricChain chain = full_chain(env);
    int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    double ts = time_of([&] { heat_kernel_exact(chain, 0, 120.0); });
    omp_set_num_threads(saved);
    double tp = time_of([&] { heat_kernel_exact(chain, 0, 120.0); });
    report("uniformization 192^2 t=120", ts, tp);
  }

  return 0;
}

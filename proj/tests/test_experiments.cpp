#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "rcm/experiments.hpp"
#include "rcm/heat_kernel.hpp"

using namespace rcm;

TEST_CASE("probe agrees with the stored-trajectory code path") {
  LatticeSpec spec(2, 24, Boundary::torus);
  Environment env = sample_environment(spec, ConductanceLaw::zero_uniform_mixture(0.85), 808);
  XiStructure xs = build_xi_structure(env, 0.25);
  Vertex start = center_nearest_giant(env, xs.prime_labeling, xs.cxi_id);
  const double horizon = 60.0;

  for (std::uint64_t s = 0; s < 10; ++s) {
    SplitMix64 rng_a(derive_stream(5000, s));
    SplitMix64 rng_b(derive_stream(5000, s));
    Trajectory traj = simulate_walk(env, start, horizon, rng_a);
    TimeChange tc = build_time_change(traj, xs);

    ProbeTargets t;
    t.real_times = {10.0, 25.0, 49.5};
    t.a_horizon = 50.0;
    t.sup_horizon = 50.0;
    t.pair_time = 40.0;
    ProbeOutcome o = probe_walk(env, &xs, start, t, rng_b);

    for (size_t k = 0; k < t.real_times.size(); ++k) {
      auto expect = traj.displacement_at(t.real_times[k]);
      for (int c = 0; c < spec.d; ++c) CHECK(o.at_real[k][c] == expect[c]);
    }
    CHECK(o.a_fraction == doctest::Approx(tc.a(50.0) / 50.0).epsilon(1e-12));

    // sup over event positions up to T
    double sup = 0.0;
    auto upd = [&](const std::array<std::int32_t, kMaxDim>& disp) {
      double s2 = 0.0;
      for (int c = 0; c < spec.d; ++c)
        s2 += static_cast<double>(disp[c]) * static_cast<double>(disp[c]);
      sup = std::max(sup, std::sqrt(s2));
    };
    upd(traj.displacement_at(0.0));
    for (std::int64_t k = 0; k < traj.jump_count(); ++k)
      if (traj.times[static_cast<size_t>(k)] <= 50.0)
        upd(traj.displacement_at(traj.times[static_cast<size_t>(k)]));
    CHECK(o.sup_norm == doctest::Approx(sup).epsilon(1e-12));
  }
}

TEST_CASE("homogeneous sigma^2 is 1/2 within 3 SE (small run)") {
  EnvRecipe recipe;
  recipe.d = 2;
  recipe.L = 64;
  recipe.boundary = Boundary::torus;
  recipe.law = ConductanceLaw::constant(1.0);
  recipe.env_seed = 17;
  auto est = estimate_sigma2(recipe, RunMode::quenched, 0.0, {50.0}, 3000, 901,
                             StartPolicy::center_alpha_giant);
  CHECK(est.start_substitutions == 0);
  CHECK(std::abs(est.sigma2.mean - 0.5) <= 3.0 * est.sigma2.se);
  CHECK(est.sigma2.se < 0.03);
}

TEST_CASE("two-point law at a single value behaves like the constant environment") {
  // Jump probabilities are invariant under global conductance scaling and
  // waits are Exp(1) either way, so matching walk seeds give identical paths.
  EnvRecipe half;
  half.d = 2;
  half.L = 32;
  half.law = ConductanceLaw::two_point(1.0, 0.5, 0.5);
  half.env_seed = 5;
  EnvRecipe one = half;
  one.law = ConductanceLaw::constant(1.0);
  auto est_half =
      estimate_sigma2(half, RunMode::quenched, 0.0, {30.0}, 500, 33, StartPolicy::center_alpha_giant);
  auto est_one =
      estimate_sigma2(one, RunMode::quenched, 0.0, {30.0}, 500, 33, StartPolicy::center_alpha_giant);
  CHECK(est_half.sigma2.mean == doctest::Approx(est_one.sigma2.mean).epsilon(1e-12));
}

TEST_CASE("temporal and spatial c(xi) estimators agree; c grows as xi shrinks") {
  // The stationary start makes E[A(T)/T] equal the spatial estimator exactly;
  // xi = 0.2 keeps the hole mass large enough for an honest standard error.
  LatticeSpec spec(2, 96, Boundary::torus);
  Environment env = sample_environment(spec, ConductanceLaw::zero_uniform_mixture(0.75), 404);
  XiStructure xs = build_xi_structure(env, 0.2);
  auto est = estimate_c_xi(env, xs, 150.0, 600, 71, StartPolicy::stationary);
  CHECK(est.e1.count == 600);
  CHECK(est.e1.se > 0.0);
  CHECK(std::abs(est.e1.mean - est.e2) <= 3.0 * est.e1.se);
  // Monotone trend through the exact spatial estimator.
  double c_small = spatial_c_xi(env, build_xi_structure(env, 0.01));
  double c_big = est.e2;
  CHECK(c_small > c_big);
  CHECK(est.e2 <= 1.0);
}

TEST_CASE("variance identity smoke run produces a coherent report") {
  EnvRecipe recipe;
  recipe.d = 2;
  recipe.L = 96;
  recipe.law = ConductanceLaw::zero_uniform_mixture(0.8);
  recipe.env_seed = 11;
  auto rep = verify_variance_identity(recipe, 0.1, 120.0, 90.0, 1500, 505);
  CHECK(rep.sigma2 > 0.0);
  CHECK(rep.sigma2_xi > 0.0);
  CHECK(rep.c_xi > 0.5);
  CHECK(rep.c_xi <= 1.0);
  CHECK(rep.pooled_se > 0.0);
  CHECK(rep.product == doctest::Approx(rep.c_xi * rep.sigma2_xi));
  // sigma^2(xi) must exceed sigma^2: the time-changed walk compresses time.
  CHECK(rep.sigma2_xi > rep.sigma2 - 3 * rep.pooled_se);
}

TEST_CASE("KS test machinery") {
  SUBCASE("degenerate samples are rejected hard") {
    std::vector<double> flat(2000, 0.37);
    KsResult ks = gaussianity_test(flat);
    CHECK(ks.p < 1e-6);
  }
  SUBCASE("true normal samples are calibrated") {
    auto rep = gaussianity_calibration(400, 1500, 123);
    double band = 3.0 * std::sqrt(0.05 * 0.95 / 400.0);
    CHECK(std::abs(rep.rate - 0.05) <= band);
  }
}

TEST_CASE("kernel decay on the homogeneous torus fits the local CLT slope") {
  EnvRecipe recipe;
  recipe.d = 2;
  recipe.L = 48;
  recipe.law = ConductanceLaw::constant(1.0);
  Environment env = make_environment(recipe);
  SymmetricChain chain = full_chain(env);
  std::vector<double> grid;
  for (double t = 10.0; t <= 60.0; t *= 1.3) grid.push_back(t);
  auto rep = kernel_decay(chain, env.spec.center_vertex(), 2, grid);
  CHECK(rep.loglog.slope > -1.2);
  CHECK(rep.loglog.slope < -0.8);
  CHECK(rep.scaled_max < 1.0);
}

TEST_CASE("exit tails: basic shape of the empirical table") {
  LatticeSpec spec(2, 64, Boundary::torus);
  Environment env = sample_environment(spec, ConductanceLaw::zero_uniform_mixture(0.8), 19);
  XiStructure xs = build_xi_structure(env, 0.1);
  std::vector<double> radii{4.0, 8.0, 1e6};
  std::vector<double> times{0.5, 4.0, 16.0};
  auto rep = exit_tail_experiment(env, xs, radii, times, 800, 2070);
  for (size_t ir = 0; ir < radii.size(); ++ir)
    for (size_t it = 0; it + 1 < times.size(); ++it)
      CHECK(rep.p[ir][it] <= rep.p[ir][it + 1]);  // monotone in t
  // Tiny-t cell is controlled by the jump count: P <= 1 - e^{-t} + 3 SE.
  double cap = 1.0 - std::exp(-0.5);
  double se = std::sqrt(cap * (1 - cap) / 800.0);
  CHECK(rep.p[0][0] <= cap + 3 * se);
  // A radius beyond the window is never exited.
  for (size_t it = 0; it < times.size(); ++it) CHECK(rep.p[2][it] == 0.0);
  CHECK(rep.c_e > 0.0);
}

TEST_CASE("homogeneous chemical distance equals the L1 distance") {
  LatticeSpec spec(2, 24, Boundary::torus);
  Environment env = sample_environment(spec, ConductanceLaw::constant(1.0), 3);
  XiStructure xs = build_xi_structure(env, 0.5);
  auto dist = chemical_distances_from(xs, 0);
  for (Vertex v = 0; v < spec.vertex_count(); ++v)
    CHECK(dist[static_cast<size_t>(v)] == l1_distance(spec, 0, v));
}

TEST_CASE("poincare scaling smoke: homogeneous boxes are diffusive") {
  auto rep = poincare_scaling(ConductanceLaw::constant(1.0), 2, {4, 8, 16}, 2, 606);
  CHECK(std::abs(rep.slope.mean - 2.0) <= 0.5);
}

TEST_CASE("experiment runner determinism: byte-identical reruns") {
  ExperimentConfig cfg;
  cfg.experiment = "sigma2";
  cfg.env.d = 2;
  cfg.env.L = 32;
  cfg.env.law = ConductanceLaw::constant(1.0);
  cfg.env.env_seed = 3;
  cfg.horizons = {20.0, 40.0};
  cfg.replicas = 400;
  cfg.walk_seed = 12;

  ResultTable t1 = run_experiment(cfg);
  ResultTable t2 = run_experiment(cfg);
  CHECK(t1.to_csv() == t2.to_csv());

  write_experiment_outputs(cfg, t1, "exp_out_a");
  write_experiment_outputs(cfg, t2, "exp_out_b");
  auto slurp = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };
  CHECK(slurp("exp_out_a/results.csv") == slurp("exp_out_b/results.csv"));
  CHECK(slurp("exp_out_a/manifest.json") == slurp("exp_out_b/manifest.json"));
  CHECK(!slurp("exp_out_a/results.csv").empty());
  std::filesystem::remove_all("exp_out_a");
  std::filesystem::remove_all("exp_out_b");
}

TEST_CASE("experiment config JSON round trip") {
  ExperimentConfig cfg;
  cfg.experiment = "exit_tail";
  cfg.env.law = ConductanceLaw::zero_uniform_mixture(0.75);
  cfg.env.L = 128;
  cfg.xi = 0.05;
  cfg.exit_radii = {6, 10};
  cfg.exit_times = {4, 8};
  cfg.replicas = 50;
  std::string text = cfg.to_canonical_json();
  ExperimentConfig back = ExperimentConfig::from_json_text(text);
  CHECK(back.experiment == cfg.experiment);
  CHECK(back.env.L == cfg.env.L);
  CHECK(back.env.law.tag() == cfg.env.law.tag());
  CHECK(back.xi == cfg.xi);
  CHECK(back.exit_radii == cfg.exit_radii);
  CHECK(back.to_canonical_json() == text);
}

TEST_CASE("maximal displacement statistics are tight and scale-stable") {
  LatticeSpec spec(2, 96, Boundary::torus);
  Environment env = sample_environment(spec, ConductanceLaw::zero_uniform_mixture(0.8), 66);
  Vertex start = env.spec.center_vertex();
  EdgeMask alpha = threshold_mask(env, 0.0);
  ClusterLabeling lab = label_clusters(spec, alpha);
  start = center_nearest_giant(env, lab, giant_cluster(lab).id);

  auto sup_samples = [&](double T, std::uint64_t seed, std::int64_t R) {
    return run_replicas<double>(R, [&, T, seed](std::int64_t rep) {
      SplitMix64 rng(derive_stream(seed, static_cast<std::uint64_t>(rep)));
      ProbeTargets t;
      t.sup_horizon = T;
      t.real_times = {T};
      ProbeOutcome o = probe_walk(env, nullptr, start, t, rng);
      return o.sup_norm / std::sqrt(T);  // scaled sup displacement
    });
  };
  const std::int64_t R = 1200;
  auto s1 = sup_samples(40.0, 41, R);
  auto s2 = sup_samples(160.0, 42, R);
  auto frac_above = [&](const std::vector<double>& xs, double K) {
    std::int64_t c = 0;
    for (double x : xs) c += x >= K ? 1 : 0;
    return static_cast<double>(c) / static_cast<double>(xs.size());
  };
  // Decreasing in K by construction; stability in the scale parameter.
  CHECK(frac_above(s1, 1.0) >= frac_above(s1, 2.0));
  CHECK(frac_above(s2, 1.0) >= frac_above(s2, 2.0));
  for (double K : {1.0, 1.5, 2.0}) {
    double f1 = frac_above(s1, K), f2 = frac_above(s2, K);
    double se = std::sqrt((f1 * (1 - f1) + f2 * (1 - f2)) / static_cast<double>(R) + 1e-9);
    CHECK(std::abs(f1 - f2) <= 4.0 * se + 0.02);
  }
}

TEST_CASE("X and X^xi stay close: hole-gap fraction shrinks with xi") {
  LatticeSpec spec(2, 96, Boundary::torus);
  Environment env = sample_environment(spec, ConductanceLaw::zero_uniform_mixture(0.75), 3131);
  const double T = 150.0;
  const std::int64_t R = 4000;
  auto gap_fraction = [&](double xi, std::uint64_t seed) {
    XiStructure xs = build_xi_structure(env, xi);
    Vertex start = center_nearest_giant(env, xs.prime_labeling, xs.cxi_id);
    auto gaps = run_replicas<double>(R, [&](std::int64_t rep) {
      SplitMix64 rng(derive_stream(seed, static_cast<std::uint64_t>(rep)));
      ProbeTargets t;
      t.pair_time = T;
      ProbeOutcome o = probe_walk(env, &xs, start, t, rng);
      return o.pair_distance;
    });
    std::int64_t c = 0;
    for (double g : gaps) c += g > 0.5 ? 1 : 0;  // any nonzero gap
    return static_cast<double>(c) / static_cast<double>(R);
  };
  double f_small = gap_fraction(0.05, 909);
  double f_big = gap_fraction(0.3, 909);
  double se = std::sqrt((f_small * (1 - f_small) + f_big * (1 - f_big)) / static_cast<double>(R) +
                        1e-12);
  CHECK(f_small < f_big - 3.0 * se);
}

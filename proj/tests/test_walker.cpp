#include <doctest.h>

#include <cmath>
#include <map>

#include "rcm/environment.hpp"
#include "rcm/holes.hpp"
#include "rcm/walker.hpp"

using namespace rcm;

namespace {

Environment isolated_center_env(const LatticeSpec& spec) {
  Environment env;
  env.spec = spec;
  env.values.assign(static_cast<size_t>(spec.edge_slot_count()), 0.0);
  env.law_tag = "handmade";
  return env;
}

// Trajectory with prescribed jump times/vertices for time-change tests.
Trajectory scripted(const LatticeSpec& spec, Vertex start, double horizon,
                    const std::vector<std::pair<double, Vertex>>& events) {
  Trajectory t;
  t.spec = spec;
  t.start = start;
  t.horizon = horizon;
  Coords prev = spec.decode(start);
  std::array<std::int32_t, kMaxDim> disp{};
  for (auto& [time, v] : events) {
    t.times.push_back(time);
    t.verts.push_back(v);
    Coords c = spec.decode(v);
    for (int k = 0; k < spec.d; ++k) {
      std::int64_t step = c[k] - prev[k];
      if (step > 1) step -= spec.L;
      if (step < -1) step += spec.L;
      disp[k] += static_cast<std::int32_t>(step);
    }
    prev = c;
    for (int k = 0; k < spec.d; ++k) t.disp.push_back(disp[k]);
  }
  return t;
}

}  // namespace

TEST_CASE("a frozen walker produces no events") {
  LatticeSpec spec(2, 6, Boundary::torus);
  Environment env = isolated_center_env(spec);
  SplitMix64 rng(1);
  Trajectory t = simulate_walk(env, 7, 100.0, rng);
  CHECK(t.jump_count() == 0);
  CHECK(t.position_at(50.0) == 7);
}

TEST_CASE("jump times are strictly increasing along lattice-neighbor open edges") {
  LatticeSpec spec(2, 16, Boundary::torus);
  Environment env = sample_environment(spec, ConductanceLaw::zero_uniform_mixture(0.8), 5);
  SplitMix64 rng(2);
  ClusterLabeling lab = label_clusters(spec, threshold_mask(env, 0.0));
  Vertex start = -1;
  GiantCluster g = giant_cluster(lab);
  for (Vertex v = 0; v < spec.vertex_count(); ++v)
    if (lab.label[static_cast<size_t>(v)] == g.id) {
      start = v;
      break;
    }
  REQUIRE(start >= 0);
  Trajectory t = simulate_walk(env, start, 200.0, rng);
  REQUIRE(t.jump_count() > 10);
  Vertex prev = start;
  double prev_time = 0.0;
  for (std::int64_t k = 0; k < t.jump_count(); ++k) {
    CHECK(t.times[static_cast<size_t>(k)] > prev_time);
    CHECK(t.times[static_cast<size_t>(k)] <= t.horizon);
    CHECK(env.conductance_between(prev, t.verts[static_cast<size_t>(k)]) > 0.0);
    CHECK(l1_distance(spec, prev, t.verts[static_cast<size_t>(k)]) == 1);
    // The walk never leaves the cluster it started from.
    CHECK(lab.label[static_cast<size_t>(t.verts[static_cast<size_t>(k)])] == g.id);
    prev_time = t.times[static_cast<size_t>(k)];
    prev = t.verts[static_cast<size_t>(k)];
  }
}

TEST_CASE("unit-rate waits: jump count concentrates on Poisson(t)") {
  LatticeSpec spec(2, 8, Boundary::torus);
  Environment env = sample_environment(spec, ConductanceLaw::constant(1.0), 9);
  const double t = 50.0;
  const std::int64_t R = 10000;
  auto counts = run_replicas<double>(R, [&](std::int64_t rep) {
    SplitMix64 rng(derive_stream(77, static_cast<std::uint64_t>(rep)));
    WalkSim sim(env, 0);
    std::int64_t jumps = 0;
    while (sim.step(rng) && sim.time() <= t) ++jumps;
    return static_cast<double>(jumps);
  });
  double mean = 0.0;
  for (double c : counts) mean += c;
  mean /= static_cast<double>(R);
  CHECK(std::abs(mean - t) <= 3.0 * std::sqrt(t / static_cast<double>(R)));
}

TEST_CASE("homogeneous mean-square displacement is t within 3 SE") {
  LatticeSpec spec(2, 64, Boundary::torus);
  Environment env = sample_environment(spec, ConductanceLaw::constant(1.0), 11);
  const double t = 40.0;
  const std::int64_t R = 8000;
  auto sq = run_replicas<double>(R, [&](std::int64_t rep) {
    SplitMix64 rng(derive_stream(33, static_cast<std::uint64_t>(rep)));
    WalkSim sim(env, 0);
    double at_t = 0.0;  // |X(t)|^2, snapshot before the jump that overshoots t
    while (true) {
      double before = sim.displacement_norm2();
      if (!sim.step(rng) || sim.time() > t) {
        at_t = before;
        break;
      }
    }
    return at_t;
  });
  double mean = 0.0, var = 0.0;
  for (double x : sq) mean += x;
  mean /= static_cast<double>(R);
  for (double x : sq) var += (x - mean) * (x - mean);
  var /= static_cast<double>(R - 1);
  double se = std::sqrt(var / static_cast<double>(R));
  CHECK(std::abs(mean - t) <= 3.0 * se);
}

TEST_CASE("time change on a scripted trajectory") {
  // C^xi on [0,1), hole on [1,2), C^xi on [2,3]: A(3)=2, X^xi(1.5)=X(2.5).
  LatticeSpec spec(2, 5, Boundary::free);
  Environment env;
  env.spec = spec;
  env.values.assign(static_cast<size_t>(spec.edge_slot_count()), 0.0);
  auto at = [&](std::int64_t x, std::int64_t y) { return spec.encode(Coords{x, y}); };
  // Strong path 0-1-2 on row 0 forms C^xi; (0,1) hangs off by a weak edge.
  env.values[static_cast<size_t>(edge_slot(spec, at(0, 0), 0))] = 0.9;
  env.values[static_cast<size_t>(edge_slot(spec, at(1, 0), 0))] = 0.9;
  env.values[static_cast<size_t>(edge_slot(spec, at(0, 0), 1))] = 0.1;  // weak: (0,0)-(0,1)
  XiStructure xs = build_xi_structure(env, 0.5);
  REQUIRE(xs.in_cxi(at(0, 0)));
  REQUIRE(!xs.in_cxi(at(0, 1)));

  Trajectory traj = scripted(spec, at(0, 0), 3.0,
                             {{1.0, at(0, 1)}, {2.0, at(0, 0)}, {2.5, at(1, 0)}});
  TimeChange tc = build_time_change(traj, xs);
  CHECK(tc.total() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(tc.a(0.5) == doctest::Approx(0.5));
  CHECK(tc.a(1.5) == doctest::Approx(1.0));
  CHECK(tc.a(2.5) == doctest::Approx(1.5));
  CHECK(time_changed_position(tc, 1.5) == traj.position_at(2.5));
  CHECK(time_changed_position(tc, 0.5) == at(0, 0));
  CHECK_THROWS_AS(time_changed_position(tc, 2.0), std::out_of_range);

  // Right-continuous inverse skips the hole interval.
  CHECK(tc.a_inverse(1.0) == doctest::Approx(2.0));
  // Re-entry at the same vertex is merged in the jump list.
  auto jumps = xi_jump_list(tc);
  REQUIRE(jumps.size() == 2);
  CHECK(jumps[0].second == at(0, 0));
  CHECK(jumps[1].second == at(1, 0));
}

TEST_CASE("A-fraction stays in [0,1] and A is 1-Lipschitz") {
  LatticeSpec spec(2, 12, Boundary::torus);
  Environment env = sample_environment(spec, ConductanceLaw::zero_uniform_mixture(0.85), 21);
  XiStructure xs = build_xi_structure(env, 0.3);
  SplitMix64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    Vertex start = -1;
    for (Vertex v = 0; v < spec.vertex_count(); ++v)
      if (xs.in_cxi(v)) {
        start = v;
        break;
      }
    Trajectory traj = simulate_walk(env, start, 30.0, rng);
    TimeChange tc = build_time_change(traj, xs);
    CHECK(tc.total() >= 0.0);
    CHECK(tc.total() <= traj.horizon);
    SplitMix64 trng(static_cast<std::uint64_t>(rep) + 100);
    for (int probe = 0; probe < 50; ++probe) {
      double u = trng.next_half_open() * traj.horizon;
      double v = trng.next_half_open() * traj.horizon;
      if (u > v) std::swap(u, v);
      double du = tc.a(v) - tc.a(u);
      CHECK(du >= -1e-12);
      CHECK(du <= v - u + 1e-12);
    }
  }
}

TEST_CASE("time-changed positions always lie in C^xi") {
  LatticeSpec spec(2, 12, Boundary::torus);
  Environment env = sample_environment(spec, ConductanceLaw::zero_uniform_mixture(0.85), 77);
  XiStructure xs = build_xi_structure(env, 0.3);
  Vertex start = -1;
  for (Vertex v = 0; v < spec.vertex_count(); ++v)
    if (xs.in_cxi(v)) {
      start = v;
      break;
    }
  REQUIRE(start >= 0);
  SplitMix64 rng(6);
  for (int rep = 0; rep < 100; ++rep) {
    Trajectory traj = simulate_walk(env, start, 20.0, rng);
    TimeChange tc = build_time_change(traj, xs);
    if (tc.total() <= 0.0) continue;
    SplitMix64 trng(static_cast<std::uint64_t>(rep));
    for (int probe = 0; probe < 20; ++probe) {
      double s = trng.next_half_open() * tc.total();
      CHECK(xs.in_cxi(time_changed_position(tc, s)));
    }
  }
}

TEST_CASE("no holes: the time change is the identity") {
  LatticeSpec spec(2, 8, Boundary::torus);
  Environment env = sample_environment(spec, ConductanceLaw::constant(1.0), 3);
  XiStructure xs = build_xi_structure(env, 0.5);
  SplitMix64 rng(8);
  Trajectory traj = simulate_walk(env, 0, 10.0, rng);
  TimeChange tc = build_time_change(traj, xs);
  CHECK(tc.total() == doctest::Approx(10.0).epsilon(1e-12));
  for (double s : {0.5, 3.3, 7.9})
    CHECK(time_changed_position(tc, s) == traj.position_at(s));
}

TEST_CASE("exit times") {
  LatticeSpec spec(2, 9, Boundary::free);
  SUBCASE("frozen walker never exits") {
    Environment env = isolated_center_env(spec);
    SplitMix64 rng(1);
    Trajectory t = simulate_walk(env, spec.center_vertex(), 10.0, rng);
    CHECK(!exit_time(t, Region::ball(2.0)).has_value());
  }
  SUBCASE("a region larger than the window is never exited") {
    Environment env = sample_environment(spec, ConductanceLaw::constant(1.0), 3);
    SplitMix64 rng(2);
    Trajectory t = simulate_walk(env, spec.center_vertex(), 30.0, rng);
    CHECK(!exit_time(t, Region::box(100.0)).has_value());
  }
  SUBCASE("scripted crossing of a radius-2 ball at the third jump") {
    Trajectory t = scripted(spec, spec.encode(Coords{4, 4}), 10.0,
                            {{1.0, spec.encode(Coords{5, 4})},
                             {2.0, spec.encode(Coords{6, 4})},
                             {3.5, spec.encode(Coords{7, 4})}});
    auto tau = exit_time(t, Region::ball(2.0));
    REQUIRE(tau.has_value());
    CHECK(*tau == doctest::Approx(3.5));
    auto tau_box = exit_time(t, Region::box(2.0));
    REQUIRE(tau_box.has_value());
    CHECK(*tau_box == doctest::Approx(3.5));
  }
}

TEST_CASE("occupation frequencies are reversible: proportional to vertex weights") {
  LatticeSpec spec(2, 4, Boundary::torus);
  Environment env = sample_environment(spec, ConductanceLaw::zero_uniform_mixture(0.95), 31);
  ClusterLabeling lab = label_clusters(spec, threshold_mask(env, 0.0));
  GiantCluster g = giant_cluster(lab);
  REQUIRE(g.density > 0.8);
  Vertex start = -1;
  for (Vertex v = 0; v < spec.vertex_count(); ++v)
    if (lab.label[static_cast<size_t>(v)] == g.id) {
      start = v;
      break;
    }
  const double horizon = 400.0, burn = 50.0;
  const std::int64_t R = 400;
  const auto nv = static_cast<size_t>(spec.vertex_count());
  auto occ = run_replicas<std::vector<double>>(R, [&](std::int64_t rep) {
    SplitMix64 rng(derive_stream(55, static_cast<std::uint64_t>(rep)));
    std::vector<double> time_in(nv, 0.0);
    Trajectory t = simulate_walk(env, start, horizon, rng);
    double prev = 0.0;
    Vertex at = start;
    for (std::int64_t k = 0; k <= t.jump_count(); ++k) {
      double end = k < t.jump_count() ? t.times[static_cast<size_t>(k)] : horizon;
      double lo = std::max(prev, burn);
      if (end > lo) time_in[static_cast<size_t>(at)] += end - lo;
      if (k < t.jump_count()) at = t.verts[static_cast<size_t>(k)];
      prev = end;
    }
    for (auto& x : time_in) x /= horizon - burn;
    return time_in;
  });
  double total_weight = 0.0;
  for (Vertex v = 0; v < spec.vertex_count(); ++v)
    if (lab.label[static_cast<size_t>(v)] == g.id) total_weight += env.vertex_weight(v);
  std::int64_t checked = 0;
  for (Vertex v = 0; v < spec.vertex_count(); ++v) {
    if (lab.label[static_cast<size_t>(v)] != g.id) continue;
    std::vector<double> vals;
    for (const auto& o : occ) vals.push_back(o[static_cast<size_t>(v)]);
    double mean = 0.0;
    for (double x : vals) mean += x;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double x : vals) var += (x - mean) * (x - mean);
    var /= static_cast<double>(vals.size() - 1);
    double se = std::sqrt(var / static_cast<double>(vals.size()));
    double expect = env.vertex_weight(v) / total_weight;
    CHECK(std::abs(mean - expect) <= 3.0 * se + 1e-9);
    ++checked;
  }
  CHECK(checked >= 10);
}

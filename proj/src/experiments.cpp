#include "rcm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rcm/heat_kernel.hpp"

namespace rcm {

const char* kToolkitVersion = "0.1.0";

Environment make_environment(const EnvRecipe& recipe, std::uint64_t salt) {
  LatticeSpec spec(recipe.d, recipe.L, recipe.boundary);
  std::uint64_t seed = salt ? derive_stream(recipe.env_seed, salt) : recipe.env_seed;
  return sample_environment(spec, recipe.law, seed);
}

// ---------------------------------------------------------------------------
// Probe

namespace {

double norm2_of(const std::array<std::int32_t, kMaxDim>& disp, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) s += static_cast<double>(disp[k]) * static_cast<double>(disp[k]);
  return std::sqrt(s);
}

double dist_of(const std::array<std::int32_t, kMaxDim>& a,
               const std::array<std::int32_t, kMaxDim>& b, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) {
    double v = static_cast<double>(a[k]) - static_cast<double>(b[k]);
    s += v * v;
  }
  return std::sqrt(s);
}

}  // namespace

ProbeOutcome probe_walk(const Environment& env, const XiStructure* xs, Vertex start,
                        const ProbeTargets& targets, SplitMix64& rng) {
  const int d = env.spec.d;
  ProbeOutcome out;
  out.at_real.resize(targets.real_times.size());
  out.at_intrinsic.resize(targets.intrinsic_times.size());
  out.intrinsic_resolved.assign(targets.intrinsic_times.size(), 0);
  out.exit_real.assign(targets.exit_radii_real.size(), -1.0);
  out.exit_intrinsic.assign(targets.exit_radii_intrinsic.size(), -1.0);

  WalkSim sim(env, start);
  double prev_time = 0.0;
  std::array<std::int32_t, kMaxDim> disp_prev{};
  std::array<std::int32_t, kMaxDim> last_cxi_disp{};
  bool prev_in = xs ? xs->in_cxi(start) : true;
  double a_clock = 0.0;
  size_t ir = 0, ii = 0;
  size_t exits_real_left = targets.exit_radii_real.size();
  size_t exits_intr_left = targets.exit_radii_intrinsic.size();
  bool a_done = targets.a_horizon <= 0.0;
  bool pair_done = targets.pair_time <= 0.0;
  bool sup_done = targets.sup_horizon <= 0.0;

  while (true) {
    bool ok = sim.step(rng);
    double t_next = ok ? sim.time() : targets.hard_time_cap;

    // Segment [prev_time, t_next): the walk sits at disp_prev.
    while (ir < targets.real_times.size() && targets.real_times[ir] < t_next) {
      out.at_real[ir] = disp_prev;
      ++ir;
    }
    if (!sup_done) {
      if (prev_time <= targets.sup_horizon)
        out.sup_norm = std::max(out.sup_norm, norm2_of(disp_prev, d));
      if (t_next > targets.sup_horizon) sup_done = true;
    }
    if (!pair_done && targets.pair_time >= prev_time && targets.pair_time < t_next) {
      out.pair_distance = prev_in ? 0.0 : dist_of(disp_prev, last_cxi_disp, d);
      pair_done = true;
    }
    if (!a_done && targets.a_horizon >= prev_time && targets.a_horizon < t_next) {
      double a_at_T = a_clock + (prev_in ? targets.a_horizon - prev_time : 0.0);
      out.a_fraction = a_at_T / targets.a_horizon;
      a_done = true;
    }
    if (xs && prev_in) {
      double seg_len = t_next - prev_time;
      while (ii < targets.intrinsic_times.size() &&
             targets.intrinsic_times[ii] < a_clock + seg_len) {
        out.at_intrinsic[ii] = disp_prev;
        out.intrinsic_resolved[ii] = 1;
        ++ii;
      }
      a_clock += seg_len;
    }
    if (!ok) break;  // frozen; every remaining real-time target was closed out

    ++out.jumps;
    const auto& disp_new = sim.displacement();
    double norm_new = norm2_of(disp_new, d);
    if (exits_real_left) {
      for (size_t k = 0; k < targets.exit_radii_real.size(); ++k) {
        if (out.exit_real[k] < 0.0 && norm_new > targets.exit_radii_real[k]) {
          out.exit_real[k] = t_next;
          --exits_real_left;
        }
      }
    }
    bool now_in = xs ? xs->in_cxi(sim.vertex()) : true;
    if (now_in) {
      last_cxi_disp = disp_new;
      if (exits_intr_left) {
        for (size_t k = 0; k < targets.exit_radii_intrinsic.size(); ++k) {
          if (out.exit_intrinsic[k] < 0.0 && norm_new > targets.exit_radii_intrinsic[k]) {
            out.exit_intrinsic[k] = a_clock;
            --exits_intr_left;
          }
        }
      }
    }
    disp_prev = disp_new;
    prev_in = now_in;
    prev_time = t_next;

    if (prev_time > targets.hard_time_cap) break;
    bool intrinsic_done =
        (ii >= targets.intrinsic_times.size()) && (exits_intr_left == 0 || !xs);
    if (ir >= targets.real_times.size() && intrinsic_done && a_done && pair_done && sup_done &&
        exits_real_left == 0)
      break;
  }
  return out;
}

Vertex center_nearest_giant(const Environment& env, const ClusterLabeling& labeling,
                            std::int32_t cluster_id) {
  Vertex center = env.spec.center_vertex();
  if (labeling.label[static_cast<size_t>(center)] == cluster_id) return center;
  Vertex best = -1;
  double best_dist = 0.0;
  const std::int64_t n = env.spec.vertex_count();
  for (Vertex v = 0; v < n; ++v) {
    if (labeling.label[static_cast<size_t>(v)] != cluster_id) continue;
    double dist = euclid_distance(env.spec, v, center);
    if (best < 0 || dist < best_dist) {
      best = v;
      best_dist = dist;
    }
  }
  if (best < 0) throw std::runtime_error("no vertex in the requested cluster");
  return best;
}

StationarySampler make_stationary_sampler(const Environment& env, const ClusterLabeling& labeling,
                                          std::int32_t cluster_id) {
  StationarySampler s;
  const std::int64_t n = env.spec.vertex_count();
  double acc = 0.0;
  for (Vertex v = 0; v < n; ++v) {
    if (labeling.label[static_cast<size_t>(v)] != cluster_id) continue;
    double w = env.vertex_weight(v);
    if (w <= 0.0) continue;
    acc += w;
    s.verts.push_back(v);
    s.cum.push_back(acc);
  }
  if (s.verts.empty()) throw std::runtime_error("stationary sampler: empty cluster");
  return s;
}

Vertex StationarySampler::draw(SplitMix64& rng) const {
  double u = rng.next_half_open() * cum.back();
  auto it = std::upper_bound(cum.begin(), cum.end(), u);
  size_t k = std::min(static_cast<size_t>(it - cum.begin()), verts.size() - 1);
  return verts[k];
}

// ---------------------------------------------------------------------------
// sigma^2

Sigma2Estimate estimate_sigma2(const EnvRecipe& recipe, RunMode mode, double xi,
                               const std::vector<double>& horizons, std::int64_t replicas,
                               std::uint64_t walk_seed, StartPolicy policy) {
  if (horizons.empty()) throw std::invalid_argument("estimate_sigma2: no horizons");
  if (replicas < 2) throw std::invalid_argument("estimate_sigma2: need >= 2 replicas");
  const bool time_changed = xi > 0.0;
  if (policy == StartPolicy::center_cxi && !time_changed)
    throw std::invalid_argument("estimate_sigma2: center_cxi start needs xi > 0");
  std::vector<double> sorted_h = horizons;
  std::sort(sorted_h.begin(), sorted_h.end());
  const int d = recipe.d;

  struct Shared {
    Environment env;
    std::optional<XiStructure> xs;
    std::optional<StationarySampler> stationary;
    Vertex start = 0;
    bool substituted = false;
  };
  auto prepare = [&](std::uint64_t salt) {
    Shared sh{make_environment(recipe, salt), std::nullopt, std::nullopt, 0, false};
    if (time_changed) sh.xs.emplace(build_xi_structure(sh.env, xi));
    EdgeMask alpha = threshold_mask(sh.env, 0.0);
    ClusterLabeling alpha_lab = label_clusters(sh.env.spec, alpha);
    GiantCluster giant = giant_cluster(alpha_lab);
    switch (policy) {
      case StartPolicy::center_alpha_giant:
        sh.start = center_nearest_giant(sh.env, alpha_lab, giant.id);
        break;
      case StartPolicy::center_cxi:
        sh.start = center_nearest_giant(sh.env, sh.xs->prime_labeling, sh.xs->cxi_id);
        break;
      case StartPolicy::stationary:
        sh.stationary = make_stationary_sampler(sh.env, alpha_lab, giant.id);
        break;
    }
    sh.substituted = !sh.stationary && sh.start != sh.env.spec.center_vertex();
    return sh;
  };

  std::optional<Shared> quenched_env;
  if (mode == RunMode::quenched) quenched_env = prepare(0);

  struct RepResult {
    std::vector<double> q;
    bool substituted = false;
  };
  auto worker = [&](std::int64_t rep) {
    SplitMix64 rng(derive_stream(walk_seed, static_cast<std::uint64_t>(rep)));
    std::optional<Shared> own;
    const Shared* sh;
    if (mode == RunMode::quenched) {
      sh = &*quenched_env;
    } else {
      own = prepare(static_cast<std::uint64_t>(rep) + 1);
      sh = &*own;
    }
    Vertex start = sh->stationary ? sh->stationary->draw(rng) : sh->start;
    ProbeTargets t;
    if (time_changed) {
      t.intrinsic_times = sorted_h;
      t.hard_time_cap = sorted_h.back() * 50 + 1000;
    } else {
      t.real_times = sorted_h;
    }
    ProbeOutcome o = probe_walk(sh->env, sh->xs ? &*sh->xs : nullptr, start, t, rng);
    RepResult r;
    r.substituted = sh->substituted;
    r.q.resize(sorted_h.size(), std::nan(""));
    for (size_t k = 0; k < sorted_h.size(); ++k) {
      if (time_changed && !o.intrinsic_resolved[k]) continue;
      const auto& disp = time_changed ? o.at_intrinsic[k] : o.at_real[k];
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += static_cast<double>(disp[c]) * static_cast<double>(disp[c]);
      r.q[k] = s / static_cast<double>(d) / sorted_h[k];
    }
    return r;
  };

  auto results = run_replicas<RepResult>(replicas, worker);

  Sigma2Estimate est;
  est.horizons = sorted_h;
  est.replicas = replicas;
  for (size_t k = 0; k < sorted_h.size(); ++k) {
    std::vector<double> vals;
    vals.reserve(results.size());
    for (const auto& r : results)
      if (!std::isnan(r.q[k])) vals.push_back(r.q[k]);
    est.per_horizon.push_back(mean_se(vals));
  }
  est.sigma2 = est.per_horizon.back();
  for (const auto& r : results) est.start_substitutions += r.substituted ? 1 : 0;
  return est;
}

// ---------------------------------------------------------------------------
// c(xi)

double spatial_c_xi(const Environment& env, const XiStructure& xs) {
  const std::int64_t n = env.spec.vertex_count();
  double num = 0.0, den = 0.0;
  for (Vertex v = 0; v < n; ++v) {
    if (!xs.in_alpha_giant(v)) continue;
    double w = env.vertex_weight(v);
    den += w;
    if (xs.in_cxi(v)) num += w;
  }
  if (den <= 0.0) throw std::runtime_error("spatial_c_xi: weightless giant cluster");
  return num / den;
}

CxiEstimate estimate_c_xi(const Environment& env, const XiStructure& xs, double horizon,
                          std::int64_t replicas, std::uint64_t walk_seed, StartPolicy policy) {
  if (replicas < 2) throw std::invalid_argument("estimate_c_xi: need >= 2 replicas");
  EdgeMask alpha = threshold_mask(env, 0.0);
  ClusterLabeling alpha_lab = label_clusters(env.spec, alpha);
  GiantCluster giant = giant_cluster(alpha_lab);
  std::optional<StationarySampler> stat;
  Vertex fixed_start = 0;
  if (policy == StartPolicy::stationary)
    stat = make_stationary_sampler(env, alpha_lab, giant.id);
  else if (policy == StartPolicy::center_cxi)
    fixed_start = center_nearest_giant(env, xs.prime_labeling, xs.cxi_id);
  else
    fixed_start = center_nearest_giant(env, alpha_lab, giant.id);

  auto worker = [&](std::int64_t rep) {
    SplitMix64 rng(derive_stream(walk_seed, static_cast<std::uint64_t>(rep)));
    Vertex start = stat ? stat->draw(rng) : fixed_start;
    ProbeTargets t;
    t.a_horizon = horizon;
    t.hard_time_cap = horizon * 2 + 10;
    ProbeOutcome o = probe_walk(env, &xs, start, t, rng);
    return o.a_fraction;
  };
  auto fracs = run_replicas<double>(replicas, worker);
  CxiEstimate est;
  est.e1 = mean_se(fracs);
  est.e2 = spatial_c_xi(env, xs);
  est.replicas = replicas;
  return est;
}

// ---------------------------------------------------------------------------
// Variance identity

VarianceIdentityReport verify_variance_identity(const EnvRecipe& recipe, double xi,
                                                double real_horizon, double intrinsic_horizon,
                                                std::int64_t replicas, std::uint64_t walk_seed) {
  Sigma2Estimate plain =
      estimate_sigma2(recipe, RunMode::quenched, 0.0, {real_horizon}, replicas,
                      derive_stream(walk_seed, 1), StartPolicy::center_alpha_giant);
  Sigma2Estimate changed =
      estimate_sigma2(recipe, RunMode::quenched, xi, {intrinsic_horizon}, replicas,
                      derive_stream(walk_seed, 2), StartPolicy::center_cxi);
  Environment env = make_environment(recipe);
  XiStructure xs = build_xi_structure(env, xi);
  VarianceIdentityReport rep;
  rep.sigma2 = plain.sigma2.mean;
  rep.sigma2_se = plain.sigma2.se;
  rep.sigma2_xi = changed.sigma2.mean;
  rep.sigma2_xi_se = changed.sigma2.se;
  rep.c_xi = spatial_c_xi(env, xs);
  rep.product = rep.c_xi * rep.sigma2_xi;
  rep.diff = rep.product - rep.sigma2;
  rep.pooled_se = std::sqrt(rep.c_xi * rep.c_xi * rep.sigma2_xi_se * rep.sigma2_xi_se +
                            rep.sigma2_se * rep.sigma2_se);
  rep.pass_3se = std::abs(rep.diff) <= 3.0 * rep.pooled_se;
  return rep;
}

// ---------------------------------------------------------------------------
// Gaussianity

KsResult gaussianity_test(const std::vector<double>& standardized_samples) {
  if (standardized_samples.size() < 1000)
    throw std::invalid_argument("gaussianity_test: need >= 1000 samples");
  return ks_test(standardized_samples, [](double x) { return normal_cdf(x); });
}

GaussianitySamples gaussianity_samples(const Environment& env, double t, std::int64_t replicas,
                                       std::uint64_t walk_seed) {
  EdgeMask alpha = threshold_mask(env, 0.0);
  ClusterLabeling alpha_lab = label_clusters(env.spec, alpha);
  GiantCluster giant = giant_cluster(alpha_lab);
  Vertex start = center_nearest_giant(env, alpha_lab, giant.id);
  const int d = env.spec.d;

  auto worker = [&](std::int64_t rep) {
    SplitMix64 rng(derive_stream(walk_seed, static_cast<std::uint64_t>(rep)));
    ProbeTargets targets;
    targets.real_times = {t};
    ProbeOutcome o = probe_walk(env, nullptr, start, targets, rng);
    std::array<double, 2> out{static_cast<double>(o.at_real[0][0]), 0.0};
    double s = 0.0;
    for (int c = 0; c < d; ++c)
      s += static_cast<double>(o.at_real[0][c]) * static_cast<double>(o.at_real[0][c]);
    out[1] = s;
    return out;
  };
  auto results = run_replicas<std::array<double, 2>>(replicas, worker);

  GaussianitySamples gs;
  double mean_sq = 0.0;
  for (const auto& r : results) mean_sq += r[1];
  mean_sq /= static_cast<double>(results.size());
  gs.sigma2_hat = mean_sq / static_cast<double>(d) / t;
  double scale = std::sqrt(gs.sigma2_hat * t);
  gs.samples.reserve(results.size());
  for (const auto& r : results) gs.samples.push_back(r[0] / scale);
  return gs;
}

CalibrationReport gaussianity_calibration(std::int64_t runs, std::int64_t samples_per_run,
                                          std::uint64_t seed) {
  CalibrationReport rep;
  rep.runs = runs;
  auto worker = [&](std::int64_t run) {
    SplitMix64 rng(derive_stream(seed, static_cast<std::uint64_t>(run)));
    std::vector<double> samples;
    samples.reserve(static_cast<size_t>(samples_per_run));
    while (static_cast<std::int64_t>(samples.size()) < samples_per_run) {
      // Box-Muller
      double u1 = rng.next_open_closed(), u2 = rng.next_half_open();
      double r = std::sqrt(-2.0 * std::log(u1));
      samples.push_back(r * std::cos(2.0 * M_PI * u2));
      if (static_cast<std::int64_t>(samples.size()) < samples_per_run)
        samples.push_back(r * std::sin(2.0 * M_PI * u2));
    }
    KsResult ks = gaussianity_test(samples);
    return ks.p < 0.05 ? 1.0 : 0.0;
  };
  auto rejections = run_replicas<double>(runs, worker);
  for (double r : rejections) rep.rejections += r > 0.5 ? 1 : 0;
  rep.rate = static_cast<double>(rep.rejections) / static_cast<double>(runs);
  rep.binom_se = std::sqrt(0.05 * 0.95 / static_cast<double>(runs));
  return rep;
}

// ---------------------------------------------------------------------------
// Kernel decay

KernelDecayReport kernel_decay(const SymmetricChain& chain, std::int64_t state_index, int d,
                               const std::vector<double>& t_grid, double burn_in) {
  KernelDecayReport rep;
  rep.times = t_grid;
  rep.p00 = on_diagonal_kernel(chain, state_index, t_grid);
  rep.stationary_floor = stationary_probability(chain, state_index);
  std::vector<double> lx, ly;
  double half_d = static_cast<double>(d) / 2.0;
  double prev_scaled = -1.0;
  bool first = true;
  for (size_t k = 0; k < t_grid.size(); ++k) {
    if (t_grid[k] < burn_in) continue;
    double scaled = std::pow(t_grid[k], half_d) * rep.p00[k];
    if (first) {
      rep.scaled_first = scaled;
      first = false;
    }
    rep.scaled_last = scaled;
    rep.scaled_max = std::max(rep.scaled_max, scaled);
    if (prev_scaled > 0.0 && scaled > prev_scaled * (1.0 + 1e-9)) ++rep.monotone_violations;
    prev_scaled = scaled;
    lx.push_back(std::log(t_grid[k]));
    ly.push_back(std::log(rep.p00[k]));
  }
  rep.loglog = ols_fit(lx, ly);
  return rep;
}

// ---------------------------------------------------------------------------
// Exit tails

ExitTailReport exit_tail_experiment(const Environment& env, const XiStructure& xs,
                                    const std::vector<double>& radii,
                                    const std::vector<double>& times, std::int64_t replicas,
                                    std::uint64_t walk_seed) {
  ExitTailReport rep;
  rep.radii = radii;
  rep.times = times;
  rep.replicas = replicas;
  Vertex start = center_nearest_giant(env, xs.prime_labeling, xs.cxi_id);
  double t_max = *std::max_element(times.begin(), times.end());

  auto worker = [&](std::int64_t r) {
    SplitMix64 rng(derive_stream(walk_seed, static_cast<std::uint64_t>(r)));
    ProbeTargets t;
    t.exit_radii_intrinsic = radii;
    t.a_horizon = t_max + 1.0;  // forces the A clock past every grid time
    t.hard_time_cap = (t_max + 2.0) * 40 + 2000;
    ProbeOutcome o = probe_walk(env, &xs, start, t, rng);
    return o.exit_intrinsic;
  };
  auto all_exits = run_replicas<std::vector<double>>(replicas, worker);

  auto tabulate = [&](std::int64_t lo, std::int64_t hi) {
    std::vector<std::vector<double>> table(radii.size(), std::vector<double>(times.size(), 0.0));
    for (std::int64_t r = lo; r < hi; ++r) {
      const auto& exits = all_exits[static_cast<size_t>(r)];
      for (size_t ir = 0; ir < radii.size(); ++ir) {
        if (exits[ir] < 0.0) continue;
        for (size_t it = 0; it < times.size(); ++it)
          if (exits[ir] < times[it]) table[ir][it] += 1.0;
      }
    }
    for (auto& row : table)
      for (auto& c : row) c /= static_cast<double>(hi - lo);
    return table;
  };
  rep.p = tabulate(0, replicas);

  auto fit_c = [&](const std::vector<std::vector<double>>& table, double power) {
    double c = 0.0;
    for (size_t ir = 0; ir < radii.size(); ++ir)
      for (size_t it = 0; it < times.size(); ++it) {
        double bound = std::pow(std::sqrt(times[it]) / radii[ir], power);
        if (bound > 0.0) c = std::max(c, table[ir][it] / bound);
      }
    return c;
  };
  rep.c_e = fit_c(rep.p, 1.0);
  rep.c_e_cube = fit_c(rep.p, 3.0);
  rep.c_e_batch_a = fit_c(tabulate(0, replicas / 2), 1.0);
  rep.c_e_batch_b = fit_c(tabulate(replicas / 2, replicas), 1.0);
  return rep;
}

// ---------------------------------------------------------------------------
// Chemical distance

ChemicalDistanceReport chemical_distance_experiment(const Environment& env, const XiStructure& xs,
                                                    double min_distance, std::int64_t sources,
                                                    std::uint64_t seed) {
  ChemicalDistanceReport rep;
  const LatticeSpec& spec = env.spec;
  const std::int64_t n = spec.vertex_count();
  std::vector<Vertex> cxi;
  for (Vertex v = 0; v < n; ++v)
    if (xs.in_cxi(v)) cxi.push_back(v);
  if (cxi.empty()) throw std::runtime_error("chemical_distance_experiment: empty C^xi");

  SplitMix64 rng(seed);
  std::vector<Vertex> srcs;
  for (std::int64_t s = 0; s < sources; ++s)
    srcs.push_back(cxi[static_cast<size_t>(rng.next_half_open() * static_cast<double>(cxi.size()))]);

  double sxx = 0.0, sxy = 0.0, sx = 0.0, sy = 0.0;
  std::int64_t count = 0, unreachable = 0;
  double min_ratio = 0.0, max_ratio = 0.0;
  bool first = true;
  std::vector<double> per_source_ratio;
  for (Vertex src : srcs) {
    auto dist = chemical_distances_from(xs, src);
    double ratio_sum = 0.0;
    std::int64_t ratio_count = 0;
    for (Vertex v : cxi) {
      double euclid = euclid_distance(spec, src, v);
      if (euclid < min_distance) continue;
      if (dist[static_cast<size_t>(v)] < 0) {
        ++unreachable;
        continue;
      }
      double chem = static_cast<double>(dist[static_cast<size_t>(v)]);
      double ratio = chem / euclid;
      if (first || ratio < min_ratio) min_ratio = ratio;
      if (first || ratio > max_ratio) max_ratio = ratio;
      first = false;
      sx += euclid;
      sy += chem;
      sxx += euclid * euclid;
      sxy += euclid * chem;
      ++count;
      ratio_sum += ratio;
      ++ratio_count;
    }
    if (ratio_count > 0) per_source_ratio.push_back(ratio_sum / static_cast<double>(ratio_count));
  }
  if (count < 2) throw std::runtime_error("chemical_distance_experiment: too few pairs");
  double nd = static_cast<double>(count);
  double denom = sxx - sx * sx / nd;
  rep.ols_slope = (sxy - sx * sy / nd) / denom;
  rep.min_ratio = min_ratio;
  rep.max_ratio = max_ratio;
  rep.pairs = count;
  rep.unreachable = unreachable;
  MeanSE ms = mean_se(per_source_ratio);
  rep.mean_ratio = ms.mean;
  rep.mean_ratio_se = ms.se;
  return rep;
}

// ---------------------------------------------------------------------------
// Poincare scaling

PoincareScalingReport poincare_scaling(const ConductanceLaw& law, int d,
                                       const std::vector<std::int64_t>& n_list,
                                       std::int64_t replicas, std::uint64_t env_seed) {
  PoincareScalingReport rep;
  rep.n_list = n_list;
  rep.a_values.assign(n_list.size(), {});
  struct Task {
    size_t ni;
    std::int64_t repi;
  };
  std::vector<Task> tasks;
  for (size_t ni = 0; ni < n_list.size(); ++ni)
    for (std::int64_t r = 0; r < replicas; ++r) tasks.push_back({ni, r});
  auto worker = [&](std::int64_t ti) {
    const Task& task = tasks[static_cast<size_t>(ti)];
    std::int64_t n = n_list[task.ni];
    LatticeSpec spec(d, 2 * n + 1, Boundary::free);
    Environment env = sample_environment(
        spec, law, derive_stream(env_seed, static_cast<std::uint64_t>(task.repi)));
    SpectralReport sr = poincare_constant_raw(env, n);
    return sr.poincare_constant;
  };
  auto values = run_replicas<double>(static_cast<std::int64_t>(tasks.size()), worker);
  for (size_t t = 0; t < tasks.size(); ++t)
    rep.a_values[tasks[t].ni].push_back(values[t]);

  std::vector<double> slopes;
  for (std::int64_t r = 0; r < replicas; ++r) {
    std::vector<double> lx, ly;
    for (size_t ni = 0; ni < n_list.size(); ++ni) {
      lx.push_back(std::log(static_cast<double>(n_list[ni])));
      ly.push_back(std::log(rep.a_values[ni][static_cast<size_t>(r)]));
    }
    slopes.push_back(ols_fit(lx, ly).slope);
  }
  rep.slope = mean_se(slopes);
  return rep;
}

// ---------------------------------------------------------------------------
// Config plumbing

namespace {

using nlohmann::json;

RunMode parse_mode(const std::string& s) {
  if (s == "quenched") return RunMode::quenched;
  if (s == "annealed") return RunMode::annealed;
  throw std::invalid_argument("unknown mode: " + s);
}

std::string mode_name(RunMode m) { return m == RunMode::quenched ? "quenched" : "annealed"; }

StartPolicy parse_start(const std::string& s) {
  if (s == "origin") return StartPolicy::center_alpha_giant;
  if (s == "origin-cxi") return StartPolicy::center_cxi;
  if (s == "random-in-giant") return StartPolicy::stationary;
  throw std::invalid_argument("unknown start policy: " + s);
}

std::string start_name(StartPolicy p) {
  switch (p) {
    case StartPolicy::center_alpha_giant: return "origin";
    case StartPolicy::center_cxi: return "origin-cxi";
    case StartPolicy::stationary: return "random-in-giant";
  }
  return "origin";
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig cfg;
  cfg.schema_version = j.at("schema_version").get<int>();
  if (cfg.schema_version != 1)
    throw std::invalid_argument("unsupported config schema version");
  cfg.experiment = j.at("experiment").get<std::string>();
  if (j.contains("env")) {
    const auto& e = j.at("env");
    cfg.env.d = e.value("d", 2);
    cfg.env.L = e.value("L", std::int64_t{64});
    cfg.env.boundary = e.value("boundary", std::string("torus")) == "free" ? Boundary::free
                                                                           : Boundary::torus;
    cfg.env.law = ConductanceLaw::parse(e.value("law", std::string("constant:1")));
    cfg.env.env_seed = e.value("env_seed", std::uint64_t{1});
  }
  cfg.mode = parse_mode(j.value("mode", std::string("quenched")));
  cfg.start = parse_start(j.value("start", std::string("origin")));
  cfg.xi = j.value("xi", 0.0);
  cfg.xi_list = j.value("xi_list", std::vector<double>{});
  cfg.horizons = j.value("horizons", std::vector<double>{});
  cfg.intrinsic_horizon = j.value("intrinsic_horizon", 0.0);
  cfg.replicas = j.value("replicas", std::int64_t{100});
  cfg.walk_seed = j.value("walk_seed", std::uint64_t{1});
  cfg.exit_radii = j.value("exit_radii", std::vector<double>{});
  cfg.exit_times = j.value("exit_times", std::vector<double>{});
  cfg.n_list = j.value("n_list", std::vector<std::int64_t>{});
  cfg.t_grid = j.value("t_grid", std::vector<double>{});
  cfg.min_pair_distance = j.value("min_pair_distance", 0.0);
  cfg.sources = j.value("sources", std::int64_t{16});
  cfg.calibration_runs = j.value("calibration_runs", std::int64_t{0});
  cfg.calibration_samples = j.value("calibration_samples", std::int64_t{0});
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json_text(ss.str());
}

std::string ExperimentConfig::to_canonical_json() const {
  json j;
  j["schema_version"] = schema_version;
  j["experiment"] = experiment;
  j["env"] = {{"d", env.d},
              {"L", env.L},
              {"boundary", boundary_name(env.boundary)},
              {"law", env.law.tag()},
              {"env_seed", env.env_seed}};
  j["mode"] = mode_name(mode);
  j["start"] = start_name(start);
  j["xi"] = xi;
  j["xi_list"] = xi_list;
  j["horizons"] = horizons;
  j["intrinsic_horizon"] = intrinsic_horizon;
  j["replicas"] = replicas;
  j["walk_seed"] = walk_seed;
  j["exit_radii"] = exit_radii;
  j["exit_times"] = exit_times;
  j["n_list"] = n_list;
  j["t_grid"] = t_grid;
  j["min_pair_distance"] = min_pair_distance;
  j["sources"] = sources;
  j["calibration_runs"] = calibration_runs;
  j["calibration_samples"] = calibration_samples;
  return j.dump(2);
}

void ResultTable::add(const std::string& quantity, double value, double se, std::int64_t count,
                      const std::string& meta) {
  rows.push_back({quantity, value, se, count, meta});
}

double ResultTable::value_of(const std::string& quantity) const {
  for (const auto& r : rows)
    if (r.quantity == quantity) return r.value;
  throw std::out_of_range("no result row named " + quantity);
}

std::string ResultTable::to_csv() const {
  std::string out = "quantity,value,se,count,meta\n";
  char buf[128];
  for (const auto& r : rows) {
    out += r.quantity;
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,", r.value, r.se);
    out += buf;
    std::snprintf(buf, sizeof buf, "%lld,", static_cast<long long>(r.count));
    out += buf;
    out += r.meta;
    out += "\n";
  }
  return out;
}

namespace {

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

ResultTable run_sigma2(const ExperimentConfig& cfg) {
  ResultTable t;
  auto est = estimate_sigma2(cfg.env, cfg.mode, cfg.xi, cfg.horizons, cfg.replicas, cfg.walk_seed,
                             cfg.start);
  for (size_t k = 0; k < est.horizons.size(); ++k)
    t.add("sigma2_at_t=" + fmt_g(est.horizons[k]), est.per_horizon[k].mean, est.per_horizon[k].se,
          est.per_horizon[k].count);
  t.add("sigma2", est.sigma2.mean, est.sigma2.se, est.sigma2.count);
  t.add("start_substitutions", static_cast<double>(est.start_substitutions), 0.0, est.replicas);
  if (est.horizons.size() >= 2) {
    std::vector<double> ts, ms;
    for (size_t k = 0; k < est.horizons.size(); ++k) {
      ts.push_back(est.horizons[k]);
      ms.push_back(est.per_horizon[k].mean * est.horizons[k] * cfg.env.d);
    }
    OlsFit fit = ols_fit(ts, ms);  // slope of E|X|^2 vs t
    t.add("mean_square_slope", fit.slope, fit.slope_se, static_cast<std::int64_t>(ts.size()));
  }
  return t;
}

ResultTable run_c_xi(const ExperimentConfig& cfg) {
  ResultTable t;
  std::vector<double> xis = cfg.xi_list.empty() ? std::vector<double>{cfg.xi} : cfg.xi_list;
  Environment env = make_environment(cfg.env);
  double horizon = cfg.horizons.empty() ? 200.0 : cfg.horizons.back();
  for (double xi : xis) {
    XiStructure xs = build_xi_structure(env, xi);
    auto est = estimate_c_xi(env, xs, horizon, cfg.replicas, cfg.walk_seed, cfg.start);
    t.add("c_xi_e1_at_xi=" + fmt_g(xi), est.e1.mean, est.e1.se, est.e1.count);
    t.add("c_xi_e2_at_xi=" + fmt_g(xi), est.e2, 0.0, 1);
  }
  return t;
}

ResultTable run_variance_identity(const ExperimentConfig& cfg) {
  ResultTable t;
  double real_h = cfg.horizons.empty() ? 400.0 : cfg.horizons.back();
  double intr_h = cfg.intrinsic_horizon > 0 ? cfg.intrinsic_horizon : real_h * 0.75;
  auto rep = verify_variance_identity(cfg.env, cfg.xi, real_h, intr_h, cfg.replicas, cfg.walk_seed);
  t.add("sigma2", rep.sigma2, rep.sigma2_se, cfg.replicas);
  t.add("sigma2_xi", rep.sigma2_xi, rep.sigma2_xi_se, cfg.replicas);
  t.add("c_xi", rep.c_xi, 0.0, 1);
  t.add("identity_product", rep.product, 0.0, 0);
  t.add("identity_diff", rep.diff, rep.pooled_se, 0);
  t.add("identity_pass_3se", rep.pass_3se ? 1.0 : 0.0, 0.0, 0);
  return t;
}

ResultTable run_gaussianity(const ExperimentConfig& cfg) {
  ResultTable t;
  Environment env = make_environment(cfg.env);
  double horizon = cfg.horizons.empty() ? 400.0 : cfg.horizons.back();
  auto gs = gaussianity_samples(env, horizon, cfg.replicas, cfg.walk_seed);
  KsResult ks = gaussianity_test(gs.samples);
  t.add("sigma2_hat", gs.sigma2_hat, 0.0, cfg.replicas);
  t.add("ks_d", ks.d, 0.0, ks.n);
  t.add("ks_p", ks.p, 0.0, ks.n);
  return t;
}

ResultTable run_gaussianity_calibration(const ExperimentConfig& cfg) {
  ResultTable t;
  std::int64_t runs = cfg.calibration_runs > 0 ? cfg.calibration_runs : 1000;
  std::int64_t per = cfg.calibration_samples > 0 ? cfg.calibration_samples : 2000;
  auto rep = gaussianity_calibration(runs, per, cfg.walk_seed);
  t.add("false_rejection_rate", rep.rate, rep.binom_se, rep.runs);
  t.add("rejections", static_cast<double>(rep.rejections), 0.0, rep.runs);
  return t;
}

ResultTable run_kernel_decay(const ExperimentConfig& cfg) {
  ResultTable t;
  Environment env = make_environment(cfg.env);
  std::vector<double> grid = cfg.t_grid;
  if (grid.empty())
    for (double x = 10.0; x <= 100.0; x *= 1.25) grid.push_back(x);
  KernelDecayReport rep;
  if (cfg.xi > 0.0) {
    XiStructure xs = build_xi_structure(env, cfg.xi);
    EffectiveWeights w = effective_conductances(env, xs);
    SymmetricChain chain = chain_from_weights(w);
    Vertex start = center_nearest_giant(env, xs.prime_labeling, xs.cxi_id);
    rep = kernel_decay(chain, w.local_index(start), cfg.env.d, grid);
  } else {
    SymmetricChain chain = full_chain(env);
    rep = kernel_decay(chain, env.spec.center_vertex(), cfg.env.d, grid);
  }
  for (size_t k = 0; k < rep.times.size(); ++k)
    t.add("p00_at_t=" + fmt_g(rep.times[k]), rep.p00[k], 0.0, 0);
  t.add("loglog_slope", rep.loglog.slope, rep.loglog.slope_se,
        static_cast<std::int64_t>(rep.times.size()));
  t.add("scaled_max", rep.scaled_max, 0.0, 0);
  t.add("scaled_first", rep.scaled_first, 0.0, 0);
  t.add("scaled_last", rep.scaled_last, 0.0, 0);
  t.add("monotone_violations", static_cast<double>(rep.monotone_violations), 0.0, 0);
  t.add("stationary_floor", rep.stationary_floor, 0.0, 0);
  return t;
}

ResultTable run_exit_tail(const ExperimentConfig& cfg) {
  ResultTable t;
  Environment env = make_environment(cfg.env);
  XiStructure xs = build_xi_structure(env, cfg.xi);
  std::vector<double> radii = cfg.exit_radii.empty() ? std::vector<double>{6, 10, 16, 24}
                                                     : cfg.exit_radii;
  std::vector<double> times =
      cfg.exit_times.empty() ? std::vector<double>{4, 8, 16, 32, 64} : cfg.exit_times;
  auto rep = exit_tail_experiment(env, xs, radii, times, cfg.replicas, cfg.walk_seed);
  for (size_t ir = 0; ir < radii.size(); ++ir)
    for (size_t it = 0; it < times.size(); ++it)
      t.add("p_exit_r=" + fmt_g(radii[ir]) + "_t=" + fmt_g(times[it]), rep.p[ir][it], 0.0,
            cfg.replicas);
  t.add("c_e", rep.c_e, 0.0, cfg.replicas);
  t.add("c_e_cube", rep.c_e_cube, 0.0, cfg.replicas);
  t.add("c_e_batch_a", rep.c_e_batch_a, 0.0, cfg.replicas / 2);
  t.add("c_e_batch_b", rep.c_e_batch_b, 0.0, cfg.replicas - cfg.replicas / 2);
  return t;
}

ResultTable run_chemical_distance(const ExperimentConfig& cfg) {
  ResultTable t;
  Environment env = make_environment(cfg.env);
  XiStructure xs = build_xi_structure(env, cfg.xi);
  double min_dist = cfg.min_pair_distance > 0
                        ? cfg.min_pair_distance
                        : std::pow(std::log(static_cast<double>(cfg.env.L)), 2.0);
  auto rep = chemical_distance_experiment(env, xs, min_dist, cfg.sources, cfg.walk_seed);
  t.add("ols_slope", rep.ols_slope, 0.0, rep.pairs);
  t.add("max_ratio", rep.max_ratio, 0.0, rep.pairs);
  t.add("min_ratio", rep.min_ratio, 0.0, rep.pairs);
  t.add("mean_ratio", rep.mean_ratio, rep.mean_ratio_se, rep.pairs);
  t.add("unreachable", static_cast<double>(rep.unreachable), 0.0, rep.pairs);
  return t;
}

ResultTable run_poincare_scaling(const ExperimentConfig& cfg) {
  ResultTable t;
  std::vector<std::int64_t> ns = cfg.n_list.empty() ? std::vector<std::int64_t>{8, 16, 32, 64}
                                                    : cfg.n_list;
  auto rep = poincare_scaling(cfg.env.law, cfg.env.d, ns, cfg.replicas, cfg.env.env_seed);
  for (size_t k = 0; k < ns.size(); ++k) {
    MeanSE ms = mean_se(rep.a_values[k]);
    t.add("poincare_A_at_n=" + fmt_g(static_cast<double>(ns[k])), ms.mean, ms.se, ms.count);
  }
  t.add("loglog_slope", rep.slope.mean, rep.slope.se, rep.slope.count);
  return t;
}

}  // namespace

ResultTable run_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment == "sigma2") return run_sigma2(cfg);
  if (cfg.experiment == "c_xi") return run_c_xi(cfg);
  if (cfg.experiment == "variance_identity") return run_variance_identity(cfg);
  if (cfg.experiment == "gaussianity") return run_gaussianity(cfg);
  if (cfg.experiment == "gaussianity_calibration") return run_gaussianity_calibration(cfg);
  if (cfg.experiment == "kernel_decay") return run_kernel_decay(cfg);
  if (cfg.experiment == "exit_tail") return run_exit_tail(cfg);
  if (cfg.experiment == "chemical_distance") return run_chemical_distance(cfg);
  if (cfg.experiment == "poincare_scaling") return run_poincare_scaling(cfg);
  throw std::invalid_argument("unknown experiment: " + cfg.experiment);
}

void write_experiment_outputs(const ExperimentConfig& cfg, const ResultTable& table,
                              const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::string canonical = cfg.to_canonical_json();
  {
    std::ofstream os(fs::path(out_dir) / "results.csv", std::ios::binary);
    os << table.to_csv();
  }
  nlohmann::json manifest;
  manifest["schema_version"] = cfg.schema_version;
  manifest["toolkit_version"] = kToolkitVersion;
  manifest["config"] = nlohmann::json::parse(canonical);
  char hash_hex[32];
  std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical)));
  manifest["config_hash_fnv1a64"] = hash_hex;
  manifest["outputs"] = {"results.csv"};
  std::ofstream os(fs::path(out_dir) / "manifest.json", std::ios::binary);
  os << manifest.dump(2) << "\n";
}

}  // namespace rcm

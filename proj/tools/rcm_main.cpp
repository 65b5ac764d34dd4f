// Command-line front end: environment sampling, cluster/hole geometry,
// renormalization, walk ensembles, effective conductances, spectral gaps,
// exact kernels and the config-driven experiment runner.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rcm/effective.hpp"
#include "rcm/environment.hpp"
#include "rcm/experiments.hpp"
#include "rcm/heat_kernel.hpp"
#include "rcm/holes.hpp"
#include "rcm/renorm.hpp"
#include "rcm/spectral.hpp"
#include "rcm/walker.hpp"

using nlohmann::json;
using namespace rcm;

namespace {

Coords parse_coords(const std::string& text, int d) {
  Coords c{};
  std::stringstream ss(text);
  std::string piece;
  int k = 0;
  while (std::getline(ss, piece, ',')) {
    if (k >= d) throw CLI::ValidationError("coords", "too many coordinates");
    c[k++] = std::stoll(piece);
  }
  if (k != d) throw CLI::ValidationError("coords", "expected " + std::to_string(d) + " coordinates");
  return c;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"random-conductance walk toolkit"};
  app.require_subcommand(1);

  // --- env sample ---------------------------------------------------------
  auto* env_cmd = app.add_subcommand("env", "environment generation");
  env_cmd->require_subcommand(1);
  auto* env_sample = env_cmd->add_subcommand("sample", "draw an i.i.d. environment");
  int dim = 2;
  std::int64_t side = 64;
  std::string boundary = "torus", law_tag = "constant:1", out_path = "env.rcme";
  std::uint64_t seed = 1;
  env_sample->add_option("--dim", dim, "lattice dimension")->required();
  env_sample->add_option("--side", side, "side length L")->required();
  env_sample->add_option("--boundary", boundary, "free|torus")->default_val("torus");
  env_sample->add_option("--law", law_tag,
                         "conductance law, e.g. constant:1 bernoulli:0.6 "
                         "twopoint:0.6,0.1,0.9 zum:0.75 polytail:0.5")
      ->required();
  env_sample->add_option("--seed", seed, "64-bit seed")->required();
  env_sample->add_option("--out", out_path, "output file")->required();
  env_sample->callback([&] {
    LatticeSpec spec(dim, side, boundary == "free" ? Boundary::free : Boundary::torus);
    Environment env = sample_environment(spec, ConductanceLaw::parse(law_tag), seed);
    write_environment(env, out_path);
    std::cout << "wrote " << out_path << " (" << env.values.size() << " edge slots)\n";
  });

  // --- geom ---------------------------------------------------------------
  auto* geom_cmd = app.add_subcommand("geom", "cluster and hole geometry");
  geom_cmd->require_subcommand(1);

  auto* holes_cmd = geom_cmd->add_subcommand("holes", "hole decomposition at a threshold");
  std::string env_path;
  double xi = 0.1;
  bool as_json = false;
  holes_cmd->add_option("--env", env_path, "environment file")->required();
  holes_cmd->add_option("--xi", xi, "threshold")->required();
  holes_cmd->add_flag("--json", as_json, "emit JSON");
  holes_cmd->callback([&] {
    Environment env = read_environment(env_path);
    XiStructure xs = build_xi_structure(env, xi);
    auto stats = hole_volume_stats(xs.holes, env.spec.L / 2, env.spec);
    json j;
    j["xi"] = xi;
    j["hole_count"] = xs.holes.holes.size();
    j["max_volume"] = stats.max_volume;
    j["cxi_size"] = xs.cxi_size;
    j["alpha_giant_size"] = xs.alpha_giant.size;
    json hist = json::array();
    for (auto& [vol, cnt] : stats.histogram) hist.push_back({{"volume", vol}, {"count", cnt}});
    j["volume_histogram"] = hist;
    if (as_json) {
      std::cout << j.dump(2) << "\n";
    } else {
      std::cout << "holes: " << xs.holes.holes.size() << ", max volume " << stats.max_volume
                << ", C^xi size " << xs.cxi_size << "\n";
    }
  });

  auto* chem_cmd = geom_cmd->add_subcommand("chemdist", "chemical distance between vertices");
  std::string from_s, to_s;
  chem_cmd->add_option("--env", env_path, "environment file")->required();
  chem_cmd->add_option("--xi", xi, "threshold")->required();
  chem_cmd->add_option("--from", from_s, "source coords, comma separated")->required();
  chem_cmd->add_option("--to", to_s, "target coords, comma separated")->required();
  chem_cmd->callback([&] {
    Environment env = read_environment(env_path);
    XiStructure xs = build_xi_structure(env, xi);
    Vertex a = env.spec.encode(parse_coords(from_s, env.spec.d));
    Vertex b = env.spec.encode(parse_coords(to_s, env.spec.d));
    std::int64_t dist = chemical_distance(xs, a, b);
    json j;
    j["from"] = from_s;
    j["to"] = to_s;
    j["xi"] = xi;
    if (dist < 0)
      j["distance"] = nullptr;
    else
      j["distance"] = dist;
    std::cout << j.dump() << "\n";
  });

  // --- renorm --------------------------------------------------------------
  auto* renorm_cmd = app.add_subcommand("renorm", "block renormalization");
  renorm_cmd->require_subcommand(1);
  auto* classify_cmd = renorm_cmd->add_subcommand("classify", "color the block field");
  std::int64_t block_n = 8;
  std::string class_out = "classification.json";
  bool strict = false, exhaustive = false;
  classify_cmd->add_option("--env", env_path)->required();
  classify_cmd->add_option("--xi", xi)->required();
  classify_cmd->add_option("--block-size", block_n, "block scale N (multiple of 4)")->required();
  classify_cmd->add_option("--out", class_out)->required();
  classify_cmd->add_flag("--strict-uniqueness", strict, "strict unique-cluster reading");
  classify_cmd->add_flag("--exhaustive-subboxes", exhaustive, "check every subbox");
  classify_cmd->callback([&] {
    Environment env = read_environment(env_path);
    XiStructure xs = build_xi_structure(env, xi);
    ClassifyOptions opt;
    opt.strict_uniqueness = strict;
    opt.exhaustive_subboxes = exhaustive;
    BoxClassification cls = classify_boxes(xs.alpha, xs.alpha_prime, block_n, opt);
    json j;
    j["N"] = block_n;
    j["xi"] = xi;
    j["blocks_per_axis"] = cls.grid.blocks_per_axis;
    j["white_fraction"] = cls.white_fraction();
    j["pure_white_fraction"] = cls.pure_white_fraction();
    j["immaculate_fraction"] = cls.immaculate_fraction();
    json blocks = json::array();
    for (std::int64_t b = 0; b < cls.grid.block_count; ++b) {
      const char* color = cls.color[static_cast<size_t>(b)] == BoxColor::black
                              ? "black"
                              : (cls.color[static_cast<size_t>(b)] == BoxColor::grey ? "grey"
                                                                                     : "pure_white");
      blocks.push_back({{"index", b},
                        {"color", color},
                        {"immaculate", static_cast<bool>(cls.immaculate[static_cast<size_t>(b)])},
                        {"interior", static_cast<bool>(cls.interior[static_cast<size_t>(b)])}});
    }
    j["blocks"] = blocks;
    std::ofstream os(class_out);
    os << j.dump(2) << "\n";
    std::cout << "white " << cls.white_fraction() << ", pure white " << cls.pure_white_fraction()
              << ", immaculate " << cls.immaculate_fraction() << " -> " << class_out << "\n";
  });

  auto* estimate_cmd = renorm_cmd->add_subcommand("estimate", "renormalized site parameters");
  double qq = 0.75, pp = 0.95;
  std::int64_t reps = 8, window_side = 90;
  estimate_cmd->add_option("--q", qq, "alpha openness")->required();
  estimate_cmd->add_option("--p", pp, "alpha' keep probability")->required();
  estimate_cmd->add_option("--block-size", block_n)->required();
  estimate_cmd->add_option("--side", window_side, "window side");
  estimate_cmd->add_option("--replicas", reps);
  estimate_cmd->add_option("--seed", seed);
  estimate_cmd->add_option("--dim", dim);
  estimate_cmd->callback([&] {
    auto est = estimate_renormalized_params(dim, window_side, qq, pp, block_n, reps, seed);
    json j;
    j["N"] = est.N;
    j["p_hat"] = est.p_hat;
    j["p_hat_prime"] = est.p_hat_prime;
    j["p_hat_second"] = est.p_hat_second;
    j["ci99_hat"] = est.ci_hat;
    j["ci99_prime"] = est.ci_prime;
    j["ci99_second"] = est.ci_second;
    j["replica_se_hat"] = est.se_hat;
    j["theory_prime_from_hat"] = est.theory_prime_from_hat;
    j["theory_second_from_prime"] = est.theory_second_from_prime;
    j["interior_blocks"] = est.interior_blocks;
    std::cout << j.dump(2) << "\n";
  });

  // --- walk ----------------------------------------------------------------
  auto* walk_cmd = app.add_subcommand("walk", "trajectory ensembles");
  walk_cmd->require_subcommand(1);
  auto* walk_run = walk_cmd->add_subcommand("run", "simulate replicas and write per-walk stats");
  double horizon = 100.0;
  std::int64_t replicas = 100;
  std::string start_policy = "origin", walk_out = "traj-stats.csv";
  walk_run->add_option("--env", env_path)->required();
  walk_run->add_option("--xi", xi, "threshold (0 disables the time change)")->default_val(0.0);
  walk_run->add_option("--start", start_policy, "origin|random-in-giant")->default_val("origin");
  walk_run->add_option("--horizon", horizon)->required();
  walk_run->add_option("--replicas", replicas)->required();
  walk_run->add_option("--seed", seed)->required();
  walk_run->add_option("--out", walk_out)->required();
  walk_run->callback([&] {
    Environment env = read_environment(env_path);
    std::optional<XiStructure> xs;
    if (xi > 0.0) xs.emplace(build_xi_structure(env, xi));
    EdgeMask alpha = threshold_mask(env, 0.0);
    ClusterLabeling lab = label_clusters(env.spec, alpha);
    GiantCluster giant = giant_cluster(lab);
    std::optional<StationarySampler> stat;
    Vertex fixed = 0;
    if (start_policy == "random-in-giant")
      stat = make_stationary_sampler(env, lab, giant.id);
    else
      fixed = center_nearest_giant(env, lab, giant.id);
    struct Row {
      std::int64_t jumps;
      double norm, sup, a_frac;
    };
    auto rows = run_replicas<Row>(replicas, [&](std::int64_t rep) {
      SplitMix64 rng(derive_stream(seed, static_cast<std::uint64_t>(rep)));
      Vertex start = stat ? stat->draw(rng) : fixed;
      ProbeTargets t;
      t.real_times = {horizon};
      t.sup_horizon = horizon;
      if (xs) t.a_horizon = horizon;
      ProbeOutcome o = probe_walk(env, xs ? &*xs : nullptr, start, t, rng);
      double s = 0.0;
      for (int c = 0; c < env.spec.d; ++c)
        s += static_cast<double>(o.at_real[0][c]) * static_cast<double>(o.at_real[0][c]);
      return Row{o.jumps, std::sqrt(s), o.sup_norm, o.a_fraction};
    });
    std::ofstream os(walk_out, std::ios::binary);
    os << "replica,jumps,displacement,sup_displacement,a_fraction\n";
    for (std::int64_t r = 0; r < replicas; ++r) {
      const Row& row = rows[static_cast<size_t>(r)];
      os << r << "," << row.jumps << "," << fmt17(row.norm) << "," << fmt17(row.sup) << ","
         << fmt17(row.a_frac) << "\n";
    }
    std::cout << "wrote " << walk_out << "\n";
  });

  // --- eff -----------------------------------------------------------------
  auto* eff_cmd = app.add_subcommand("eff", "effective conductances and spectra");
  eff_cmd->require_subcommand(1);

  auto* weights_cmd = eff_cmd->add_subcommand("weights", "sparse effective weights");
  std::string window_s = "full", weights_out = "weights.json";
  weights_cmd->add_option("--env", env_path)->required();
  weights_cmd->add_option("--xi", xi)->required();
  weights_cmd->add_option("--window", window_s, "full or lo0,lo1,..:hi0,hi1,..");
  weights_cmd->add_option("--out", weights_out)->required();
  weights_cmd->callback([&] {
    Environment env = read_environment(env_path);
    Window win = Window::whole();
    if (window_s != "full") {
      auto colon = window_s.find(':');
      if (colon == std::string::npos)
        throw CLI::ValidationError("--window", "expected lo0,lo1,..:hi0,hi1,..");
      win = Window::box(parse_coords(window_s.substr(0, colon), env.spec.d),
                        parse_coords(window_s.substr(colon + 1), env.spec.d));
    }
    EffectiveWeights w = effective_conductances(env, xi, win);
    json j;
    j["xi"] = xi;
    j["vertex_count"] = w.vertices.size();
    json trips = json::array();
    for (const auto& e : w.entries) {
      json t;
      t["x"] = w.vertices[static_cast<size_t>(e.i)];
      t["y"] = w.vertices[static_cast<size_t>(e.j)];
      t["w"] = fmt17(e.w);
      t["partial"] = e.partial;
      trips.push_back(t);
    }
    j["weights"] = trips;
    std::ofstream os(weights_out);
    os << j.dump(2) << "\n";
    std::cout << "wrote " << weights_out << " (" << w.entries.size() << " pairs)\n";
  });

  auto* gap_cmd = eff_cmd->add_subcommand("gap", "Poincare constant on the centered box");
  std::int64_t box_n = 8;
  bool raw = false;
  gap_cmd->add_option("--env", env_path)->required();
  gap_cmd->add_option("--xi", xi, "threshold; ignored with --raw")->default_val(0.1);
  gap_cmd->add_option("--n", box_n, "box half-side")->required();
  gap_cmd->add_flag("--raw", raw, "plain walk instead of the time-changed one");
  gap_cmd->callback([&] {
    Environment env = read_environment(env_path);
    SpectralReport rep = raw ? poincare_constant_raw(env, box_n)
                             : poincare_constant_xi(env, xi, box_n);
    json j;
    j["n"] = box_n;
    j["component_size"] = rep.component_size;
    j["gap"] = rep.gap;
    j["poincare_constant"] = rep.poincare_constant;
    j["lanczos_iterations"] = rep.lanczos_iterations;
    j["residual"] = rep.residual;
    std::cout << j.dump(2) << "\n";
  });

  auto* kernel_cmd = eff_cmd->add_subcommand("kernel", "exact transition kernel row");
  std::string x_s = "0,0";
  double t_kernel = 10.0;
  double prob_floor = 1e-9;
  kernel_cmd->add_option("--env", env_path)->required();
  kernel_cmd->add_option("--x", x_s, "source coords")->required();
  kernel_cmd->add_option("--t", t_kernel)->required();
  kernel_cmd->add_option("--floor", prob_floor, "omit entries below this mass");
  kernel_cmd->callback([&] {
    Environment env = read_environment(env_path);
    SymmetricChain chain = full_chain(env);
    Vertex x = env.spec.encode(parse_coords(x_s, env.spec.d));
    auto p = heat_kernel_exact(chain, x, t_kernel);
    json j;
    j["t"] = t_kernel;
    j["x"] = x_s;
    double mass = 0.0;
    json entries = json::array();
    for (size_t k = 0; k < p.size(); ++k) {
      mass += p[k];
      if (p[k] >= prob_floor)
        entries.push_back({{"vertex", chain.states[k]}, {"p", fmt17(p[k])}});
    }
    j["total_mass"] = fmt17(mass);
    j["entries"] = entries;
    std::cout << j.dump() << "\n";
  });

  // --- exp -----------------------------------------------------------------
  auto* exp_cmd = app.add_subcommand("exp", "config-driven experiments");
  exp_cmd->require_subcommand(1);
  auto* exp_run = exp_cmd->add_subcommand("run", "run an experiment config");
  std::string cfg_path, results_dir = "results";
  exp_run->add_option("--config", cfg_path, "JSON config")->required();
  exp_run->add_option("--out", results_dir, "output directory")->required();
  exp_run->callback([&] {
    ExperimentConfig cfg = ExperimentConfig::from_json_file(cfg_path);
    ResultTable table = run_experiment(cfg);
    write_experiment_outputs(cfg, table, results_dir);
    std::cout << table.to_csv();
    std::cout << "wrote " << results_dir << "/results.csv and manifest.json\n";
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rcm/effective.hpp"
#include "rcm/environment.hpp"
#include "rcm/holes.hpp"
#include "rcm/spectral.hpp"
#include "rcm/stats.hpp"
#include "rcm/walker.hpp"

namespace rcm {

enum class RunMode { quenched, annealed };
enum class StartPolicy { center_alpha_giant, center_cxi, stationary };

struct EnvRecipe {
  int d = 2;
  std::int64_t L = 64;
  Boundary boundary = Boundary::torus;
  ConductanceLaw law = ConductanceLaw::constant(1.0);
  std::uint64_t env_seed = 1;
};

Environment make_environment(const EnvRecipe& recipe, std::uint64_t salt = 0);

// ---------------------------------------------------------------------------
// Single-pass walk probe: everything the estimators need from one replica,
// collected online so multi-million-jump walks never materialize in memory.

struct ProbeTargets {
  std::vector<double> real_times;            // sorted; X displacement snapshots
  std::vector<double> intrinsic_times;       // sorted; X^xi displacement snapshots
  double a_horizon = 0.0;                    // A(T)/T at this real T (0 = off)
  double sup_horizon = 0.0;                  // sup_{t<=T} |X| (0 = off)
  double pair_time = 0.0;                    // |X(T) - last C^xi position| (0 = off)
  std::vector<double> exit_radii_real;       // ball exits of X in real time
  std::vector<double> exit_radii_intrinsic;  // ball exits of X^xi in A-time
  double hard_time_cap = 1e9;
};

struct ProbeOutcome {
  std::vector<std::array<std::int32_t, kMaxDim>> at_real;
  std::vector<std::array<std::int32_t, kMaxDim>> at_intrinsic;
  std::vector<std::uint8_t> intrinsic_resolved;
  double a_fraction = -1.0;
  double sup_norm = 0.0;
  double pair_distance = -1.0;
  std::vector<double> exit_real;       // -1 = not exited
  std::vector<double> exit_intrinsic;  // -1 = not exited
  std::int64_t jumps = 0;
};

// xs may be null when no time change is needed.
ProbeOutcome probe_walk(const Environment& env, const XiStructure* xs, Vertex start,
                        const ProbeTargets& targets, SplitMix64& rng);

// Start-vertex policies. The center-nearest choices are the finite-volume
// conditioning on the giant cluster; the stationary draw is n^w-weighted on
// the giant alpha-cluster (substitution counts are reported by experiments).
Vertex center_nearest_giant(const Environment& env, const ClusterLabeling& labeling,
                            std::int32_t cluster_id);

struct StationarySampler {
  std::vector<Vertex> verts;
  std::vector<double> cum;  // cumulative n^w
  Vertex draw(SplitMix64& rng) const;
};
StationarySampler make_stationary_sampler(const Environment& env, const ClusterLabeling& labeling,
                                          std::int32_t cluster_id);

// ---------------------------------------------------------------------------
// Estimators.

struct Sigma2Estimate {
  MeanSE sigma2;                      // at the largest horizon
  std::vector<MeanSE> per_horizon;    // matching the horizon list
  std::vector<double> horizons;
  std::int64_t start_substitutions = 0;
  std::int64_t replicas = 0;
};

// xi <= 0: plain walk X at real horizons. xi > 0: time-changed walk X^xi at
// intrinsic horizons, run in its own clock.
Sigma2Estimate estimate_sigma2(const EnvRecipe& recipe, RunMode mode, double xi,
                               const std::vector<double>& horizons, std::int64_t replicas,
                               std::uint64_t walk_seed, StartPolicy policy);

struct CxiEstimate {
  MeanSE e1;      // temporal: A(T)/T over replicas
  double e2 = 0;  // spatial: n-weighted C^xi fraction on the giant cluster
  std::int64_t replicas = 0;
};

CxiEstimate estimate_c_xi(const Environment& env, const XiStructure& xs, double horizon,
                          std::int64_t replicas, std::uint64_t walk_seed,
                          StartPolicy policy = StartPolicy::stationary);

double spatial_c_xi(const Environment& env, const XiStructure& xs);

struct VarianceIdentityReport {
  double sigma2 = 0, sigma2_se = 0;
  double sigma2_xi = 0, sigma2_xi_se = 0;
  double c_xi = 0;
  double product = 0;       // c * sigma2_xi
  double diff = 0;          // product - sigma2
  double pooled_se = 0;
  bool pass_3se = false;
};

VarianceIdentityReport verify_variance_identity(const EnvRecipe& recipe, double xi,
                                                double real_horizon, double intrinsic_horizon,
                                                std::int64_t replicas, std::uint64_t walk_seed);

KsResult gaussianity_test(const std::vector<double>& standardized_samples);

struct GaussianitySamples {
  std::vector<double> samples;  // coordinate-0 displacements scaled by sqrt(sigma2_hat * t)
  double sigma2_hat = 0.0;
};
GaussianitySamples gaussianity_samples(const Environment& env, double t, std::int64_t replicas,
                                       std::uint64_t walk_seed);

struct CalibrationReport {
  std::int64_t runs = 0;
  std::int64_t rejections = 0;  // p < 0.05
  double rate = 0.0;
  double binom_se = 0.0;
};
CalibrationReport gaussianity_calibration(std::int64_t runs, std::int64_t samples_per_run,
                                          std::uint64_t seed);

struct KernelDecayReport {
  std::vector<double> times;
  std::vector<double> p00;
  OlsFit loglog;                  // slope of log p vs log t, burn-in applied
  double scaled_max = 0.0;        // max over grid of t^{d/2} p00
  double scaled_first = 0.0;
  double scaled_last = 0.0;
  std::int64_t monotone_violations = 0;  // increases beyond 1e-9 relative
  double stationary_floor = 0.0;  // pi(x), reported for context
};

KernelDecayReport kernel_decay(const SymmetricChain& chain, std::int64_t state_index, int d,
                               const std::vector<double>& t_grid, double burn_in = 10.0);

struct ExitTailReport {
  std::vector<double> radii;
  std::vector<double> times;
  std::vector<std::vector<double>> p;  // p[ir][it]
  double c_e = 0.0;        // max P / (sqrt(t)/r)
  double c_e_cube = 0.0;   // max P / (sqrt(t)/r)^3
  double c_e_batch_a = 0.0, c_e_batch_b = 0.0;
  std::int64_t replicas = 0;
};

ExitTailReport exit_tail_experiment(const Environment& env, const XiStructure& xs,
                                    const std::vector<double>& radii,
                                    const std::vector<double>& times, std::int64_t replicas,
                                    std::uint64_t walk_seed);

struct ChemicalDistanceReport {
  double ols_slope = 0.0;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  std::int64_t pairs = 0;
  std::int64_t unreachable = 0;
  double mean_ratio = 0.0;
  double mean_ratio_se = 0.0;  // over sources
};

ChemicalDistanceReport chemical_distance_experiment(const Environment& env, const XiStructure& xs,
                                                    double min_distance, std::int64_t sources,
                                                    std::uint64_t seed);

struct PoincareScalingReport {
  std::vector<std::int64_t> n_list;
  std::vector<std::vector<double>> a_values;  // a_values[i][rep] for n_list[i]
  MeanSE slope;                               // per-replica log-log slopes
};

PoincareScalingReport poincare_scaling(const ConductanceLaw& law, int d,
                                       const std::vector<std::int64_t>& n_list,
                                       std::int64_t replicas, std::uint64_t env_seed);

// ---------------------------------------------------------------------------
// Config-driven runner (CLI surface).

struct ExperimentConfig {
  int schema_version = 1;
  std::string experiment;
  EnvRecipe env;
  RunMode mode = RunMode::quenched;
  StartPolicy start = StartPolicy::center_alpha_giant;
  double xi = 0.0;
  std::vector<double> xi_list;
  std::vector<double> horizons;
  double intrinsic_horizon = 0.0;
  std::int64_t replicas = 100;
  std::uint64_t walk_seed = 1;
  std::vector<double> exit_radii;
  std::vector<double> exit_times;
  std::vector<std::int64_t> n_list;
  std::vector<double> t_grid;
  double min_pair_distance = 0.0;
  std::int64_t sources = 16;
  std::int64_t calibration_runs = 0;
  std::int64_t calibration_samples = 0;

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_json_file(const std::string& path);
  std::string to_canonical_json() const;
};

struct ResultRow {
  std::string quantity;
  double value = 0.0;
  double se = 0.0;
  std::int64_t count = 0;
  std::string meta;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  void add(const std::string& quantity, double value, double se = 0.0, std::int64_t count = 0,
           const std::string& meta = "");
  double value_of(const std::string& quantity) const;
  std::string to_csv() const;  // UTF-8, header row, 17 significant digits
};

ResultTable run_experiment(const ExperimentConfig& cfg);

// Writes results.csv and manifest.json (config hash, seeds, version) into
// out_dir; reruns from the same config are byte-identical.
void write_experiment_outputs(const ExperimentConfig& cfg, const ResultTable& table,
                              const std::string& out_dir);

extern const char* kToolkitVersion;

}  // namespace rcm

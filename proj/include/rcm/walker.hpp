#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rcm/environment.hpp"
#include "rcm/holes.hpp"
#include "rcm/lattice.hpp"
#include "rcm/rng.hpp"

namespace rcm {

// Piecewise-constant path of the continuous-time walk as an event list.
// Positions are stored both wrapped (vertex id, for membership queries) and
// as the unwrapped displacement from the start (for diffusivity statistics).
struct Trajectory {
  LatticeSpec spec;
  Vertex start = 0;
  double horizon = 0.0;
  std::vector<double> times;          // strictly increasing jump times
  std::vector<Vertex> verts;          // position after each jump
  std::vector<std::int32_t> disp;     // d entries per jump, displacement from start

  std::int64_t jump_count() const { return static_cast<std::int64_t>(times.size()); }

  Vertex position_at(double t) const;
  // Unwrapped displacement at time t (d entries).
  std::array<std::int32_t, kMaxDim> displacement_at(double t) const;
};

// Single-walker stepper; experiments drive it directly to avoid storing
// multi-million-jump trajectories.
class WalkSim {
 public:
  WalkSim(const Environment& env, Vertex x0)
      : env_(&env), vertex_(x0) {
    disp_.fill(0);
  }

  // Advances one jump. Returns false (and consumes no randomness) if the
  // walker is frozen at an isolated vertex.
  bool step(SplitMix64& rng);

  Vertex vertex() const { return vertex_; }
  double time() const { return time_; }
  const std::array<std::int32_t, kMaxDim>& displacement() const { return disp_; }
  double displacement_norm2() const;

 private:
  const Environment* env_;
  Vertex vertex_;
  double time_ = 0.0;
  std::array<std::int32_t, kMaxDim> disp_{};
};

// Exact continuous-time simulation: Exp(1) waits, jump law w(x,.)/n^w(x).
Trajectory simulate_walk(const Environment& env, Vertex x0, double horizon, SplitMix64& rng);

// A^xi table over a trajectory: segment flags plus cumulative time spent on
// C^xi, O(log) evaluation of A and its right-continuous inverse.
struct TimeChange {
  const Trajectory* source = nullptr;
  double xi = 0.0;
  std::vector<double> seg_start;       // segment k covers [seg_start[k], seg_start[k+1])
  std::vector<Vertex> seg_vertex;
  std::vector<std::uint8_t> seg_in_cxi;
  std::vector<double> a_at;            // A at each segment start; back() = A(horizon)

  double horizon() const { return source->horizon; }
  double total() const { return a_at.back(); }
  double a(double t) const;
  // Right-continuous inverse inf{u : A(u) > s}.
  double a_inverse(double s) const;
};

TimeChange build_time_change(const Trajectory& traj, const XiStructure& xs);

// X^xi(s) = X((A^xi)^{-1}(s)); throws std::out_of_range past A(horizon).
Vertex time_changed_position(const TimeChange& tc, double s);

// Event list of the time-changed process in intrinsic time; re-entries at
// the same vertex are merged.
std::vector<std::pair<double, Vertex>> xi_jump_list(const TimeChange& tc);

struct Region {
  enum class Kind { box, ball };
  Kind kind = Kind::ball;
  double size = 0.0;  // half-side for box, Euclidean radius for ball

  static Region box(double half_side) { return {Kind::box, half_side}; }
  static Region ball(double radius) { return {Kind::ball, radius}; }
  bool contains(const std::array<std::int32_t, kMaxDim>& disp, int d) const;
};

// First jump time with the walker outside the region centered at the start;
// nullopt if it never exits before the horizon.
std::optional<double> exit_time(const Trajectory& traj, const Region& region);

// Deterministic replica map: results land in a preallocated slot per index,
// so the reduction is independent of completion order. A replica that throws
// aborts the whole run with its index reported.
template <typename T, typename Fn>
std::vector<T> run_replicas(std::int64_t count, const Fn& fn, bool parallel = true) {
  std::vector<T> out(static_cast<size_t>(count));
  std::string error;
  std::int64_t error_index = -1;
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      out[static_cast<size_t>(i)] = fn(i);
    } catch (const std::exception& e) {
#pragma omp critical
      if (error_index < 0 || i < error_index) {
        error_index = i;
        error = e.what();
      }
    }
  }
  if (error_index >= 0)
    throw std::runtime_error("replica " + std::to_string(error_index) + " failed: " + error);
  return out;
}

}  // namespace rcm

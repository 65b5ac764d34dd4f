#include "rcm/walker.hpp"

#include <algorithm>
#include <cmath>

namespace rcm {

Vertex Trajectory::position_at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return start;
  return verts[static_cast<size_t>(it - times.begin()) - 1];
}

std::array<std::int32_t, kMaxDim> Trajectory::displacement_at(double t) const {
  std::array<std::int32_t, kMaxDim> out{};
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return out;
  size_t k = static_cast<size_t>(it - times.begin()) - 1;
  for (int i = 0; i < spec.d; ++i) out[i] = disp[k * static_cast<size_t>(spec.d) + i];
  return out;
}

bool WalkSim::step(SplitMix64& rng) {
  const Environment& env = *env_;
  std::array<std::pair<Vertex, std::int64_t>, 2 * kMaxDim> inc;
  int cnt = incident_edges(env.spec, vertex_, inc);
  double n = 0.0;
  for (int i = 0; i < cnt; ++i) n += env.values[static_cast<size_t>(inc[i].second)];
  if (n <= 0.0) return false;  // frozen forever
  time_ += rng.next_exponential();
  double u = rng.next_half_open() * n;
  double acc = 0.0;
  int pick = cnt - 1;
  for (int i = 0; i < cnt; ++i) {
    acc += env.values[static_cast<size_t>(inc[i].second)];
    if (u < acc) {
      pick = i;
      break;
    }
  }
  std::int64_t slot = inc[pick].second;
  int axis = static_cast<int>(slot % env.spec.d);
  int dir = (slot / env.spec.d == vertex_) ? +1 : -1;
  disp_[axis] += dir;
  vertex_ = inc[pick].first;
  return true;
}

double WalkSim::displacement_norm2() const {
  double s = 0.0;
  for (int k = 0; k < env_->spec.d; ++k)
    s += static_cast<double>(disp_[k]) * static_cast<double>(disp_[k]);
  return s;
}

Trajectory simulate_walk(const Environment& env, Vertex x0, double horizon, SplitMix64& rng) {
  if (!(horizon > 0.0)) throw std::invalid_argument("simulate_walk: horizon must be positive");
  Trajectory traj;
  traj.spec = env.spec;
  traj.start = x0;
  traj.horizon = horizon;
  const int d = env.spec.d;
  WalkSim sim(env, x0);
  while (sim.step(rng) && sim.time() <= horizon) {
    traj.times.push_back(sim.time());
    traj.verts.push_back(sim.vertex());
    for (int k = 0; k < d; ++k) traj.disp.push_back(sim.displacement()[k]);
  }
  return traj;
}

TimeChange build_time_change(const Trajectory& traj, const XiStructure& xs) {
  TimeChange tc;
  tc.source = &traj;
  tc.xi = xs.xi;
  size_t m = traj.times.size();
  tc.seg_start.reserve(m + 1);
  tc.seg_vertex.reserve(m + 1);
  tc.seg_in_cxi.reserve(m + 1);
  tc.a_at.reserve(m + 2);
  tc.seg_start.push_back(0.0);
  tc.seg_vertex.push_back(traj.start);
  tc.seg_in_cxi.push_back(xs.in_cxi(traj.start) ? 1 : 0);
  for (size_t k = 0; k < m; ++k) {
    tc.seg_start.push_back(traj.times[k]);
    tc.seg_vertex.push_back(traj.verts[k]);
    tc.seg_in_cxi.push_back(xs.in_cxi(traj.verts[k]) ? 1 : 0);
  }
  double a = 0.0;
  tc.a_at.push_back(0.0);
  for (size_t k = 0; k < tc.seg_start.size(); ++k) {
    double seg_end = (k + 1 < tc.seg_start.size()) ? tc.seg_start[k + 1] : traj.horizon;
    if (tc.seg_in_cxi[k]) a += seg_end - tc.seg_start[k];
    tc.a_at.push_back(a);
  }
  return tc;
}

double TimeChange::a(double t) const {
  if (t <= 0.0) return 0.0;
  if (t >= horizon()) return total();
  auto it = std::upper_bound(seg_start.begin(), seg_start.end(), t);
  size_t k = static_cast<size_t>(it - seg_start.begin()) - 1;
  double val = a_at[k];
  if (seg_in_cxi[k]) val += t - seg_start[k];
  return val;
}

double TimeChange::a_inverse(double s) const {
  if (s < 0.0) throw std::out_of_range("time change inverse: negative intrinsic time");
  if (s >= total()) throw std::out_of_range("time change inverse: beyond A(horizon)");
  // First segment whose ending A-value exceeds s; A grows only on C^xi.
  size_t lo = 0, hi = seg_start.size();
  while (lo < hi) {
    size_t mid = (lo + hi) / 2;
    if (a_at[mid + 1] > s) hi = mid; else lo = mid + 1;
  }
  return seg_start[lo] + (s - a_at[lo]);
}

Vertex time_changed_position(const TimeChange& tc, double s) {
  double u = tc.a_inverse(s);
  auto it = std::upper_bound(tc.seg_start.begin(), tc.seg_start.end(), u);
  size_t k = static_cast<size_t>(it - tc.seg_start.begin()) - 1;
  return tc.seg_vertex[k];
}

std::vector<std::pair<double, Vertex>> xi_jump_list(const TimeChange& tc) {
  std::vector<std::pair<double, Vertex>> out;
  for (size_t k = 0; k < tc.seg_start.size(); ++k) {
    if (!tc.seg_in_cxi[k]) continue;
    Vertex v = tc.seg_vertex[k];
    if (!out.empty() && out.back().second == v) continue;  // re-entry at the same vertex
    out.emplace_back(tc.a_at[k], v);
  }
  return out;
}

bool Region::contains(const std::array<std::int32_t, kMaxDim>& disp, int d) const {
  if (kind == Kind::box) {
    for (int k = 0; k < d; ++k)
      if (std::abs(disp[k]) > size) return false;
    return true;
  }
  double s = 0.0;
  for (int k = 0; k < d; ++k) s += static_cast<double>(disp[k]) * static_cast<double>(disp[k]);
  return s <= size * size;
}

std::optional<double> exit_time(const Trajectory& traj, const Region& region) {
  if (!(region.size > 0.0)) throw std::domain_error("exit_time: start outside region");
  const int d = traj.spec.d;
  std::array<std::int32_t, kMaxDim> disp{};
  for (size_t k = 0; k < traj.times.size(); ++k) {
    for (int i = 0; i < d; ++i) disp[i] = traj.disp[k * static_cast<size_t>(d) + i];
    if (!region.contains(disp, d)) return traj.times[k];
  }
  return std::nullopt;
}

}  // namespace rcm

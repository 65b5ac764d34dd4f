#include "rcm/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <unordered_map>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "rcm/rng.hpp"

namespace rcm {

namespace {

struct BoxBounds {
  Coords lo, hi;
};

BoxBounds centered_box(const LatticeSpec& spec, std::int64_t n) {
  if (2 * n + 1 > spec.L)
    throw std::invalid_argument("box [-n,n]^d does not fit in the lattice");
  Coords center = spec.decode(spec.center_vertex());
  BoxBounds b{};
  for (int k = 0; k < spec.d; ++k) {
    b.lo[k] = center[k] - n;
    b.hi[k] = center[k] + n;
    if (spec.boundary == Boundary::free) {
      // Shift the window inside the lattice if the center is off-balance.
      if (b.lo[k] < 0) { b.hi[k] -= b.lo[k]; b.lo[k] = 0; }
      if (b.hi[k] >= spec.L) { b.lo[k] -= b.hi[k] - spec.L + 1; b.hi[k] = spec.L - 1; }
    }
  }
  return b;
}

bool box_contains(const LatticeSpec& spec, const BoxBounds& b, Vertex v) {
  Coords c = spec.decode(v);
  for (int k = 0; k < spec.d; ++k) {
    std::int64_t x = c[k];
    if (spec.boundary == Boundary::torus) {
      // Window may wrap; normalize to the lo..hi range.
      std::int64_t lo = ((b.lo[k] % spec.L) + spec.L) % spec.L;
      std::int64_t span = b.hi[k] - b.lo[k];
      std::int64_t rel = ((x - lo) % spec.L + spec.L) % spec.L;
      if (rel > span) return false;
    } else {
      if (x < b.lo[k] || x > b.hi[k]) return false;
    }
  }
  return true;
}

SymmetricChain build_chain(const LatticeSpec& spec, const std::vector<Vertex>& states,
                           const std::vector<double>& n_full,
                           const std::vector<std::vector<std::pair<std::int32_t, double>>>& adj) {
  SymmetricChain chain;
  chain.states = states;
  chain.n = n_full;
  auto m = static_cast<std::int64_t>(states.size());
  chain.row_ptr.assign(static_cast<size_t>(m) + 1, 0);
  for (std::int64_t i = 0; i < m; ++i)
    chain.row_ptr[static_cast<size_t>(i) + 1] =
        chain.row_ptr[static_cast<size_t>(i)] + static_cast<std::int64_t>(adj[static_cast<size_t>(i)].size());
  chain.col.resize(static_cast<size_t>(chain.row_ptr.back()));
  chain.w.resize(static_cast<size_t>(chain.row_ptr.back()));
  chain.diag.resize(static_cast<size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) {
    auto row = adj[static_cast<size_t>(i)];
    std::sort(row.begin(), row.end());
    double wsum = 0.0;
    std::int64_t base = chain.row_ptr[static_cast<size_t>(i)];
    for (size_t k = 0; k < row.size(); ++k) {
      chain.col[static_cast<size_t>(base) + k] = row[k].first;
      chain.w[static_cast<size_t>(base) + k] = row[k].second;
      wsum += row[k].second;
    }
    double nx = chain.n[static_cast<size_t>(i)];
    if (!(nx > 0.0)) {
      chain.diag[static_cast<size_t>(i)] = 1.0;  // frozen vertex
    } else {
      double stay = 1.0 - wsum / nx;
      chain.diag[static_cast<size_t>(i)] = stay < 0.0 ? 0.0 : stay;
    }
  }
  (void)spec;
  return chain;
}

// Component of `mask_of_interest` vertices inside the box containing the
// seed, adjacency given by a callback enumerating weighted neighbors.
template <typename NeighborFn>
std::vector<Vertex> box_component(const LatticeSpec& spec, const BoxBounds& box, Vertex seed,
                                  const NeighborFn& neighbors) {
  std::vector<Vertex> comp;
  std::unordered_map<Vertex, bool> seen;
  std::queue<Vertex> queue;
  queue.push(seed);
  seen[seed] = true;
  while (!queue.empty()) {
    Vertex v = queue.front();
    queue.pop();
    comp.push_back(v);
    neighbors(v, [&](Vertex wv, double) {
      if (!box_contains(spec, box, wv)) return;
      if (seen.emplace(wv, true).second) queue.push(wv);
    });
  }
  std::sort(comp.begin(), comp.end());
  return comp;
}

Vertex nearest_in_set(const LatticeSpec& spec, Vertex target,
                      const std::function<bool(Vertex)>& member, const BoxBounds& box) {
  // Breadth-first ring growth around the target in L-infinity distance.
  std::int64_t best = -1;
  double best_dist = 0;
  const std::int64_t nv = spec.vertex_count();
  for (Vertex v = 0; v < nv; ++v) {
    if (!member(v) || !box_contains(spec, box, v)) continue;
    double dist = euclid_distance(spec, v, target);
    if (best < 0 || dist < best_dist || (dist == best_dist && v < best)) {
      best = v;
      best_dist = dist;
    }
  }
  if (best < 0) throw std::runtime_error("no vertex of the requested set inside the box");
  return best;
}

}  // namespace

SymmetricChain box_chain_raw(const Environment& env, std::int64_t n) {
  const LatticeSpec& spec = env.spec;
  BoxBounds box = centered_box(spec, n);
  EdgeMask alpha = threshold_mask(env, 0.0);
  ClusterLabeling labeling = label_clusters(spec, alpha);
  GiantCluster giant = giant_cluster(labeling);
  auto member = [&](Vertex v) { return labeling.label[v] == giant.id; };
  Vertex seed = nearest_in_set(spec, spec.center_vertex(), member, box);

  auto neighbors = [&](Vertex v, auto&& visit) {
    std::array<std::pair<Vertex, std::int64_t>, 2 * kMaxDim> inc;
    int cnt = incident_edges(spec, v, inc);
    for (int i = 0; i < cnt; ++i) {
      double w = env.values[static_cast<size_t>(inc[i].second)];
      if (w > 0.0) visit(inc[i].first, w);
    }
  };
  std::vector<Vertex> comp = box_component(spec, box, seed, neighbors);

  std::unordered_map<Vertex, std::int32_t> idx;
  for (size_t k = 0; k < comp.size(); ++k) idx[comp[k]] = static_cast<std::int32_t>(k);
  std::vector<double> nfull(comp.size());
  std::vector<std::vector<std::pair<std::int32_t, double>>> adj(comp.size());
  for (size_t k = 0; k < comp.size(); ++k) {
    nfull[k] = env.vertex_weight(comp[k]);
    neighbors(comp[k], [&](Vertex wv, double w) {
      auto it = idx.find(wv);
      if (it == idx.end()) return;
      adj[k].emplace_back(it->second, w);
    });
  }
  return build_chain(spec, comp, nfull, adj);
}

SymmetricChain box_chain_xi(const Environment& env, const XiStructure& xs,
                            const EffectiveWeights& weights, std::int64_t n) {
  const LatticeSpec& spec = env.spec;
  BoxBounds box = centered_box(spec, n);
  auto member = [&](Vertex v) { return xs.in_cxi(v); };
  Vertex seed = nearest_in_set(spec, spec.center_vertex(), member, box);

  // Pair adjacency of the time-changed walk, restricted to the box.
  std::vector<std::vector<std::pair<Vertex, double>>> nbr_global(weights.vertices.size());
  for (const auto& e : weights.entries) {
    nbr_global[static_cast<size_t>(e.i)].emplace_back(weights.vertices[static_cast<size_t>(e.j)], e.w);
    nbr_global[static_cast<size_t>(e.j)].emplace_back(weights.vertices[static_cast<size_t>(e.i)], e.w);
  }
  auto neighbors = [&](Vertex v, auto&& visit) {
    std::int32_t li = weights.local_index(v);
    if (li < 0) return;
    for (const auto& pr : nbr_global[static_cast<size_t>(li)]) visit(pr.first, pr.second);
  };
  std::vector<Vertex> comp = box_component(spec, box, seed, neighbors);

  std::unordered_map<Vertex, std::int32_t> idx;
  for (size_t k = 0; k < comp.size(); ++k) idx[comp[k]] = static_cast<std::int32_t>(k);
  std::vector<double> nfull(comp.size());
  std::vector<std::vector<std::pair<std::int32_t, double>>> adj(comp.size());
  for (size_t k = 0; k < comp.size(); ++k) {
    std::int32_t li = weights.local_index(comp[k]);
    nfull[k] = weights.n_full[static_cast<size_t>(li)];
    neighbors(comp[k], [&](Vertex wv, double w) {
      auto it = idx.find(wv);
      if (it != idx.end()) adj[k].emplace_back(it->second, w);
    });
  }
  return build_chain(spec, comp, nfull, adj);
}

SymmetricChain full_chain(const Environment& env) {
  const LatticeSpec& spec = env.spec;
  const std::int64_t nv = spec.vertex_count();
  std::vector<Vertex> states(static_cast<size_t>(nv));
  std::iota(states.begin(), states.end(), Vertex{0});
  std::vector<double> nfull(static_cast<size_t>(nv));
  std::vector<std::vector<std::pair<std::int32_t, double>>> adj(static_cast<size_t>(nv));
  std::array<std::pair<Vertex, std::int64_t>, 2 * kMaxDim> inc;
  for (Vertex v = 0; v < nv; ++v) {
    nfull[static_cast<size_t>(v)] = env.vertex_weight(v);
    int cnt = incident_edges(spec, v, inc);
    for (int i = 0; i < cnt; ++i) {
      double w = env.values[static_cast<size_t>(inc[i].second)];
      if (w > 0.0) adj[static_cast<size_t>(v)].emplace_back(static_cast<std::int32_t>(inc[i].first), w);
    }
  }
  return build_chain(spec, states, nfull, adj);
}

SymmetricChain chain_from_weights(const EffectiveWeights& weights) {
  std::vector<std::vector<std::pair<std::int32_t, double>>> adj(weights.vertices.size());
  for (const auto& e : weights.entries) {
    adj[static_cast<size_t>(e.i)].emplace_back(e.j, e.w);
    adj[static_cast<size_t>(e.j)].emplace_back(e.i, e.w);
  }
  return build_chain(weights.spec, weights.vertices, weights.n_full, adj);
}

namespace {

// y = S x with S = D^{1/2} P D^{-1/2}: S_xy = W_xy / sqrt(n_x n_y) plus the
// censoring diagonal.
void apply_symmetrized(const SymmetricChain& chain, const std::vector<double>& x,
                       std::vector<double>& y) {
  const auto m = static_cast<std::int64_t>(chain.states.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
    double acc = chain.diag[static_cast<size_t>(i)] * x[static_cast<size_t>(i)];
    double ni = chain.n[static_cast<size_t>(i)];
    if (ni > 0.0) {
      double inv_sqrt_ni = 1.0 / std::sqrt(ni);
      for (std::int64_t k = chain.row_ptr[static_cast<size_t>(i)];
           k < chain.row_ptr[static_cast<size_t>(i) + 1]; ++k) {
        auto j = static_cast<size_t>(chain.col[static_cast<size_t>(k)]);
        acc += chain.w[static_cast<size_t>(k)] * inv_sqrt_ni / std::sqrt(chain.n[j]) * x[j];
      }
    }
    y[static_cast<size_t>(i)] = acc;
  }
}

// Eigenvalues of the symmetric tridiagonal (a, b) strictly below x.
int sturm_count(const std::vector<double>& a, const std::vector<double>& b, double x) {
  int count = 0;
  double d = 1.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double off = i ? b[i - 1] * b[i - 1] / d : 0.0;
    d = a[i] - x - off;
    if (d == 0.0) d = -1e-300;
    if (d < 0.0) ++count;
  }
  return count;
}

double tridiag_max_eigenvalue(const std::vector<double>& a, const std::vector<double>& b) {
  const auto k = static_cast<int>(a.size());
  double lo = a[0], hi = a[0];
  for (int i = 0; i < k; ++i) {
    double r = (i > 0 ? std::abs(b[static_cast<size_t>(i) - 1]) : 0.0) +
               (i + 1 < k ? std::abs(b[static_cast<size_t>(i)]) : 0.0);
    lo = std::min(lo, a[static_cast<size_t>(i)] - r);
    hi = std::max(hi, a[static_cast<size_t>(i)] + r);
  }
  for (int it = 0; it < 80; ++it) {
    double mid = 0.5 * (lo + hi);
    if (sturm_count(a, b, mid) >= k) hi = mid; else lo = mid;
  }
  return 0.5 * (lo + hi);
}

// (T - s I) x = rhs with partial pivoting; T symmetric tridiagonal (a, b).
bool shifted_tridiag_solve(const std::vector<double>& a, const std::vector<double>& b, double s,
                           std::vector<double> rhs, std::vector<double>& x) {
  const auto n = static_cast<std::int64_t>(a.size());
  std::vector<double> d(static_cast<size_t>(n)), u1(static_cast<size_t>(n), 0.0),
      u2(static_cast<size_t>(n), 0.0), sub(static_cast<size_t>(n), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    d[static_cast<size_t>(i)] = a[static_cast<size_t>(i)] - s;
    if (i + 1 < n) {
      u1[static_cast<size_t>(i)] = b[static_cast<size_t>(i)];
      sub[static_cast<size_t>(i + 1)] = b[static_cast<size_t>(i)];
    }
  }
  for (std::int64_t i = 0; i + 1 < n; ++i) {
    if (std::abs(sub[static_cast<size_t>(i + 1)]) > std::abs(d[static_cast<size_t>(i)])) {
      std::swap(d[static_cast<size_t>(i)], sub[static_cast<size_t>(i + 1)]);
      std::swap(u1[static_cast<size_t>(i)], d[static_cast<size_t>(i + 1)]);
      std::swap(u2[static_cast<size_t>(i)], u1[static_cast<size_t>(i + 1)]);
      std::swap(rhs[static_cast<size_t>(i)], rhs[static_cast<size_t>(i + 1)]);
    }
    if (d[static_cast<size_t>(i)] == 0.0) return false;
    double m = sub[static_cast<size_t>(i + 1)] / d[static_cast<size_t>(i)];
    d[static_cast<size_t>(i + 1)] -= m * u1[static_cast<size_t>(i)];
    u1[static_cast<size_t>(i + 1)] -= m * u2[static_cast<size_t>(i)];
    rhs[static_cast<size_t>(i + 1)] -= m * rhs[static_cast<size_t>(i)];
  }
  if (d[static_cast<size_t>(n - 1)] == 0.0) return false;
  x.assign(static_cast<size_t>(n), 0.0);
  for (std::int64_t i = n - 1; i >= 0; --i) {
    double acc = rhs[static_cast<size_t>(i)];
    if (i + 1 < n) acc -= u1[static_cast<size_t>(i)] * x[static_cast<size_t>(i + 1)];
    if (i + 2 < n) acc -= u2[static_cast<size_t>(i)] * x[static_cast<size_t>(i + 2)];
    x[static_cast<size_t>(i)] = acc / d[static_cast<size_t>(i)];
  }
  return true;
}

// Top Ritz pair of the Lanczos tridiagonal: bisection for the value, inverse
// iteration for the vector. O(k) per call.
bool tridiag_top_pair(const std::vector<double>& a, const std::vector<double>& b, double& theta,
                      std::vector<double>& vec) {
  theta = tridiag_max_eigenvalue(a, b);
  const auto k = a.size();
  vec.assign(k, 1.0 / std::sqrt(static_cast<double>(k)));
  double scale = std::max(1.0, std::abs(theta));
  for (int pass = 0; pass < 3; ++pass) {
    double shift = scale * 1e-13 * (pass + 1);
    std::vector<double> next;
    if (!shifted_tridiag_solve(a, b, theta + shift, vec, next)) continue;
    double norm = std::sqrt(std::inner_product(next.begin(), next.end(), next.begin(), 0.0));
    if (!(norm > 0.0) || !std::isfinite(norm)) return false;
    for (auto& v : next) v /= norm;
    vec = next;
  }
  return true;
}

}  // namespace

SpectralReport spectral_gap(const SymmetricChain& chain, double tol, std::uint64_t lanczos_seed) {
  const auto m = static_cast<std::int64_t>(chain.states.size());
  SpectralReport report;
  report.component_size = m;
  if (m < 2) throw std::runtime_error("spectral gap: component is trivial");

  // Known top eigenvector of S: phi = sqrt(n), eigenvalue 1.
  std::vector<double> phi(static_cast<size_t>(m));
  double phi_norm2 = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    phi[static_cast<size_t>(i)] = std::sqrt(chain.n[static_cast<size_t>(i)]);
    phi_norm2 += chain.n[static_cast<size_t>(i)];
  }
  double phi_norm = std::sqrt(phi_norm2);
  for (auto& v : phi) v /= phi_norm;

  auto project = [&](std::vector<double>& v) {
    double dot = 0.0;
    for (std::int64_t i = 0; i < m; ++i) dot += v[static_cast<size_t>(i)] * phi[static_cast<size_t>(i)];
    for (std::int64_t i = 0; i < m; ++i) v[static_cast<size_t>(i)] -= dot * phi[static_cast<size_t>(i)];
  };

  if (m == 2) {
    // Single nontrivial mode: lambda_2 = Rayleigh quotient of the deflated space.
    std::vector<double> v(2), y(2);
    v[0] = phi[1];
    v[1] = -phi[0];
    apply_symmetrized(chain, v, y);
    double lambda2 = v[0] * y[0] + v[1] * y[1];
    report.gap = 1.0 - lambda2;
    report.poincare_constant = 1.0 / report.gap;
    return report;
  }

  // Shift-invert Lanczos on K = (1+sigma) I - S with the known top mode
  // deflated exactly. Deep-trap spectra cluster many eigenvalues within
  // 1e-8 of 1; inverting spreads the cluster apart and the smallest gap
  // converges in a few dozen iterations.
  const double sigma = 1e-9;
  Eigen::SparseMatrix<double> K(m, m);
  {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(chain.w.size() + static_cast<size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
      trips.emplace_back(i, i, 1.0 + sigma - chain.diag[static_cast<size_t>(i)]);
      double ni = chain.n[static_cast<size_t>(i)];
      if (ni <= 0.0) continue;
      for (std::int64_t k = chain.row_ptr[static_cast<size_t>(i)];
           k < chain.row_ptr[static_cast<size_t>(i) + 1]; ++k) {
        auto j = chain.col[static_cast<size_t>(k)];
        trips.emplace_back(i, j,
                           -chain.w[static_cast<size_t>(k)] /
                               std::sqrt(ni * chain.n[static_cast<size_t>(j)]));
      }
    }
    K.setFromTriplets(trips.begin(), trips.end());
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor(K);
  if (factor.info() != Eigen::Success)
    throw std::runtime_error("spectral gap: shift factorization failed");

  Eigen::VectorXd buf_in(m), buf_out(m);
  auto apply_inverse = [&](const std::vector<double>& in, std::vector<double>& out) {
    std::vector<double> tmp = in;
    project(tmp);
    for (std::int64_t i = 0; i < m; ++i) buf_in(i) = tmp[static_cast<size_t>(i)];
    buf_out = factor.solve(buf_in);
    out.resize(static_cast<size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) out[static_cast<size_t>(i)] = buf_out(i);
    project(out);
  };

  const int max_iter = static_cast<int>(std::min<std::int64_t>(m - 1, 200));
  const int max_restarts = 4;
  SplitMix64 rng(lanczos_seed);
  std::vector<double> start(static_cast<size_t>(m));
  for (auto& v : start) v = rng.next_half_open() - 0.5;

  std::vector<std::vector<double>> V;
  std::vector<double> alpha, beta, ritz;
  std::vector<double> wvec(static_cast<size_t>(m));
  double theta_inv = 0.0;  // eigenvalue of the inverted operator, 1/(gap+sigma)
  double resid_rel = 1.0;
  int total_iters = 0;

  for (int restart = 0; restart < max_restarts && resid_rel > tol * 1e3; ++restart) {
    V.clear();
    alpha.clear();
    beta.clear();
    std::vector<double> v = start;
    project(v);
    double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm < 1e-300) {
      for (auto& x : v) x = rng.next_half_open() - 0.5;
      project(v);
      norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    }
    for (auto& x : v) x /= norm;
    V.push_back(v);

    for (int it = 0; it < max_iter; ++it) {
      apply_inverse(V.back(), wvec);
      double a = std::inner_product(wvec.begin(), wvec.end(), V.back().begin(), 0.0);
      alpha.push_back(a);
      for (std::int64_t i = 0; i < m; ++i)
        wvec[static_cast<size_t>(i)] -= a * V.back()[static_cast<size_t>(i)];
      if (!beta.empty()) {
        for (std::int64_t i = 0; i < m; ++i)
          wvec[static_cast<size_t>(i)] -= beta.back() * V[V.size() - 2][static_cast<size_t>(i)];
      }
      for (const auto& u : V) {  // full reorthogonalization
        double dot = std::inner_product(wvec.begin(), wvec.end(), u.begin(), 0.0);
        for (std::int64_t i = 0; i < m; ++i)
          wvec[static_cast<size_t>(i)] -= dot * u[static_cast<size_t>(i)];
      }
      double b = std::sqrt(std::inner_product(wvec.begin(), wvec.end(), wvec.begin(), 0.0));
      ++total_iters;
      if (b < 1e-300) break;  // Krylov space exhausted
      if ((it + 1) % 4 == 0 || it + 1 == max_iter) {
        if (tridiag_top_pair(alpha, beta, theta_inv, ritz) && theta_inv > 0.0 &&
            b * std::abs(ritz.back()) <= 1e-12 * theta_inv)
          break;
      }
      beta.push_back(b);
      for (std::int64_t i = 0; i < m; ++i) wvec[static_cast<size_t>(i)] /= b;
      V.push_back(wvec);
    }

    if (!tridiag_top_pair(alpha, beta, theta_inv, ritz) || !(theta_inv > 0.0)) {
      for (auto& x : start) x = rng.next_half_open() - 0.5;
      continue;
    }
    // True relative residual of the inverted-operator Ritz pair.
    std::fill(start.begin(), start.end(), 0.0);
    for (size_t c = 0; c < ritz.size(); ++c)
      for (std::int64_t i = 0; i < m; ++i)
        start[static_cast<size_t>(i)] += ritz[c] * V[c][static_cast<size_t>(i)];
    apply_inverse(start, wvec);
    double r2 = 0.0, s2 = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      double ri = wvec[static_cast<size_t>(i)] - theta_inv * start[static_cast<size_t>(i)];
      r2 += ri * ri;
      s2 += start[static_cast<size_t>(i)] * start[static_cast<size_t>(i)];
    }
    resid_rel = std::sqrt(r2 / std::max(s2, 1e-300)) / theta_inv;
  }

  report.lanczos_iterations = total_iters;
  report.residual = resid_rel;
  report.gap = 1.0 / theta_inv - sigma;
  if (!(report.gap > 0.0))
    throw std::runtime_error("spectral gap: nonpositive gap (disconnected chain?)");
  report.poincare_constant = 1.0 / report.gap;
  return report;
}

SpectralReport poincare_constant_raw(const Environment& env, std::int64_t n) {
  SymmetricChain chain = box_chain_raw(env, n);
  SpectralReport rep = spectral_gap(chain);
  rep.n = n;
  return rep;
}

SpectralReport poincare_constant_xi(const Environment& env, double xi, std::int64_t n) {
  XiStructure xs = build_xi_structure(env, xi);
  EffectiveWeights weights = effective_conductances(env, xs);
  SymmetricChain chain = box_chain_xi(env, xs, weights, n);
  SpectralReport rep = spectral_gap(chain);
  rep.n = n;
  return rep;
}

}  // namespace rcm

#include "rcm/renorm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rcm/rng.hpp"

namespace rcm {

Coords BoxGrid::block_coords(std::int64_t index) const {
  Coords c{};
  for (int k = 0; k < spec.d; ++k) {
    c[k] = index % blocks_per_axis;
    index /= blocks_per_axis;
  }
  return c;
}

std::int64_t BoxGrid::block_index(const Coords& bc) const {
  std::int64_t idx = 0;
  for (int k = spec.d - 1; k >= 0; --k) idx = idx * blocks_per_axis + bc[k];
  return idx;
}

std::int64_t BoxGrid::block_of_vertex(Vertex v) const {
  Coords c = spec.decode(v);
  Coords bc{};
  for (int k = 0; k < spec.d; ++k) bc[k] = c[k] / block_side;
  return block_index(bc);
}

double BoxClassification::white_fraction() const {
  std::int64_t num = 0, den = 0;
  for (size_t b = 0; b < color.size(); ++b) {
    if (!interior[b]) continue;
    ++den;
    if (color[b] != BoxColor::black) ++num;
  }
  return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

double BoxClassification::pure_white_fraction() const {
  std::int64_t num = 0, den = 0;
  for (size_t b = 0; b < color.size(); ++b) {
    if (!interior[b]) continue;
    ++den;
    if (color[b] == BoxColor::pure_white) ++num;
  }
  return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

double BoxClassification::immaculate_fraction() const {
  std::int64_t num = 0, den = 0;
  for (size_t b = 0; b < color.size(); ++b) {
    if (!interior[b]) continue;
    ++den;
    if (immaculate[b]) ++num;
  }
  return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

namespace {

struct LocalGrid {
  int d;
  std::int64_t side;
  Coords origin;  // global coords of local (0,...,0)
  std::int64_t cells;

  std::int64_t cell_count() const { return cells; }
  std::int64_t encode(const Coords& c) const {
    std::int64_t v = 0;
    for (int k = d - 1; k >= 0; --k) v = v * side + c[k];
    return v;
  }
  Coords decode(std::int64_t v) const {
    Coords c{};
    for (int k = 0; k < d; ++k) {
      c[k] = v % side;
      v /= side;
    }
    return c;
  }
};

struct LocalClusters {
  std::vector<std::int32_t> label;       // -1 for vertices with no open edge
  std::int32_t count = 0;
  std::vector<Coords> bb_lo, bb_hi;      // bounding boxes per cluster
  std::vector<std::int64_t> sizes;
};

// Components of the alpha-subgraph within the enlarged box (free geometry);
// vertices without any open incident edge are left unlabeled.
LocalClusters label_local(const LocalGrid& grid, const EdgeMask& mask) {
  const LatticeSpec& spec = mask.spec;
  LocalClusters out;
  std::int64_t n = grid.cell_count();
  out.label.assign(static_cast<size_t>(n), -1);
  std::vector<std::int64_t> stack;
  std::vector<std::uint8_t> has_edge(static_cast<size_t>(n), 0);

  auto global_of = [&](const Coords& lc) {
    Coords g{};
    for (int k = 0; k < grid.d; ++k) g[k] = grid.origin[k] + lc[k];
    return spec.encode(g);
  };
  auto open_between = [&](const Coords& lc, int axis) {
    // edge from lc to lc+e_axis, both local
    Coords g{};
    for (int k = 0; k < grid.d; ++k) g[k] = grid.origin[k] + lc[k];
    return mask.open[static_cast<size_t>(edge_slot(spec, spec.encode(g), axis))] != 0;
  };
  (void)global_of;

  for (std::int64_t c = 0; c < n; ++c) {
    Coords lc = grid.decode(c);
    for (int axis = 0; axis < grid.d; ++axis) {
      if (lc[axis] + 1 >= grid.side) continue;
      if (open_between(lc, axis)) {
        has_edge[static_cast<size_t>(c)] = 1;
        Coords lc2 = lc;
        ++lc2[axis];
        has_edge[static_cast<size_t>(grid.encode(lc2))] = 1;
      }
    }
  }

  for (std::int64_t s = 0; s < n; ++s) {
    if (out.label[static_cast<size_t>(s)] >= 0 || !has_edge[static_cast<size_t>(s)]) continue;
    std::int32_t id = out.count++;
    out.bb_lo.push_back(grid.decode(s));
    out.bb_hi.push_back(grid.decode(s));
    out.sizes.push_back(0);
    out.label[static_cast<size_t>(s)] = id;
    stack.push_back(s);
    while (!stack.empty()) {
      std::int64_t v = stack.back();
      stack.pop_back();
      ++out.sizes[static_cast<size_t>(id)];
      Coords lc = grid.decode(v);
      for (int k = 0; k < grid.d; ++k) {
        out.bb_lo[static_cast<size_t>(id)][k] = std::min(out.bb_lo[static_cast<size_t>(id)][k], lc[k]);
        out.bb_hi[static_cast<size_t>(id)][k] = std::max(out.bb_hi[static_cast<size_t>(id)][k], lc[k]);
      }
      for (int axis = 0; axis < grid.d; ++axis) {
        if (lc[axis] + 1 < grid.side && open_between(lc, axis)) {
          Coords lc2 = lc;
          ++lc2[axis];
          std::int64_t w = grid.encode(lc2);
          if (out.label[static_cast<size_t>(w)] < 0) {
            out.label[static_cast<size_t>(w)] = id;
            stack.push_back(w);
          }
        }
        if (lc[axis] > 0) {
          Coords lc2 = lc;
          --lc2[axis];
          if (open_between(lc2, axis)) {
            std::int64_t w = grid.encode(lc2);
            if (out.label[static_cast<size_t>(w)] < 0) {
              out.label[static_cast<size_t>(w)] = id;
              stack.push_back(w);
            }
          }
        }
      }
    }
  }
  return out;
}

bool crossing_for_whole_box(const LocalClusters& lc, std::int32_t id, const LocalGrid& grid) {
  for (int k = 0; k < grid.d; ++k) {
    if (lc.bb_lo[static_cast<size_t>(id)][k] != 0) return false;
    if (lc.bb_hi[static_cast<size_t>(id)][k] != grid.side - 1) return false;
  }
  return true;
}

// Does cluster `id` touch both opposite faces of the subbox [lo, lo+side-1]^d
// in every axis direction? Set-level face touching on the membership bitmap.
bool crossing_for_subbox(const std::vector<std::int32_t>& label, std::int32_t id,
                         const LocalGrid& grid, const Coords& lo, std::int64_t side) {
  for (int axis = 0; axis < grid.d; ++axis) {
    for (int face = 0; face < 2; ++face) {
      bool touched = false;
      // Enumerate the face cells: coordinate along `axis` pinned.
      Coords c{};
      for (int k = 0; k < grid.d; ++k) c[k] = lo[k];
      c[axis] = face == 0 ? lo[axis] : lo[axis] + side - 1;
      while (true) {
        if (label[static_cast<size_t>(grid.encode(c))] == id) {
          touched = true;
          break;
        }
        int k = 0;
        while (k < grid.d) {
          if (k == axis) { ++k; continue; }
          if (++c[k] <= lo[k] + side - 1) break;
          c[k] = lo[k];
          ++k;
        }
        if (k == grid.d) break;
      }
      if (!touched) return false;
    }
  }
  return true;
}

std::vector<std::int64_t> subbox_anchors(std::int64_t big_side, std::int64_t sub_side,
                                         std::int64_t stride) {
  std::vector<std::int64_t> out;
  for (std::int64_t a = 0; a + sub_side <= big_side; a += stride) out.push_back(a);
  std::int64_t last = big_side - sub_side;
  if (out.empty() || out.back() != last) out.push_back(last);
  return out;
}

// All (anchor, side) combinations for condition (c).
bool check_subbox_crossings(const std::vector<std::int32_t>& label, std::int32_t id,
                            const LocalGrid& grid, std::int64_t N, bool exhaustive) {
  std::vector<std::int64_t> sides;
  if (exhaustive) {
    for (std::int64_t s = N / 10 + 1; s <= grid.side; ++s) sides.push_back(s);
  } else {
    sides.push_back(static_cast<std::int64_t>(std::ceil(N / 10.0)) + 1);
  }
  for (std::int64_t s : sides) {
    std::int64_t stride = exhaustive ? 1 : std::max<std::int64_t>(1, (N + 19) / 20);
    auto anchors = subbox_anchors(grid.side, s, stride);
    std::vector<std::int64_t> idx(static_cast<size_t>(grid.d), 0);
    while (true) {
      Coords lo{};
      for (int k = 0; k < grid.d; ++k) lo[k] = anchors[static_cast<size_t>(idx[static_cast<size_t>(k)])];
      if (!crossing_for_subbox(label, id, grid, lo, s)) return false;
      int k = 0;
      while (k < grid.d && ++idx[static_cast<size_t>(k)] >= static_cast<std::int64_t>(anchors.size()))
        idx[static_cast<size_t>(k++)] = 0;
      if (k == grid.d) break;
    }
  }
  return true;
}

}  // namespace

BoxClassification classify_boxes(const EdgeMask& alpha, const EdgeMask& alpha_prime,
                                 std::int64_t N, const ClassifyOptions& options) {
  const LatticeSpec& spec = alpha.spec;
  if (!(alpha_prime.spec == spec)) throw std::invalid_argument("classify_boxes: mask specs differ");
  if (N < 4 || N % 4 != 0) throw std::invalid_argument("classify_boxes: N must be a multiple of 4, >= 4");
  for (size_t s = 0; s < alpha.open.size(); ++s)
    if (alpha_prime.open[s] && !alpha.open[s])
      throw std::invalid_argument("classify_boxes: alpha' not a subset of alpha");

  BoxClassification cls;
  BoxGrid& grid = cls.grid;
  grid.spec = spec;
  grid.N = N;
  grid.block_side = 2 * N + 1;
  grid.enlarged_side = 5 * N / 2 + 1;
  grid.blocks_per_axis = (spec.L + grid.block_side - 1) / grid.block_side;
  if (spec.L / grid.block_side < 3)
    throw std::invalid_argument("classify_boxes: window must fit at least 3 blocks per axis");
  grid.block_count = 1;
  for (int k = 0; k < spec.d; ++k) grid.block_count *= grid.blocks_per_axis;

  cls.color.assign(static_cast<size_t>(grid.block_count), BoxColor::black);
  cls.immaculate.assign(static_cast<size_t>(grid.block_count), 0);
  cls.interior.assign(static_cast<size_t>(grid.block_count), 0);
  cls.crossing_cluster.assign(static_cast<size_t>(grid.block_count), {});

  // Giant alpha-cluster for greyness.
  ClusterLabeling alpha_lab = label_clusters(spec, alpha);
  GiantCluster giant = giant_cluster(alpha_lab);

  const std::int64_t half_enlarged = 5 * N / 4;  // N is a multiple of 4

  std::vector<std::uint8_t> complete(static_cast<size_t>(grid.block_count), 0);

#pragma omp parallel for schedule(dynamic) if (options.parallel)
  for (std::int64_t b = 0; b < grid.block_count; ++b) {
    Coords bc = grid.block_coords(b);
    Coords lo{}, hi{}, elo{}, ehi{};
    bool fits = true;
    for (int k = 0; k < spec.d; ++k) {
      lo[k] = bc[k] * grid.block_side;
      hi[k] = lo[k] + grid.block_side - 1;
      std::int64_t center = lo[k] + N;
      elo[k] = center - half_enlarged;
      ehi[k] = center + half_enlarged;
      if (hi[k] >= spec.L || elo[k] < 0 || ehi[k] >= spec.L) fits = false;
    }
    if (!fits) continue;  // straddling the window edge: black
    complete[static_cast<size_t>(b)] = 1;

    // Does B_i hold at least one alpha-edge (touch convention)?
    bool has_alpha_edge = false;
    bool has_bad_edge = false;  // giant-cluster edge with alpha' = 0 touching B_i
    {
      // Scan edges with at least one endpoint in [lo, hi].
      Coords c = lo;
      while (true) {
        Vertex v = spec.encode(c);
        std::array<std::pair<Vertex, std::int64_t>, 2 * kMaxDim> inc;
        int cnt = incident_edges(spec, v, inc);
        for (int i = 0; i < cnt; ++i) {
          if (!alpha.open[static_cast<size_t>(inc[i].second)]) continue;
          has_alpha_edge = true;
          if (!alpha_prime.open[static_cast<size_t>(inc[i].second)] &&
              alpha_lab.label[v] == giant.id && alpha_lab.label[inc[i].first] == giant.id)
            has_bad_edge = true;
        }
        if (has_bad_edge) break;
        int k = 0;
        while (k < spec.d && ++c[k] > hi[k]) c[k] = lo[k], ++k;
        if (k == spec.d) break;
      }
    }
    if (!has_alpha_edge) continue;

    LocalGrid lg;
    lg.d = spec.d;
    lg.side = grid.enlarged_side;
    lg.origin = elo;
    lg.cells = 1;
    for (int k = 0; k < spec.d; ++k) lg.cells *= lg.side;

    LocalClusters lc = label_local(lg, alpha);
    std::int32_t crossing_id = -1;
    int crossing_count = 0;
    for (std::int32_t id = 0; id < lc.count; ++id) {
      if (crossing_for_whole_box(lc, id, lg)) {
        crossing_id = id;
        ++crossing_count;
      }
    }
    if (crossing_count != 1) continue;
    if (options.strict_uniqueness && lc.count != 1) continue;

    // (b) every other cluster stays within L-infinity radius N/10.
    bool small_ok = true;
    for (std::int32_t id = 0; id < lc.count && small_ok; ++id) {
      if (id == crossing_id) continue;
      for (int k = 0; k < spec.d; ++k) {
        if (static_cast<double>(lc.bb_hi[static_cast<size_t>(id)][k] -
                                lc.bb_lo[static_cast<size_t>(id)][k]) > N / 10.0) {
          small_ok = false;
          break;
        }
      }
    }
    if (!small_ok) continue;

    // (c) the crossing cluster crosses every tested subbox.
    if (!check_subbox_crossings(lc.label, crossing_id, lg, N, options.exhaustive_subboxes)) continue;

    cls.color[static_cast<size_t>(b)] = has_bad_edge ? BoxColor::grey : BoxColor::pure_white;
    auto& K = cls.crossing_cluster[static_cast<size_t>(b)];
    for (std::int64_t cell = 0; cell < lg.cells; ++cell) {
      if (lc.label[static_cast<size_t>(cell)] != crossing_id) continue;
      Coords lcell = lg.decode(cell);
      Coords g{};
      for (int k = 0; k < spec.d; ++k) g[k] = lg.origin[k] + lcell[k];
      K.push_back(spec.encode(g));
    }
  }

  // Immaculate and interior need the whole color field.
  for (std::int64_t b = 0; b < grid.block_count; ++b) {
    Coords bc = grid.block_coords(b);
    bool all_pure = cls.color[static_cast<size_t>(b)] == BoxColor::pure_white;
    bool all_complete = complete[static_cast<size_t>(b)] != 0;
    std::vector<std::int64_t> idx(static_cast<size_t>(spec.d), -1);
    while (all_pure || all_complete) {
      Coords nb = bc;
      bool valid = true;
      for (int k = 0; k < spec.d; ++k) {
        nb[k] += idx[static_cast<size_t>(k)];
        if (nb[k] < 0 || nb[k] >= grid.blocks_per_axis) valid = false;
      }
      if (valid) {
        std::int64_t j = grid.block_index(nb);
        if (cls.color[static_cast<size_t>(j)] != BoxColor::pure_white) all_pure = false;
        if (!complete[static_cast<size_t>(j)]) all_complete = false;
      } else {
        all_pure = false;
        all_complete = false;
      }
      int k = 0;
      while (k < spec.d && ++idx[static_cast<size_t>(k)] > 1) idx[static_cast<size_t>(k++)] = -1;
      if (k == spec.d) break;
    }
    cls.immaculate[static_cast<size_t>(b)] = all_pure ? 1 : 0;
    cls.interior[static_cast<size_t>(b)] = all_complete ? 1 : 0;
  }
  return cls;
}

std::vector<std::int64_t> giant_immaculate_component(const BoxClassification& cls) {
  const BoxGrid& grid = cls.grid;
  std::vector<std::int32_t> comp(static_cast<size_t>(grid.block_count), -1);
  std::vector<std::vector<std::int64_t>> comps;
  std::vector<std::int64_t> stack;
  for (std::int64_t s = 0; s < grid.block_count; ++s) {
    if (!cls.immaculate[static_cast<size_t>(s)] || comp[static_cast<size_t>(s)] >= 0) continue;
    auto id = static_cast<std::int32_t>(comps.size());
    comps.emplace_back();
    comp[static_cast<size_t>(s)] = id;
    stack.push_back(s);
    while (!stack.empty()) {
      std::int64_t b = stack.back();
      stack.pop_back();
      comps[static_cast<size_t>(id)].push_back(b);
      Coords bc = grid.block_coords(b);
      for (int k = 0; k < grid.spec.d; ++k) {
        for (int dir = -1; dir <= 1; dir += 2) {
          Coords nb = bc;
          nb[k] += dir;
          if (nb[k] < 0 || nb[k] >= grid.blocks_per_axis) continue;
          std::int64_t j = grid.block_index(nb);
          if (cls.immaculate[static_cast<size_t>(j)] && comp[static_cast<size_t>(j)] < 0) {
            comp[static_cast<size_t>(j)] = id;
            stack.push_back(j);
          }
        }
      }
    }
  }
  std::vector<std::int64_t> best;
  for (auto& c : comps) {
    std::sort(c.begin(), c.end());
    if (c.size() > best.size()) best = c;
  }
  return best;
}

std::pair<EdgeMask, EdgeMask> sample_mask_pair(const LatticeSpec& spec, double q, double p,
                                               std::uint64_t seed) {
  EdgeMask alpha, prime;
  alpha.spec = spec;
  prime.spec = spec;
  std::int64_t slots = spec.edge_slot_count();
  alpha.open.assign(static_cast<size_t>(slots), 0);
  prime.open.assign(static_cast<size_t>(slots), 0);
  const int d = spec.d;
#pragma omp parallel for schedule(static)
  for (std::int64_t slot = 0; slot < slots; ++slot) {
    Vertex v = slot / d;
    int axis = static_cast<int>(slot % d);
    if (!spec.edge_exists(v, axis)) continue;
    bool a = u01_open_closed(counter_hash(seed, static_cast<std::uint64_t>(slot) * 2)) <= q;
    bool keep = u01_open_closed(counter_hash(seed, static_cast<std::uint64_t>(slot) * 2 + 1)) <= p;
    alpha.open[static_cast<size_t>(slot)] = a ? 1 : 0;
    prime.open[static_cast<size_t>(slot)] = (a && keep) ? 1 : 0;
  }
  return {alpha, prime};
}

namespace {

double binomial_ci99(double frac, std::int64_t n) {
  if (n <= 0) return 0.0;
  return 2.5758 * std::sqrt(std::max(frac * (1.0 - frac), 1e-12) / static_cast<double>(n));
}

}  // namespace

RenormalizedParams estimate_renormalized_params(int d, std::int64_t window_side, double q,
                                                double p, std::int64_t N, std::int64_t replicas,
                                                std::uint64_t seed) {
  if (replicas < 1) throw std::invalid_argument("estimate_renormalized_params: replicas >= 1");
  LatticeSpec spec(d, window_side, Boundary::free);
  RenormalizedParams out;
  out.N = N;
  out.replicas = replicas;
  std::vector<double> w_frac, pw_frac, im_frac;
  std::int64_t blocks_total = 0, white_total = 0, pure_total = 0, imm_total = 0;
  for (std::int64_t r = 0; r < replicas; ++r) {
    auto masks = sample_mask_pair(spec, q, p, derive_stream(seed, static_cast<std::uint64_t>(r)));
    BoxClassification cls = classify_boxes(masks.first, masks.second, N);
    std::int64_t den = 0, w = 0, pw = 0, im = 0;
    for (std::int64_t b = 0; b < cls.grid.block_count; ++b) {
      if (!cls.interior[static_cast<size_t>(b)]) continue;
      ++den;
      if (cls.color[static_cast<size_t>(b)] != BoxColor::black) ++w;
      if (cls.color[static_cast<size_t>(b)] == BoxColor::pure_white) ++pw;
      if (cls.immaculate[static_cast<size_t>(b)]) ++im;
    }
    blocks_total += den;
    white_total += w;
    pure_total += pw;
    imm_total += im;
    if (den > 0) {
      w_frac.push_back(static_cast<double>(w) / static_cast<double>(den));
      pw_frac.push_back(static_cast<double>(pw) / static_cast<double>(den));
      im_frac.push_back(static_cast<double>(im) / static_cast<double>(den));
    }
  }
  out.interior_blocks = blocks_total;
  if (blocks_total > 0) {
    out.p_hat = static_cast<double>(white_total) / static_cast<double>(blocks_total);
    out.p_hat_prime = static_cast<double>(pure_total) / static_cast<double>(blocks_total);
    out.p_hat_second = static_cast<double>(imm_total) / static_cast<double>(blocks_total);
  }
  out.ci_hat = binomial_ci99(out.p_hat, blocks_total);
  out.ci_prime = binomial_ci99(out.p_hat_prime, blocks_total);
  out.ci_second = binomial_ci99(out.p_hat_second, blocks_total);
  auto se_of = [](const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size() - 1);
    return std::sqrt(var / static_cast<double>(xs.size()));
  };
  out.se_hat = se_of(w_frac);
  out.se_prime = se_of(pw_frac);
  out.se_second = se_of(im_frac);

  double e_N = static_cast<double>(d) * std::pow(static_cast<double>(2 * N + 1), d - 1) *
               static_cast<double>(2 * N);
  out.theory_prime_from_hat = out.p_hat * std::pow(p, e_N);
  out.theory_second_from_prime = std::pow(out.p_hat_prime, std::pow(3.0, d));
  return out;
}

}  // namespace rcm

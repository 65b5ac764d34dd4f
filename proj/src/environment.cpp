#include "rcm/environment.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rcm/rng.hpp"

namespace rcm {

ConductanceLaw ConductanceLaw::constant(double value) {
  ConductanceLaw law;
  law.kind = Kind::constant;
  law.c = value;
  law.validate();
  return law;
}

ConductanceLaw ConductanceLaw::bernoulli(double q) {
  ConductanceLaw law;
  law.kind = Kind::bernoulli;
  law.q = q;
  law.validate();
  return law;
}

ConductanceLaw ConductanceLaw::two_point(double q, double lo, double hi) {
  ConductanceLaw law;
  law.kind = Kind::two_point;
  law.q = q;
  law.lo = lo;
  law.hi = hi;
  law.validate();
  return law;
}

ConductanceLaw ConductanceLaw::zero_uniform_mixture(double q) {
  ConductanceLaw law;
  law.kind = Kind::zero_uniform_mixture;
  law.q = q;
  law.validate();
  return law;
}

ConductanceLaw ConductanceLaw::polynomial_tail(double gamma) {
  ConductanceLaw law;
  law.kind = Kind::polynomial_tail;
  law.gamma = gamma;
  law.validate();
  return law;
}

void ConductanceLaw::validate() const {
  switch (kind) {
    case Kind::constant:
      if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("constant law needs c in [0,1]");
      break;
    case Kind::bernoulli:
      if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("bernoulli law needs q in [0,1]");
      break;
    case Kind::two_point:
      if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("two_point law needs q in [0,1]");
      if (!(lo >= 0.0 && lo <= hi && hi <= 1.0))
        throw std::invalid_argument("two_point law needs 0 <= lo <= hi <= 1");
      break;
    case Kind::zero_uniform_mixture:
      if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("mixture law needs q in [0,1]");
      break;
    case Kind::polynomial_tail:
      if (!(gamma > 0.0)) throw std::invalid_argument("polynomial_tail law needs gamma > 0");
      break;
  }
}

namespace {

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string ConductanceLaw::tag() const {
  switch (kind) {
    case Kind::constant: return "constant:" + fmt_num(c);
    case Kind::bernoulli: return "bernoulli:" + fmt_num(q);
    case Kind::two_point: return "twopoint:" + fmt_num(q) + "," + fmt_num(lo) + "," + fmt_num(hi);
    case Kind::zero_uniform_mixture: return "zum:" + fmt_num(q);
    case Kind::polynomial_tail: return "polytail:" + fmt_num(gamma);
  }
  return "";
}

ConductanceLaw ConductanceLaw::parse(const std::string& tag) {
  auto colon = tag.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("law tag needs name:params, got " + tag);
  std::string name = tag.substr(0, colon);
  std::string rest = tag.substr(colon + 1);
  std::vector<double> params;
  std::stringstream ss(rest);
  std::string piece;
  while (std::getline(ss, piece, ',')) params.push_back(std::stod(piece));
  auto need = [&](size_t n) {
    if (params.size() != n)
      throw std::invalid_argument("law " + name + " expects " + std::to_string(n) + " parameter(s)");
  };
  if (name == "constant") { need(1); return constant(params[0]); }
  if (name == "bernoulli") { need(1); return bernoulli(params[0]); }
  if (name == "twopoint") { need(3); return two_point(params[0], params[1], params[2]); }
  if (name == "zum") { need(1); return zero_uniform_mixture(params[0]); }
  if (name == "polytail") { need(1); return polynomial_tail(params[0]); }
  throw std::invalid_argument("unknown law: " + name);
}

double ConductanceLaw::positive_probability() const {
  switch (kind) {
    case Kind::constant: return c > 0.0 ? 1.0 : 0.0;
    case Kind::bernoulli: return q;
    case Kind::two_point: {
      double p = 0.0;
      if (hi > 0.0) p += q;
      if (lo > 0.0) p += 1.0 - q;
      return p;
    }
    case Kind::zero_uniform_mixture: return q;
    case Kind::polynomial_tail: return 1.0;
  }
  return 0.0;
}

double ConductanceLaw::draw(double u) const {
  // u is uniform on (0,1].
  switch (kind) {
    case Kind::constant: return c;
    case Kind::bernoulli: return u <= q ? 1.0 : 0.0;
    case Kind::two_point: return u <= q ? hi : lo;
    case Kind::zero_uniform_mixture:
      // value 0 w.p. 1-q, else Uniform(0,1]: reuse the tail of u.
      return u <= q ? u / q : 0.0;
    case Kind::polynomial_tail: return std::pow(u, 1.0 / gamma);
  }
  return 0.0;
}

double Environment::conductance_between(Vertex x, Vertex y) const {
  Coords cx = spec.decode(x), cy = spec.decode(y);
  for (int axis = 0; axis < spec.d; ++axis) {
    std::int64_t diff = cy[axis] - cx[axis];
    if (spec.boundary == Boundary::torus) {
      if (diff == spec.L - 1) diff = -1;
      if (diff == -(spec.L - 1)) diff = 1;
    }
    if (diff == 0) continue;
    if (diff == 1) return conductance(x, axis);
    if (diff == -1) return conductance(y, axis);
    throw std::invalid_argument("conductance_between: vertices are not lattice neighbors");
  }
  throw std::invalid_argument("conductance_between: vertices coincide");
}

double Environment::vertex_weight(Vertex x) const {
  std::array<std::pair<Vertex, std::int64_t>, 2 * kMaxDim> inc;
  int cnt = incident_edges(spec, x, inc);
  double s = 0.0;
  for (int i = 0; i < cnt; ++i) s += values[inc[i].second];
  return s;
}

namespace {

Environment sample_impl(const LatticeSpec& spec, const ConductanceLaw& law, std::uint64_t seed,
                        bool parallel) {
  spec.validate();
  law.validate();
  Environment env;
  env.spec = spec;
  env.law_tag = law.tag();
  env.seed = seed;
  std::int64_t slots = spec.edge_slot_count();
  env.values.assign(static_cast<size_t>(slots), 0.0);
  const bool torus = spec.boundary == Boundary::torus;
  const int d = spec.d;
  const std::int64_t L = spec.L;

  std::array<std::int64_t, kMaxDim> stride{};
  stride[0] = 1;
  for (int k = 1; k < d; ++k) stride[k] = stride[k - 1] * L;

#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t slot = 0; slot < slots; ++slot) {
    if (!torus) {
      // Skip the nonexistent outward slot at the high face.
      Vertex v = slot / d;
      int axis = static_cast<int>(slot % d);
      if ((v / stride[axis]) % L == L - 1) continue;
    }
    double u = u01_open_closed(counter_hash(seed, static_cast<std::uint64_t>(slot)));
    env.values[static_cast<size_t>(slot)] = law.draw(u);
  }
  return env;
}

}  // namespace

Environment sample_environment(const LatticeSpec& spec, const ConductanceLaw& law,
                               std::uint64_t seed) {
  return sample_impl(spec, law, seed, true);
}

Environment sample_environment_serial(const LatticeSpec& spec, const ConductanceLaw& law,
                                      std::uint64_t seed) {
  return sample_impl(spec, law, seed, false);
}

EdgeMask threshold_mask(const Environment& env, double xi) {
  if (!(xi >= 0.0 && xi <= 1.0)) throw std::invalid_argument("threshold xi must be in [0,1]");
  EdgeMask mask;
  mask.spec = env.spec;
  std::int64_t slots = env.spec.edge_slot_count();
  mask.open.assign(static_cast<size_t>(slots), 0);
  const int d = env.spec.d;
#pragma omp parallel for schedule(static)
  for (std::int64_t slot = 0; slot < slots; ++slot) {
    Vertex v = slot / d;
    int axis = static_cast<int>(slot % d);
    if (!env.spec.edge_exists(v, axis)) continue;
    double w = env.values[static_cast<size_t>(slot)];
    bool open = xi > 0.0 ? (w >= xi) : (w > 0.0);
    mask.open[static_cast<size_t>(slot)] = open ? 1 : 0;
  }
  return mask;
}

double weight_at(const Environment& env, Vertex x) {
  if (x < 0 || x >= env.spec.vertex_count()) throw std::out_of_range("weight_at: vertex out of range");
  return env.vertex_weight(x);
}

namespace {

constexpr char kMagic[4] = {'R', 'C', 'M', 'E'};
constexpr std::uint16_t kFormatVersion = 1;

template <typename T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("environment file truncated");
  return v;
}

}  // namespace

void write_environment(const Environment& env, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write(kMagic, 4);
  put<std::uint16_t>(os, kFormatVersion);
  put<std::uint16_t>(os, static_cast<std::uint16_t>(env.spec.d));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(env.spec.L));
  put<std::uint8_t>(os, static_cast<std::uint8_t>(env.spec.boundary));
  put<std::uint64_t>(os, env.seed);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(env.law_tag.size()));
  os.write(env.law_tag.data(), static_cast<std::streamsize>(env.law_tag.size()));
  os.write(reinterpret_cast<const char*>(env.values.data()),
           static_cast<std::streamsize>(env.values.size() * sizeof(double)));
  if (!os) throw std::runtime_error("write failed: " + path);
}

Environment read_environment(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error(path + " is not an RCME environment file");
  auto version = get<std::uint16_t>(is);
  if (version != kFormatVersion)
    throw std::runtime_error("unsupported RCME format version " + std::to_string(version));
  Environment env;
  env.spec.d = get<std::uint16_t>(is);
  env.spec.L = static_cast<std::int64_t>(get<std::uint64_t>(is));
  env.spec.boundary = static_cast<Boundary>(get<std::uint8_t>(is));
  env.spec.validate();
  env.seed = get<std::uint64_t>(is);
  auto tag_len = get<std::uint32_t>(is);
  env.law_tag.resize(tag_len);
  is.read(env.law_tag.data(), tag_len);
  env.values.resize(static_cast<size_t>(env.spec.edge_slot_count()));
  is.read(reinterpret_cast<char*>(env.values.data()),
          static_cast<std::streamsize>(env.values.size() * sizeof(double)));
  if (!is) throw std::runtime_error("environment file truncated: " + path);
  return env;
}

}  // namespace rcm

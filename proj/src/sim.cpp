#include "hairforge/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace hairforge::sim {

const KindParams& SimConfig::params(SpringKind k) const {
  switch (k) {
    case SpringKind::edge: return edge;
    case SpringKind::bend: return bend;
    case SpringKind::torsion: return torsion;
    case SpringKind::aug_local: return aug_local;
    case SpringKind::aug_global: return aug_global;
  }
  return edge;
}

double SimConfig::effective_repulsion_threshold() const {
  if (repulsion_threshold >= 0.0) return repulsion_threshold;
  return 0.5 * particle_mass / (grid_cell * grid_cell * grid_cell);
}

void validate(const SimConfig& cfg) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) fail("dt must be positive");
  if (cfg.substeps < 1) fail("substeps must be >= 1");
  if (!cfg.gravity.allFinite()) fail("gravity must be finite");
  if (!(cfg.particle_mass > 0.0)) fail("particle_mass must be positive");
  if (!(cfg.biphasic_ratio >= 1.0)) fail("biphasic_ratio must be >= 1");
  if (!(cfg.grid_cell > 0.0)) fail("grid_cell must be positive");
  if (!(cfg.grid_blend >= 0.0 && cfg.grid_blend <= 1.0)) fail("grid_blend must lie in [0,1]");
  if (!(cfg.collision_friction >= 0.0 && cfg.collision_friction <= 1.0)) {
    fail("collision_friction must lie in [0,1]");
  }
  for (double v : {cfg.global_damping, cfg.repulsion_gain, cfg.wind_drag, cfg.collision_margin,
                   cfg.edge.stiffness, cfg.bend.stiffness, cfg.torsion.stiffness,
                   cfg.aug_local.stiffness, cfg.aug_global.stiffness, cfg.edge.damping,
                   cfg.bend.damping, cfg.torsion.damping, cfg.aug_local.damping,
                   cfg.aug_global.damping}) {
    if (!std::isfinite(v) || v < 0.0) fail("stiffness, damping and gains must be finite and >= 0");
  }
}

Vec3 WindField::velocity(double t, const Vec3& x) const {
  if (!enabled) return Vec3::Zero();
  if (gust_amplitude == 0.0) return strength * direction;
  // seed-derived phase, plus a travelling component along the wind direction
  const double phase = static_cast<double>(turbulence_seed % 6283U) * 1e-3;
  const double travel = 0.05 * direction.dot(x);
  const double gust = std::sin(2.0 * std::numbers::pi * gust_frequency * t + phase - travel);
  return strength * (1.0 + gust_amplitude * gust) * direction;
}

bool Grid::covers(const Vec3& x) const {
  const Vec3 hi = origin + cell * (dims.cast<double>() - Vec3::Ones());
  return (x.array() >= origin.array()).all() && (x.array() <= hi.array()).all();
}

Vec3 Grid::total_momentum() const {
  Vec3 sum = Vec3::Zero();
  for (const auto& n : nodes) sum += n.momentum;
  return sum;
}

Particle SimState::particle(std::size_t i) const {
  return {positions[i], velocities[i], inv_mass[i], strand_ids[i], indices_in_strand[i], uids[i]};
}

namespace {

constexpr std::size_t kMaxGridNodes = std::size_t{1} << 22;

struct Cell {
  std::size_t base = 0;  // node index of the lower corner
  double tx = 0.0, ty = 0.0, tz = 0.0;
};

// The grid is padded so the 2x2x2 block around any covered point is in range.
inline Cell locate(const Grid& g, const Vec3& x, double inv_cell) {
  const double fx = (x.x() - g.origin.x()) * inv_cell;
  const double fy = (x.y() - g.origin.y()) * inv_cell;
  const double fz = (x.z() - g.origin.z()) * inv_cell;
  // coordinates are non-negative inside the padded box, so truncation is floor
  const int i = std::clamp(static_cast<int>(fx), 0, g.dims.x() - 2);
  const int j = std::clamp(static_cast<int>(fy), 0, g.dims.y() - 2);
  const int k = std::clamp(static_cast<int>(fz), 0, g.dims.z() - 2);
  return {g.index(i, j, k), fx - i, fy - j, fz - k};
}

struct Offsets {
  std::size_t o[8];
  explicit Offsets(const Grid& g) {
    const std::size_t sy = static_cast<std::size_t>(g.dims.x());
    const std::size_t sz = sy * static_cast<std::size_t>(g.dims.y());
    for (int c = 0; c < 8; ++c) {
      o[c] = static_cast<std::size_t>(c & 1) + ((c >> 1) & 1 ? sy : 0) + ((c >> 2) & 1 ? sz : 0);
    }
  }
};

inline void weights(const Cell& c, double w[8]) {
  const double x0 = 1.0 - c.tx, y0 = 1.0 - c.ty, z0 = 1.0 - c.tz;
  const double a = y0 * z0, b = c.ty * z0, d = y0 * c.tz, e = c.ty * c.tz;
  w[0] = x0 * a;
  w[1] = c.tx * a;
  w[2] = x0 * b;
  w[3] = c.tx * b;
  w[4] = x0 * d;
  w[5] = c.tx * d;
  w[6] = x0 * e;
  w[7] = c.tx * e;
}

void layout_grid(Eigen::AlignedBox3d box, double cell, Grid& g) {
  if (box.isEmpty()) box.extend(Vec3::Zero());
  // coarsen when fragments spread the box too far
  double h = cell;
  const Vec3 ext = box.sizes();
  while (true) {
    const Eigen::Vector3d n = (ext / h).array().floor() + 3.0;
    if (n.prod() <= static_cast<double>(kMaxGridNodes)) break;
    h *= 2.0;
  }
  g.cell = h;
  g.origin = box.min() - Vec3::Constant(h);
  g.dims = ((box.max() - g.origin) / h).array().floor().cast<int>() + 2;
  g.nodes.assign(static_cast<std::size_t>(g.dims.prod()), GridNode{});
}

using Vec4 = Eigen::Vector4d;

// Accumulates (momentum, mass) per node into acc, then copies into g.nodes.
void scatter(const std::vector<Vec3>& xs, const std::vector<Vec3>& vs, double mass, double cell,
             const Eigen::AlignedBox3d& box, Grid& g, std::vector<Vec4>& acc) {
  layout_grid(box, cell, g);
  acc.assign(g.nodes.size(), Vec4::Zero());
  const Offsets off(g);
  const double inv_cell = 1.0 / g.cell;
  double w[8];
  for (std::size_t p = 0; p < xs.size(); ++p) {
    const Cell c = locate(g, xs[p], inv_cell);
    weights(c, w);
    const Vec4 mv(mass * vs[p].x(), mass * vs[p].y(), mass * vs[p].z(), mass);
    Vec4* base = acc.data() + c.base;
    for (int k = 0; k < 8; ++k) base[off.o[k]] += w[k] * mv;
  }
  for (std::size_t i = 0; i < acc.size(); ++i) {
    g.nodes[i].momentum = acc[i].head<3>();
    g.nodes[i].mass = acc[i].w();
  }
}

// Per node: velocity in xyz, density in w.
struct Scratch {
  std::vector<Vec3> extra, next_x, next_v;
  std::vector<Vec4> acc, field;
  Grid grid;
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

void update_world_proxies(SimState& s) {
  s.world_proxies.clear();
  s.proxy_lookup = {};
  if (!s.head) return;
  for (const auto& p : s.head->collision_proxies) {
    s.world_proxies.push_back({s.head_transform * p.center, p.radius});
  }
  if (s.world_proxies.empty()) return;

  ProxyLookup& lk = s.proxy_lookup;
  Eigen::AlignedBox3d box;
  for (const auto& p : s.world_proxies) {
    box.extend(p.center - Vec3::Constant(p.radius + lk.pad));
    box.extend(p.center + Vec3::Constant(p.radius + lk.pad));
  }
  lk.origin = box.min();
  lk.dims = (box.sizes() / lk.cell).array().ceil().cast<int>().max(1);
  const auto ncells = static_cast<std::size_t>(lk.dims.prod());
  std::vector<std::vector<int>> lists(ncells);
  for (int k = 0; k < lk.dims.z(); ++k) {
    for (int j = 0; j < lk.dims.y(); ++j) {
      for (int i = 0; i < lk.dims.x(); ++i) {
        const Vec3 lo = lk.origin + lk.cell * Vec3(i, j, k);
        const Eigen::AlignedBox3d cell(lo, lo + Vec3::Constant(lk.cell));
        auto& list = lists[(static_cast<std::size_t>(k) * static_cast<std::size_t>(lk.dims.y()) +
                            static_cast<std::size_t>(j)) * static_cast<std::size_t>(lk.dims.x()) +
                           static_cast<std::size_t>(i)];
        for (std::size_t q = 0; q < s.world_proxies.size(); ++q) {
          const auto& p = s.world_proxies[q];
          if (cell.exteriorDistance(p.center) <= p.radius + lk.pad) list.push_back(static_cast<int>(q));
        }
      }
    }
  }
  lk.starts.assign(ncells + 1, 0);
  for (std::size_t c = 0; c < ncells; ++c) {
    lk.starts[c + 1] = lk.starts[c] + static_cast<int>(lists[c].size());
    lk.items.insert(lk.items.end(), lists[c].begin(), lists[c].end());
  }
}

inline void push_out(const Sphere& p, double margin, double friction, Vec3& x, Vec3& v) {
  const Vec3 d = x - p.center;
  const double r = p.radius + margin;
  const double d2 = d.squaredNorm();
  if (d2 >= r * r) return;
  const double len = std::sqrt(d2);
  const Vec3 n = len > 1e-12 ? Vec3(d / len) : Vec3::UnitY();
  x = p.center + r * n;
  const double vn = v.dot(n);
  const Vec3 vt = v - vn * n;
  v = std::max(vn, 0.0) * n + (1.0 - friction) * vt;
}

inline void collide(const SimState& s, const SimConfig& cfg, Vec3& x, Vec3& v) {
  const double margin = cfg.collision_margin;
  const ProxyLookup& lk = s.proxy_lookup;
  if (margin > lk.pad) {
    for (const auto& p : s.world_proxies) push_out(p, margin, cfg.collision_friction, x, v);
    return;
  }
  const Vec3 f = (x - lk.origin) / lk.cell;
  if ((f.array() < 0.0).any()) return;
  const int i = static_cast<int>(f.x()), j = static_cast<int>(f.y()), k = static_cast<int>(f.z());
  if (i >= lk.dims.x() || j >= lk.dims.y() || k >= lk.dims.z()) return;
  const std::size_t c = (static_cast<std::size_t>(k) * static_cast<std::size_t>(lk.dims.y()) +
                         static_cast<std::size_t>(j)) * static_cast<std::size_t>(lk.dims.x()) +
                        static_cast<std::size_t>(i);
  for (int q = lk.starts[c]; q < lk.starts[c + 1]; ++q) {
    push_out(s.world_proxies[static_cast<std::size_t>(lk.items[static_cast<std::size_t>(q)])], margin,
             cfg.collision_friction, x, v);
  }
}

}  // namespace

SpringForce spring_force(const Spring& s, const Vec3& xa, const Vec3& xb, const Vec3& va,
                         const Vec3& vb, double biphasic_ratio) {
  SpringForce f;
  if (s.one_way) {
    const Vec3 e = xa - (xb + s.offset);
    double k = s.stiffness;
    if (e.dot(s.offset) > 0.0) k *= biphasic_ratio;
    f.on_a = -k * e - s.damping * (va - vb);
    return f;
  }
  const Vec3 d = xb - xa;
  const double len = d.norm();
  if (len < 1e-12) return f;
  const Vec3 u = d / len;
  const double mag = s.stiffness * (len - s.rest_length) + s.damping * (vb - va).dot(u);
  f.on_a = mag * u;
  f.on_b = -f.on_a;
  return f;
}

void scatter_to_grid(const SimState& state, const SimConfig& cfg, Grid& grid) {
  Eigen::AlignedBox3d box;
  for (const auto& x : state.positions) box.extend(x);
  std::vector<Vec4> acc;
  scatter(state.positions, state.velocities, cfg.particle_mass, cfg.grid_cell, box, grid, acc);
}

double density_at(const Grid& g, const Vec3& x) {
  if (g.nodes.empty()) return 0.0;
  const Offsets off(g);
  const Cell c = locate(g, x, 1.0 / g.cell);
  double w[8];
  weights(c, w);
  const double inv_vol = 1.0 / (g.cell * g.cell * g.cell);
  double rho = 0.0;
  for (int k = 0; k < 8; ++k) rho += w[k] * (g.nodes[c.base + off.o[k]].mass * inv_vol);
  return rho;
}

void reindex(SimState& s) {
  s.strands.clear();
  const int n = static_cast<int>(s.positions.size());
  for (int p = 0; p < n;) {
    StrandSpan span;
    span.strand_id = s.strand_ids[static_cast<std::size_t>(p)];
    span.first_particle = p;
    while (p < n && s.strand_ids[static_cast<std::size_t>(p)] == span.strand_id) ++p;
    span.particle_count = p - span.first_particle;
    s.strands.push_back(span);
  }
  // springs are grouped by strand in ascending order
  std::size_t sp = 0;
  for (auto& span : s.strands) {
    span.first_spring = static_cast<int>(sp);
    const int hi = span.first_particle + span.particle_count;
    while (sp < s.springs.size() && s.springs[sp].a >= span.first_particle && s.springs[sp].a < hi) ++sp;
    span.spring_count = static_cast<int>(sp) - span.first_spring;
  }
  auto& pk = s.packed;
  pk.two_way.clear();
  pk.one_way.clear();
  pk.ranges.clear();
  for (const auto& span : s.strands) {
    PackedSprings::Range r{pk.two_way.size(), 0, pk.one_way.size(), 0};
    const auto k0 = static_cast<std::size_t>(span.first_spring);
    for (std::size_t k = k0; k < k0 + static_cast<std::size_t>(span.spring_count); ++k) {
      const Spring& sp = s.springs[k];
      if (!sp.one_way) pk.two_way.push_back({sp.a, sp.b, sp.rest_length, sp.stiffness, sp.damping});
    }
    for (std::size_t k = k0; k < k0 + static_cast<std::size_t>(span.spring_count); ++k) {
      const Spring& sp = s.springs[k];
      if (sp.one_way) pk.one_way.push_back({sp.a, sp.b, sp.stiffness, sp.damping, sp.offset});
    }
    r.two_end = pk.two_way.size();
    r.one_end = pk.one_way.size();
    pk.ranges.push_back(r);
  }

  std::uint32_t max_uid = 0;
  for (auto u : s.uids) max_uid = std::max(max_uid, u + 1);
  if (s.index_of_uid.size() < max_uid) s.index_of_uid.resize(max_uid, -1);
  std::fill(s.index_of_uid.begin(), s.index_of_uid.end(), -1);
  for (std::size_t i = 0; i < s.uids.size(); ++i) s.index_of_uid[s.uids[i]] = static_cast<int>(i);
}

SimState build_sim(const Hairstyle& h, std::shared_ptr<const HeadMesh> head, const SimConfig& cfg) {
  validate(cfg);
  const auto violations = validate_hairstyle(h);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "hairstyle '" << h.id << "' invalid: " << violations.front().rule;
    if (violations.front().strand) msg << " (strand " << *violations.front().strand << ")";
    throw Error(ErrorCode::InvalidHairstyle, msg.str());
  }

  SimState s;
  const std::size_t total = h.vertex_count();
  s.positions.reserve(total);
  s.velocities.assign(total, Vec3::Zero());
  s.inv_mass.reserve(total);
  s.strand_ids.reserve(total);
  s.indices_in_strand.reserve(total);
  s.springs.reserve(5 * total);

  auto add_spring = [&](SpringKind kind, int a, int b) {
    const KindParams& kp = cfg.params(kind);
    Spring sp;
    sp.kind = kind;
    sp.a = a;
    sp.b = b;
    sp.stiffness = kp.stiffness;
    sp.damping = kp.damping;
    sp.one_way = is_one_way(kind);
    const Vec3 off = s.positions[static_cast<std::size_t>(a)] - s.positions[static_cast<std::size_t>(b)];
    sp.rest_length = off.norm();
    if (sp.one_way) sp.offset = off;
    s.springs.push_back(sp);
  };

  for (std::size_t si = 0; si < h.strands.size(); ++si) {
    const auto& verts = h.strands[si].vertices;
    const int first = static_cast<int>(s.positions.size());
    const int n = static_cast<int>(verts.size());
    for (int i = 0; i < n; ++i) {
      s.positions.push_back(verts[static_cast<std::size_t>(i)]);
      s.inv_mass.push_back(i == 0 ? 0.0 : 1.0 / cfg.particle_mass);
      s.strand_ids.push_back(static_cast<int>(si));
      s.indices_in_strand.push_back(i);
    }
    for (int i = 0; i + 1 < n; ++i) add_spring(SpringKind::edge, first + i, first + i + 1);
    for (int i = 0; i + 2 < n; ++i) add_spring(SpringKind::bend, first + i, first + i + 2);
    for (int i = 0; i + 3 < n; ++i) add_spring(SpringKind::torsion, first + i, first + i + 3);
    for (int i = 1; i < n; ++i) add_spring(SpringKind::aug_local, first + i, first + i - 1);
    for (int i = 1; i < n; ++i) add_spring(SpringKind::aug_global, first + i, first);
  }
  s.rest_positions = s.positions;
  s.uids.resize(total);
  for (std::size_t i = 0; i < total; ++i) s.uids[i] = static_cast<std::uint32_t>(i);
  s.head = std::move(head);
  update_world_proxies(s);

  scatter_to_grid(s, cfg, s.grid);
  s.rest_density.resize(total);
  for (std::size_t i = 0; i < total; ++i) s.rest_density[i] = density_at(s.grid, s.positions[i]);
  reindex(s);
  return s;
}

void append_strands(SimState& s, const std::vector<Strand>& strands, const SimConfig& cfg) {
  if (strands.empty()) return;
  Hairstyle h;
  h.id = "appended";
  h.strands = strands;
  const SimState add = build_sim(h, nullptr, cfg);

  const int base = static_cast<int>(s.particle_count());
  int next_strand = 0;
  for (int id : s.strand_ids) next_strand = std::max(next_strand, id + 1);
  std::uint32_t next_uid = static_cast<std::uint32_t>(s.index_of_uid.size());
  for (auto u : s.uids) next_uid = std::max(next_uid, u + 1);

  const Eigen::Matrix3d r = s.head_transform.linear();
  for (std::size_t i = 0; i < add.particle_count(); ++i) {
    s.positions.push_back(s.head_transform * add.rest_positions[i]);
    s.velocities.push_back(Vec3::Zero());
    s.inv_mass.push_back(add.inv_mass[i]);
    s.strand_ids.push_back(next_strand + add.strand_ids[i]);
    s.indices_in_strand.push_back(add.indices_in_strand[i]);
    s.uids.push_back(next_uid + add.uids[i]);
    s.rest_positions.push_back(add.rest_positions[i]);
  }
  for (Spring sp : add.springs) {
    sp.a += base;
    sp.b += base;
    if (sp.one_way) sp.offset = r * sp.offset;
    s.springs.push_back(sp);
  }

  // New hair raises the density around the old; resample everyone so the
  // added strands do not start out repelling their neighbours.
  Grid g;
  scatter_to_grid(s, cfg, g);
  s.rest_density.resize(s.particle_count());
  for (std::size_t i = 0; i < s.particle_count(); ++i) s.rest_density[i] = density_at(g, s.positions[i]);
  reindex(s);
}

void step(SimState& s, const SimConfig& cfg, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  Scratch& w = scratch();
  const std::size_t n = s.particle_count();
  w.next_x.resize(n);
  w.next_v.resize(n);

  const double mass = cfg.particle_mass;
  const Vec3 weight = mass * cfg.gravity;
  const bool wind_on = s.wind.enabled && s.wind.strength != 0.0;
  const double damp = std::max(0.0, 1.0 - cfg.global_damping * dt);
  const double ratio = cfg.biphasic_ratio;
  const bool collide_on = !s.world_proxies.empty();
  const int nstrands = static_cast<int>(s.strands.size());
  const auto& pk = s.packed;
  const Vec3* x = s.positions.data();
  const Vec3* v = s.velocities.data();

  const bool grabbing = s.grab.has_value();
  if (grabbing) {
    w.extra.assign(n, Vec3::Zero());
    for (std::uint32_t uid : s.grab->uids) {
      const int p = uid < s.index_of_uid.size() ? s.index_of_uid[uid] : -1;
      if (p < 0 || s.is_pinned(static_cast<std::size_t>(p))) continue;
      const auto i = static_cast<std::size_t>(p);
      Vec3 f = s.grab->stiffness * (s.grab->target - x[i]);
      const double fn = f.norm();
      if (fn > s.grab->max_force) f *= s.grab->max_force / fn;
      w.extra[i] += f;
    }
  }

  // Per strand: accumulate forces (two-way then one-way springs, each in
  // index order), integrate, collide. Strands only touch their own particles.
  Eigen::AlignedBox3d box;
#pragma omp parallel
  {
    std::vector<Vec3> force;
    Eigen::AlignedBox3d local;
#pragma omp for schedule(static) nowait
    for (int si = 0; si < nstrands; ++si) {
      const StrandSpan& span = s.strands[static_cast<std::size_t>(si)];
      const auto p0 = static_cast<std::size_t>(span.first_particle);
      const auto np = static_cast<std::size_t>(span.particle_count);
      force.resize(np);
      Vec3* f = force.data() - p0;  // indexed by global particle id
      for (std::size_t p = p0; p < p0 + np; ++p) {
        Vec3 fp = weight;
        if (wind_on) fp += cfg.wind_drag * (s.wind.velocity(s.time, x[p]) - v[p]);
        if (grabbing) fp += w.extra[p];
        f[p] = fp;
      }
      const auto& range = pk.ranges[static_cast<std::size_t>(si)];
      for (std::size_t k = range.two_begin; k < range.two_end; ++k) {
        const auto& sp = pk.two_way[k];
        const auto a = static_cast<std::size_t>(sp.a), b = static_cast<std::size_t>(sp.b);
        const Vec3 d = x[b] - x[a];
        const double len = d.norm();
        if (len < 1e-12) continue;
        const Vec3 u = d * (1.0 / len);
        const Vec3 fa = (sp.stiffness * (len - sp.rest_length) + sp.damping * (v[b] - v[a]).dot(u)) * u;
        f[a] += fa;
        f[b] -= fa;
      }
      for (std::size_t k = range.one_begin; k < range.one_end; ++k) {
        const auto& sp = pk.one_way[k];
        const auto a = static_cast<std::size_t>(sp.a), b = static_cast<std::size_t>(sp.b);
        const Vec3 e = x[a] - (x[b] + sp.offset);
        const double kk = e.dot(sp.offset) > 0.0 ? sp.stiffness * ratio : sp.stiffness;
        f[a] -= kk * e + sp.damping * (v[a] - v[b]);
      }
      for (std::size_t p = p0; p < p0 + np; ++p) {
        if (s.inv_mass[p] == 0.0) {
          w.next_x[p] = x[p];
          w.next_v[p].setZero();
        } else {
          Vec3 vp = (v[p] + dt * s.inv_mass[p] * f[p]) * damp;
          Vec3 xp = x[p] + dt * vp;
          if (collide_on) collide(s, cfg, xp, vp);
          w.next_x[p] = xp;
          w.next_v[p] = vp;
        }
        local.extend(w.next_x[p]);
      }
    }
#pragma omp critical
    box.extend(local);
  }

  // hair-hair coupling through the grid
  const bool finite_box = box.isEmpty() || (box.min().allFinite() && box.max().allFinite());
  if (finite_box) scatter(w.next_x, w.next_v, mass, cfg.grid_cell, box, w.grid, w.acc);
  const Grid& g = w.grid;
  const double blend = cfg.grid_blend;
  const double gain = cfg.repulsion_gain;
  const double threshold = cfg.effective_repulsion_threshold();
  const bool couple = finite_box && (blend > 0.0 || gain > 0.0);
  if (couple) {
    const double inv_vol = 1.0 / (g.cell * g.cell * g.cell);
    w.field.resize(w.acc.size());
    for (std::size_t i = 0; i < w.acc.size(); ++i) {
      const Vec4& a = w.acc[i];
      const double m = a.w();
      w.field[i] = m > 0.0 ? Vec4(a.x() / m, a.y() / m, a.z() / m, m * inv_vol) : Vec4::Zero();
    }
  }

  // blend toward the grid, repel from dense regions, and reject non-finite or
  // runaway states before committing anything
  const double limit = cfg.blowup_limit;
  std::size_t bad = n;
  const Offsets off(g);
  const Vec4* field = w.field.data();
  const double inv_cell = 1.0 / g.cell;
#pragma omp parallel for schedule(static) reduction(min : bad)
  for (std::size_t p = 0; p < n; ++p) {
    const Vec3& xp = w.next_x[p];
    if (couple && s.inv_mass[p] != 0.0) {
      const Cell c = locate(g, xp, inv_cell);
      double wt[8];
      weights(c, wt);
      const Vec4* nf = field + c.base;
      Vec4 sum = Vec4::Zero();
      double r[8];
      for (int k = 0; k < 8; ++k) {
        const Vec4& node = nf[off.o[k]];
        sum += wt[k] * node;
        r[k] = node.w();
      }
      const double rho = sum.w();
      Vec3 vp = (1.0 - blend) * w.next_v[p] + blend * sum.head<3>();
      const double excess = gain > 0.0 ? rho - s.rest_density[p] - threshold : 0.0;
      if (excess > 0.0) {
        const double x0 = 1.0 - c.tx, y0 = 1.0 - c.ty, z0 = 1.0 - c.tz;
        const Vec3 grad =
            inv_cell * Vec3(y0 * z0 * (r[1] - r[0]) + c.ty * z0 * (r[3] - r[2]) +
                                y0 * c.tz * (r[5] - r[4]) + c.ty * c.tz * (r[7] - r[6]),
                            x0 * z0 * (r[2] - r[0]) + c.tx * z0 * (r[3] - r[1]) +
                                x0 * c.tz * (r[6] - r[4]) + c.tx * c.tz * (r[7] - r[5]),
                            x0 * y0 * (r[4] - r[0]) + c.tx * y0 * (r[5] - r[1]) +
                                x0 * c.ty * (r[6] - r[2]) + c.tx * c.ty * (r[7] - r[3]));
        const double gn = grad.norm();
        if (gn > 1e-12) vp -= (gain * dt * excess / gn) * grad;
      }
      w.next_v[p] = vp;
    }
    const Vec3& vp = w.next_v[p];
    if (!xp.allFinite() || !vp.allFinite() || xp.cwiseAbs().maxCoeff() > limit) bad = std::min(bad, p);
  }
  if (bad < n) {
    std::ostringstream msg;
    msg << "numerical blowup at t=" << s.time << " (particle " << bad << ", strand " << s.strand_ids[bad]
        << ")";
    throw Error(ErrorCode::NumericalBlowup, msg.str());
  }
  s.positions.swap(w.next_x);
  s.velocities.swap(w.next_v);
  std::swap(s.grid, w.grid);
  s.time += dt;
}

void step_frame(SimState& state, const SimConfig& cfg) {
  for (int i = 0; i < cfg.substeps; ++i) step(state, cfg, cfg.dt);
}

void set_wind(SimState& state, const WindField& wind) {
  if (wind.enabled) {
    if (!wind.direction.allFinite() || std::abs(wind.direction.norm() - 1.0) > 1e-6) {
      throw Error(ErrorCode::NonUnitDirection, "wind direction must be unit length");
    }
    if (!std::isfinite(wind.strength) || !(wind.gust_amplitude >= 0.0 && wind.gust_amplitude <= 1.0) ||
        !std::isfinite(wind.gust_frequency)) {
      throw Error(ErrorCode::InvalidArgument, "wind strength/gust parameters out of range");
    }
  }
  state.wind = wind;
}

void set_head_transform(SimState& s, const Isometry& t) {
  const Eigen::Matrix3d r = t.linear();
  if (!t.matrix().allFinite() || !(r.transpose() * r).isApprox(Eigen::Matrix3d::Identity(), 1e-9) ||
      r.determinant() <= 0.0 || !t.matrix().row(3).isApprox(Eigen::RowVector4d(0, 0, 0, 1))) {
    throw Error(ErrorCode::NonRigidTransform, "head transform must be a rotation plus translation");
  }
  s.head_transform = t;
  for (auto& sp : s.springs) {
    if (sp.one_way) {
      sp.offset = r * (s.rest_positions[static_cast<std::size_t>(sp.a)] -
                       s.rest_positions[static_cast<std::size_t>(sp.b)]);
    }
  }
  for (auto& sp : s.packed.one_way) {
    sp.offset = r * (s.rest_positions[static_cast<std::size_t>(sp.a)] -
                     s.rest_positions[static_cast<std::size_t>(sp.b)]);
  }
  for (std::size_t p = 0; p < s.particle_count(); ++p) {
    if (s.inv_mass[p] == 0.0) {
      s.positions[p] = t * s.rest_positions[p];
      s.velocities[p].setZero();
    }
  }
  update_world_proxies(s);
}

double kinetic_energy(const SimState& s, const SimConfig& cfg) {
  double e = 0.0;
  for (std::size_t p = 0; p < s.particle_count(); ++p) {
    if (s.inv_mass[p] != 0.0) e += 0.5 * cfg.particle_mass * s.velocities[p].squaredNorm();
  }
  return e;
}

Hairstyle to_hairstyle(const SimState& s, const std::string& id) {
  Hairstyle h;
  h.id = id;
  h.source = StyleSource::groomed;
  h.strands.reserve(s.strands.size());
  for (const auto& span : s.strands) {
    Strand st;
    const auto first = s.positions.begin() + span.first_particle;
    st.vertices.assign(first, first + span.particle_count);
    h.strands.push_back(std::move(st));
  }
  return h;
}

bool springs_valid(const SimState& s) {
  const auto n = static_cast<int>(s.particle_count());
  return std::all_of(s.springs.begin(), s.springs.end(), [n](const Spring& sp) {
    return sp.a >= 0 && sp.a < n && sp.b >= 0 && sp.b < n && sp.a != sp.b;
  });
}

}  // namespace hairforge::sim

#include "hairforge/groom.hpp"

#include <algorithm>
#include <cmath>

namespace hairforge::groom {

namespace {

bool unit(const Vec3& v) { return v.allFinite() && std::abs(v.norm() - 1.0) <= 1e-6; }

int live_index(const sim::SimState& s, std::uint32_t uid) {
  return uid < s.index_of_uid.size() ? s.index_of_uid[uid] : -1;
}

void install(sim::SimState& s, const GrabHandle& h) {
  s.grab = sim::GrabForce{h.particle_ids, h.target, h.stiffness, h.max_force};
}

// Keeps particles with keep[p] set. Survivors of one span that are separated
// by a removed particle end up in different runs; springs only survive inside
// a run, and every run after the first gets a fresh strand id.
void compact(sim::SimState& s, const std::vector<char>& keep) {
  const std::size_t n = s.particle_count();
  std::vector<int> run(n, -1);
  std::vector<int> run_strand;
  int next_id = 0;
  for (int id : s.strand_ids) next_id = std::max(next_id, id + 1);
  for (const auto& span : s.strands) {
    bool open = false, first = true;
    for (int i = 0; i < span.particle_count; ++i) {
      const auto p = static_cast<std::size_t>(span.first_particle + i);
      if (!keep[p]) {
        open = false;
        continue;
      }
      if (!open) {
        run_strand.push_back(first ? span.strand_id : next_id++);
        first = false;
        open = true;
      }
      run[p] = static_cast<int>(run_strand.size()) - 1;
    }
  }

  std::vector<int> remap(n, -1);
  std::size_t out = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (!keep[p]) continue;
    remap[p] = static_cast<int>(out);
    s.positions[out] = s.positions[p];
    s.velocities[out] = s.velocities[p];
    s.inv_mass[out] = s.inv_mass[p];
    s.strand_ids[out] = run_strand[static_cast<std::size_t>(run[p])];
    s.indices_in_strand[out] = s.indices_in_strand[p];
    s.uids[out] = s.uids[p];
    s.rest_positions[out] = s.rest_positions[p];
    s.rest_density[out] = s.rest_density[p];
    ++out;
  }
  s.positions.resize(out);
  s.velocities.resize(out);
  s.inv_mass.resize(out);
  s.strand_ids.resize(out);
  s.indices_in_strand.resize(out);
  s.uids.resize(out);
  s.rest_positions.resize(out);
  s.rest_density.resize(out);

  std::vector<sim::Spring> springs;
  std::vector<int> spring_run;
  springs.reserve(s.springs.size());
  for (const auto& sp : s.springs) {
    const auto a = static_cast<std::size_t>(sp.a), b = static_cast<std::size_t>(sp.b);
    if (!keep[a] || !keep[b] || run[a] != run[b]) continue;
    sim::Spring kept = sp;
    kept.a = remap[a];
    kept.b = remap[b];
    springs.push_back(kept);
    spring_run.push_back(run[a]);
  }
  // runs are numbered in particle order, so sorting by run groups springs by span
  std::vector<std::size_t> order(springs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return spring_run[x] < spring_run[y]; });
  s.springs.clear();
  for (std::size_t i : order) s.springs.push_back(springs[i]);
  sim::reindex(s);
}

}  // namespace

GrabHandle begin_grab(sim::SimState& s, const Ray& ray, double radius, const GrabOptions& opts) {
  if (!unit(ray.direction) || !ray.origin.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "grab ray needs a finite origin and unit direction");
  }
  if (!(radius > 0.0) || !std::isfinite(radius)) throw Error(ErrorCode::InvalidArgument, "grab radius must be > 0");
  if (!(opts.stiffness > 0.0) || !(opts.max_force > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "grab stiffness and max_force must be > 0");
  }
  GrabHandle h;
  Vec3 sum = Vec3::Zero();
  for (std::size_t p = 0; p < s.particle_count(); ++p) {
    if (s.is_pinned(p)) continue;
    const Vec3 rel = s.positions[p] - ray.origin;
    const double t = rel.dot(ray.direction);
    if (t < 0.0 || (rel - t * ray.direction).norm() > radius) continue;
    h.particle_ids.push_back(s.uids[p]);
    sum += s.positions[p];
  }
  if (h.particle_ids.empty()) throw Error(ErrorCode::EmptyGrab, "grab ray selects no free particles");
  std::sort(h.particle_ids.begin(), h.particle_ids.end());
  h.target = sum / static_cast<double>(h.particle_ids.size());
  h.stiffness = opts.stiffness;
  h.max_force = opts.max_force;
  h.active = true;
  install(s, h);
  return h;
}

void update_grab(sim::SimState& s, GrabHandle& h, const Vec3& target) {
  if (!h.active) throw Error(ErrorCode::StaleHandle, "grab handle was released");
  if (!target.allFinite()) throw Error(ErrorCode::NonFiniteInput, "grab target must be finite");
  std::erase_if(h.particle_ids, [&](std::uint32_t uid) { return live_index(s, uid) < 0; });
  if (h.particle_ids.empty()) {
    h.active = false;
    s.grab.reset();
    throw Error(ErrorCode::StaleHandle, "every grabbed particle has been trimmed");
  }
  h.target = target;
  install(s, h);
}

void end_grab(sim::SimState& s, GrabHandle& h) {
  h.active = false;
  s.grab.reset();
}

Vec3 grab_centroid(const sim::SimState& s, const GrabHandle& h) {
  Vec3 sum = Vec3::Zero();
  int count = 0;
  for (std::uint32_t uid : h.particle_ids) {
    const int p = live_index(s, uid);
    if (p < 0) continue;
    sum += s.positions[static_cast<std::size_t>(p)];
    ++count;
  }
  return count > 0 ? Vec3(sum / count) : Vec3::Zero();
}

void validate(const TrimRegion& region) {
  if (const auto* sp = std::get_if<SphereRegion>(&region)) {
    if (!sp->center.allFinite() || !(sp->radius >= 0.0) || !std::isfinite(sp->radius)) {
      throw Error(ErrorCode::InvalidArgument, "trim sphere needs a finite centre and radius >= 0");
    }
  } else if (const auto* pl = std::get_if<BelowPlaneRegion>(&region)) {
    if (!pl->point.allFinite() || !unit(pl->normal)) {
      throw Error(ErrorCode::InvalidArgument, "trim plane needs a finite point and unit normal");
    }
  }
}

bool selects(const TrimRegion& region, const sim::SimState& s, std::size_t p) {
  const Vec3& x = s.positions[p];
  if (const auto* sp = std::get_if<SphereRegion>(&region)) {
    return (x - sp->center).norm() < sp->radius;
  }
  if (const auto* pl = std::get_if<BelowPlaneRegion>(&region)) {
    return (x - pl->point).dot(pl->normal) < 0.0;
  }
  const auto& tail = std::get<TailRegion>(region);
  return s.strand_ids[p] == tail.strand_id && s.indices_in_strand[p] >= tail.first_removed_index;
}

std::size_t trim(sim::SimState& s, const TrimRegion& region) {
  validate(region);
  std::vector<char> keep(s.particle_count(), 1);
  std::size_t removed = 0;
  for (std::size_t p = 0; p < keep.size(); ++p) {
    if (!s.is_pinned(p) && selects(region, s, p)) {
      keep[p] = 0;
      ++removed;
    }
  }
  if (removed > 0) compact(s, keep);
  return removed;
}

std::size_t collect_fragments(sim::SimState& s, const Eigen::AlignedBox3d& bounds) {
  std::vector<char> keep(s.particle_count(), 1);
  std::size_t removed = 0;
  for (const auto& span : s.strands) {
    bool rooted = false, inside = false;
    for (int i = 0; i < span.particle_count; ++i) {
      const auto p = static_cast<std::size_t>(span.first_particle + i);
      rooted = rooted || s.is_pinned(p);
      inside = inside || bounds.contains(s.positions[p]);
    }
    if (rooted || inside) continue;
    for (int i = 0; i < span.particle_count; ++i) keep[static_cast<std::size_t>(span.first_particle + i)] = 0;
    removed += static_cast<std::size_t>(span.particle_count);
  }
  if (removed > 0) compact(s, keep);
  return removed;
}

}  // namespace hairforge::groom

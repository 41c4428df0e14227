#pragma once

// Interactive grooming on a live simulation: grabbing through clamped one-way
// springs, and trimming by removing particles and the springs they carried.

#include "hairforge/sim.hpp"

#include <variant>

namespace hairforge::groom {

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();  // unit
};

struct GrabHandle {
  std::vector<std::uint32_t> particle_ids;  // particle uids, ascending
  Vec3 target = Vec3::Zero();
  double stiffness = 0.0;
  double max_force = 0.0;
  bool active = false;
};

struct GrabOptions {
  double stiffness = 1.5e5;  // g/s^2 per particle
  double max_force = 2.0e5;  // per particle, g cm/s^2
};

// Selects every free particle within `radius` of the ray (in front of its
// origin) and installs a zero-extension grab at the selection centroid.
// Throws InvalidArgument (non-unit direction, radius <= 0) or EmptyGrab.
GrabHandle begin_grab(sim::SimState& state, const Ray& ray, double radius, const GrabOptions& opts = {});

// Moves the target. Trimmed particles are pruned from the handle; throws
// StaleHandle when none remain or the handle was released.
void update_grab(sim::SimState& state, GrabHandle& handle, const Vec3& target);

// Removes the grab force; positions are untouched.
void end_grab(sim::SimState& state, GrabHandle& handle);

// Mean position of the handle's live particles.
Vec3 grab_centroid(const sim::SimState& state, const GrabHandle& handle);

struct SphereRegion {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};
struct BelowPlaneRegion {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitY();  // unit; particles with (x - point).normal < 0 are cut
};
struct TailRegion {
  int strand_id = 0;
  int first_removed_index = 0;
};
using TrimRegion = std::variant<SphereRegion, BelowPlaneRegion, TailRegion>;

// Throws InvalidArgument for negative radii or non-unit plane normals.
void validate(const TrimRegion& region);

bool selects(const TrimRegion& region, const sim::SimState& state, std::size_t particle);

// Removes every selected non-root particle and returns how many went. Springs
// touching a removed particle are dropped, and so are springs reaching across
// one, so a piece cut loose from the middle of a strand has no path back to
// the root and falls freely as its own span (with a fresh strand id).
std::size_t trim(sim::SimState& state, const TrimRegion& region);

// Drops rootless fragments lying entirely outside `bounds`; returns the
// number of particles removed.
std::size_t collect_fragments(sim::SimState& state, const Eigen::AlignedBox3d& bounds);

}  // namespace hairforge::groom

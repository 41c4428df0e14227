#pragma once

// Strand dynamics: a mass-spring system with edge (i,i+1), bend (i,i+2) and
// torsion (i,i+3) springs, two one-way shape springs per free particle, a
// background grid for hair-hair friction and repulsion, wind drag and
// sphere-proxy head collision. Integration is semi-implicit Euler.

#include "hairforge/error.hpp"
#include "hairforge/model.hpp"

#include <Eigen/Geometry>

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace hairforge::sim {

using Isometry = Eigen::Isometry3d;

enum class SpringKind : std::uint8_t { edge, bend, torsion, aug_local, aug_global };

constexpr bool is_one_way(SpringKind k) {
  return k == SpringKind::aug_local || k == SpringKind::aug_global;
}

struct Spring {
  SpringKind kind = SpringKind::edge;
  int a = 0;
  int b = 0;  // for one-way kinds: the anchor the target is measured from
  double rest_length = 0.0;
  double stiffness = 0.0;
  double damping = 0.0;
  bool one_way = false;
  // One-way kinds: target(a) = position(b) + offset, where offset is the rest
  // offset (rest_a - rest_b) rotated by the current head transform.
  Vec3 offset = Vec3::Zero();
};

// Value view of one particle; storage inside SimState is structure-of-arrays.
struct Particle {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double inv_mass = 0.0;  // 0 = pinned to the scalp
  int strand_id = 0;
  int index_in_strand = 0;
  std::uint32_t uid = 0;  // stable across trims
};

struct KindParams {
  double stiffness;
  double damping;
};

struct SimConfig {
  double dt = 1.0 / 600.0;
  int substeps = 10;  // per 60 Hz display frame
  Vec3 gravity{0.0, -981.0, 0.0};
  double global_damping = 2.0;  // 1/s
  double particle_mass = 1.0;
  KindParams edge{1.5e5, 40.0};
  KindParams bend{2.0e4, 10.0};
  KindParams torsion{5.0e3, 5.0};
  KindParams aug_local{4.0e3, 40.0};
  KindParams aug_global{1.0e3, 40.0};
  double biphasic_ratio = 4.0;  // aug stiffness multiplier when stretched
  double grid_cell = 2.0;       // cm
  double grid_blend = 0.1;
  double repulsion_gain = 20.0;
  double repulsion_threshold = -1.0;  // g/cm^3 above rest density; <0 means 0.5 * mass / cell^3
  double collision_friction = 0.3;
  double collision_margin = 0.05;  // cm
  double wind_drag = 1.0;          // g/s
  double blowup_limit = 1e6;       // cm

  const KindParams& params(SpringKind k) const;
  double effective_repulsion_threshold() const;
};

// Throws InvalidArgument.
void validate(const SimConfig& cfg);

struct WindField {
  Vec3 direction{1.0, 0.0, 0.0};
  double strength = 0.0;        // mean speed, cm/s
  double gust_amplitude = 0.0;  // [0,1]
  double gust_frequency = 0.5;  // Hz
  std::uint64_t turbulence_seed = 0;
  bool enabled = false;

  // Air velocity at time t and position x.
  Vec3 velocity(double t, const Vec3& x) const;
};

struct GridNode {
  Vec3 momentum = Vec3::Zero();
  double mass = 0.0;
};

// Node-based uniform grid covering the particle AABB padded by one cell.
struct Grid {
  Vec3 origin = Vec3::Zero();
  double cell = 2.0;
  Eigen::Vector3i dims = Eigen::Vector3i::Zero();
  std::vector<GridNode> nodes;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * static_cast<std::size_t>(dims.y()) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(dims.x()) +
           static_cast<std::size_t>(i);
  }
  bool covers(const Vec3& x) const;
  Vec3 total_momentum() const;
};

struct StrandSpan {
  int strand_id = 0;
  int first_particle = 0;
  int particle_count = 0;
  int first_spring = 0;
  int spring_count = 0;
};

struct GrabForce {
  std::vector<std::uint32_t> uids;
  Vec3 target = Vec3::Zero();
  double stiffness = 0.0;
  double max_force = 0.0;
};

// Compact copy of `springs` that the step loop streams through; rebuilt by
// reindex() and kept in sync by set_head_transform().
struct PackedSprings {
  struct TwoWay {
    int a, b;
    double rest_length, stiffness, damping;
  };
  struct OneWay {
    int a, b;
    double stiffness, damping;
    Vec3 offset;
  };
  struct Range {
    std::size_t two_begin, two_end, one_begin, one_end;
  };
  std::vector<TwoWay> two_way;
  std::vector<OneWay> one_way;
  std::vector<Range> ranges;  // per strand span
};

// Uniform cell grid over the proxy set; each cell lists the proxies that
// reach it (radius + pad).
struct ProxyLookup {
  Vec3 origin = Vec3::Zero();
  double cell = 1.5;
  double pad = 1.0;
  Eigen::Vector3i dims = Eigen::Vector3i::Zero();
  std::vector<int> starts;  // CSR offsets, size cells + 1
  std::vector<int> items;
};

struct SimState {
  // particle storage (structure-of-arrays, index = particle id)
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  std::vector<double> inv_mass;
  std::vector<int> strand_ids;
  std::vector<int> indices_in_strand;
  std::vector<std::uint32_t> uids;
  std::vector<Vec3> rest_positions;  // head frame
  std::vector<double> rest_density;

  // Grouped by strand in ascending particle order; within a strand two-way
  // springs precede one-way ones. Call reindex() after editing.
  std::vector<Spring> springs;
  PackedSprings packed;
  std::vector<StrandSpan> strands;
  std::vector<int> index_of_uid;  // -1 once trimmed

  Grid grid;
  double time = 0.0;
  WindField wind;
  std::shared_ptr<const HeadMesh> head;  // may be null (no collision)
  Isometry head_transform = Isometry::Identity();
  std::vector<Sphere> world_proxies;     // proxies under head_transform
  ProxyLookup proxy_lookup;
  std::optional<GrabForce> grab;

  std::size_t particle_count() const { return positions.size(); }
  Particle particle(std::size_t i) const;
  bool is_pinned(std::size_t i) const { return inv_mass[i] == 0.0; }
};

// Springs per strand of n vertices: n-1 edge, n-2 bend, n-3 torsion, n-1
// aug_local, n-1 aug_global. Roots pinned. Throws InvalidHairstyle.
SimState build_sim(const Hairstyle& h, std::shared_ptr<const HeadMesh> head, const SimConfig& cfg);

// Adds strands given in the head frame, placed under the current head
// transform with zero velocity. Rest density is resampled for every particle
// from the combined layout. Throws InvalidHairstyle.
void append_strands(SimState& state, const std::vector<Strand>& strands, const SimConfig& cfg);

// One semi-implicit step of length dt. Strong guarantee: on NumericalBlowup
// the state is left exactly as it was.
void step(SimState& state, const SimConfig& cfg, double dt);

// One display frame = cfg.substeps steps of cfg.dt.
void step_frame(SimState& state, const SimConfig& cfg);

// Throws NonUnitDirection when an enabled wind has a non-unit direction.
void set_wind(SimState& state, const WindField& wind);

// Pinned roots and one-way targets follow the transform immediately.
// Throws NonRigidTransform.
void set_head_transform(SimState& state, const Isometry& transform);

double kinetic_energy(const SimState& state, const SimConfig& cfg);

// Current geometry as a hairstyle, one strand per span (fragments included).
Hairstyle to_hairstyle(const SimState& state, const std::string& id);

// Rebuilds strand spans, the packed springs and the uid index after
// particles/springs change.
void reindex(SimState& state);

// Spring force on endpoint a (and the reaction on b for two-way kinds).
struct SpringForce {
  Vec3 on_a = Vec3::Zero();
  Vec3 on_b = Vec3::Zero();
};
SpringForce spring_force(const Spring& s, const Vec3& xa, const Vec3& xb, const Vec3& va,
                         const Vec3& vb, double biphasic_ratio);

// Momentum and mass scatter with trilinear weights; exposed for tests.
void scatter_to_grid(const SimState& state, const SimConfig& cfg, Grid& grid);

// Interpolated node density (mass / cell^3) at x.
double density_at(const Grid& grid, const Vec3& x);

// Sanity scan used by tests and the service: every spring endpoint valid.
bool springs_valid(const SimState& state);

}  // namespace hairforge::sim

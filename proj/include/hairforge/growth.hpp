#pragma once

// Procedural strand growth: a per-step direction recursion with a
// vertical-deviation-capped gravity pull and a helical curl term, plus
// area-weighted root sampling on painted head triangles.

#include "hairforge/error.hpp"
#include "hairforge/model.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace hairforge::growth {

struct GrowthParams {
  double p_gamma_cap = 0.2;     // floor on the gravity weight, in [0,1]
  double p_gravity = 0.05;      // per-step gravity gain (not a published default)
  double p_spiral = 0.3;        // spiral strength
  double p_helix_radius = 0.5;  // helix radius (not a published default)
  double p_freq = 1.0;          // radians per step
  int steps = 16;
  double segment_scale = 1.0;       // applied only when accumulating vertices
  double perturbation_scale = 0.1;  // scales the U(-1,1) root-direction jitter
};

// Throws InvalidArgument when a field is out of range.
void validate(const GrowthParams& params);

template <typename Scalar>
struct GrowthCursor {
  using Vec = Eigen::Matrix<Scalar, 3, 1>;
  int step = 0;
  Vec dir = Vec::Zero();
  Vec grav = Vec::Zero();
  Vec helix = Vec::Zero();
  Vec perturbation = Vec::Zero();
};

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> gravity_at(int step, Scalar p_gravity) {
  return {Scalar(0), -Scalar(step) * p_gravity, Scalar(0)};
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> helix_at(int step, Scalar p_helix_radius, Scalar p_freq) {
  const Scalar phase = Scalar(step) * p_freq;
  return {p_helix_radius * std::cos(phase), Scalar(1), p_helix_radius * std::sin(phase)};
}

// Runs the recursion from (root, dir0), appending T+1 vertices to `out` and,
// when `trace` is non-null, the T+1 cursors (step 0 holds dir0).
template <typename Scalar, typename VertexSink>
void grow_into(const Eigen::Matrix<Scalar, 3, 1>& root, const Eigen::Matrix<Scalar, 3, 1>& dir0,
               const GrowthParams& params, VertexSink&& out,
               std::vector<GrowthCursor<Scalar>>* trace = nullptr,
               const Eigen::Matrix<Scalar, 3, 1>& perturbation = Eigen::Matrix<Scalar, 3, 1>::Zero()) {
  using Vec = Eigen::Matrix<Scalar, 3, 1>;
  const auto cap = Scalar(params.p_gamma_cap);
  const auto gain = Scalar(params.p_gravity);
  const auto spiral = Scalar(params.p_spiral);
  const auto radius = Scalar(params.p_helix_radius);
  const auto freq = Scalar(params.p_freq);
  const auto scale = Scalar(params.segment_scale);

  Vec vertex = root;
  Vec dir = dir0;
  Vec grav_prev = Vec::Zero();
  out(vertex);
  if (trace) {
    trace->push_back({0, dir, grav_prev, helix_at<Scalar>(0, radius, freq), perturbation});
  }
  for (int i = 1; i <= params.steps; ++i) {
    const Vec grav = gravity_at<Scalar>(i, gain);
    const Scalar weight = std::max(cap, Scalar(1) - std::abs(dir.y()));
    const Vec bent = dir + grav_prev * weight;
    const Vec helix = helix_at<Scalar>(i, radius, freq);
    dir = bent + spiral * (bent - helix);
    vertex = vertex + scale * dir;
    out(vertex);
    if (trace) trace->push_back({i, dir, grav, helix, perturbation});
    grav_prev = grav;
  }
}

// T+1 vertices. Throws NonFiniteInput for NaN/Inf input and InvalidArgument
// for a zero direction or bad params.
Strand grow_strand(const Vec3& root, const Vec3& dir0, const GrowthParams& params);

std::vector<GrowthCursor<double>> trace_strand(const Vec3& root, const Vec3& dir0,
                                               const GrowthParams& params);

struct RootSample {
  Vec3 root = Vec3::Zero();
  Vec3 dir0 = Vec3::Zero();
  Vec3 perturbation = Vec3::Zero();
  int triangle_id = -1;
};

// Source of uniform doubles in [0,1). Draw order per sample: triangle pick,
// two barycentric draws, then three perturbation components.
template <typename F>
concept UniformSource = requires(F f) {
  { f() } -> std::convertible_to<double>;
};

// Deterministic [0,1) doubles from a 64-bit Mersenne Twister; the top 53
// bits map to the mantissa so output is identical across standard libraries.
class SeededUniform {
 public:
  explicit SeededUniform(std::uint64_t seed) : engine_(seed) {}
  double operator()() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 finalizer over (seed, index); per-strand sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

namespace detail {
RootSample sample_root_impl(const HeadMesh& mesh, const PaintSelection& sel,
                            const std::vector<double>& cumulative_area, double u_tri, double u1,
                            double u2, const Vec3& jitter_unit, double perturbation_scale);
std::vector<double> cumulative_areas(const HeadMesh& mesh, const PaintSelection& sel);
}  // namespace detail

template <UniformSource Rng>
RootSample sample_root(const HeadMesh& mesh, const PaintSelection& sel, Rng&& rng,
                       double perturbation_scale = 0.1) {
  if (sel.triangle_ids.empty()) throw Error(ErrorCode::EmptySelection, "paint selection has no triangles");
  const auto cdf = detail::cumulative_areas(mesh, sel);
  const double u_tri = rng();
  const double u1 = rng();
  const double u2 = rng();
  Vec3 jitter;
  for (int k = 0; k < 3; ++k) jitter[k] = 2.0 * rng() - 1.0;
  return detail::sample_root_impl(mesh, sel, cdf, u_tri, u1, u2, jitter, perturbation_scale);
}

RootSample sample_root(const HeadMesh& mesh, const PaintSelection& sel, std::uint64_t seed,
                       double perturbation_scale = 0.1);

// `count` strands; strand k draws from mix_seed(seed, k) so the result does
// not depend on evaluation order.
std::vector<Strand> grow_region(const HeadMesh& mesh, const PaintSelection& sel,
                                const GrowthParams& params, int count, std::uint64_t seed);

// Number of strands implied by the selection's density and painted area.
int strand_count_for(const HeadMesh& mesh, const PaintSelection& sel);

struct SweepGrid {
  std::vector<double> p_helix_radius_values;
  std::vector<double> p_gravity_values;
  // cells[h][g] grown with p_helix_radius_values[h], p_gravity_values[g]
  std::vector<std::vector<Strand>> cells;
};

SweepGrid sweep_grid(const Vec3& root, const Vec3& dir0, const GrowthParams& base,
                     const std::vector<double>& p_helix_radius_values,
                     const std::vector<double>& p_gravity_values);

}  // namespace hairforge::growth

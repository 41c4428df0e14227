#include "hairforge/growth.hpp"

#include <numeric>
#include <sstream>

namespace hairforge::growth {

void validate(const GrowthParams& p) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (!(p.p_gamma_cap >= 0.0 && p.p_gamma_cap <= 1.0)) fail("p_gamma_cap must lie in [0,1]");
  if (p.steps < 0) fail("steps must be >= 0");
  if (!(p.segment_scale > 0.0)) fail("segment_scale must be > 0");
  if (!(p.perturbation_scale >= 0.0)) fail("perturbation_scale must be >= 0");
  for (double v : {p.p_gravity, p.p_spiral, p.p_helix_radius, p.p_freq, p.segment_scale}) {
    if (!std::isfinite(v)) fail("growth parameters must be finite");
  }
}

namespace {

void check_inputs(const Vec3& root, const Vec3& dir0, const GrowthParams& params) {
  if (!root.allFinite() || !dir0.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, "root and initial direction must be finite");
  }
  if (dir0.isZero(0.0)) throw Error(ErrorCode::InvalidArgument, "initial direction is zero");
  validate(params);
}

}  // namespace

Strand grow_strand(const Vec3& root, const Vec3& dir0, const GrowthParams& params) {
  check_inputs(root, dir0, params);
  Strand s;
  s.vertices.reserve(static_cast<std::size_t>(params.steps) + 1);
  grow_into<double>(root, dir0, params, [&](const Vec3& v) { s.vertices.push_back(v); });
  return s;
}

std::vector<GrowthCursor<double>> trace_strand(const Vec3& root, const Vec3& dir0,
                                               const GrowthParams& params) {
  check_inputs(root, dir0, params);
  std::vector<GrowthCursor<double>> trace;
  trace.reserve(static_cast<std::size_t>(params.steps) + 1);
  grow_into<double>(root, dir0, params, [](const Vec3&) {}, &trace);
  return trace;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace detail {

std::vector<double> cumulative_areas(const HeadMesh& mesh, const PaintSelection& sel) {
  const auto problems = validate_selection(mesh, sel);
  if (!problems.empty()) throw Error(ErrorCode::InvalidArgument, problems.front());
  std::vector<double> cdf;
  cdf.reserve(sel.triangle_ids.size());
  double total = 0.0;
  for (int t : sel.triangle_ids) {
    total += mesh.triangle_area(t);
    cdf.push_back(total);
  }
  return cdf;
}

RootSample sample_root_impl(const HeadMesh& mesh, const PaintSelection& sel,
                            const std::vector<double>& cdf, double u_tri, double u1, double u2,
                            const Vec3& jitter_unit, double perturbation_scale) {
  const double total = cdf.back();
  std::size_t pick = 0;
  if (total > 0.0) {
    pick = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u_tri * total) - cdf.begin());
    pick = std::min(pick, cdf.size() - 1);
  } else {
    pick = std::min(static_cast<std::size_t>(u_tri * static_cast<double>(cdf.size())), cdf.size() - 1);
  }
  const int tri_id = sel.triangle_ids[pick];
  const auto& tri = mesh.triangles[static_cast<std::size_t>(tri_id)];

  const double s = std::sqrt(u1);
  const double b0 = 1.0 - s;
  const double b1 = s * (1.0 - u2);
  const double b2 = s * u2;

  RootSample out;
  out.triangle_id = tri_id;
  const auto& vs = mesh.vertices;
  const auto& ns = mesh.vertex_normals;
  const auto i0 = static_cast<std::size_t>(tri[0]);
  const auto i1 = static_cast<std::size_t>(tri[1]);
  const auto i2 = static_cast<std::size_t>(tri[2]);
  out.root = b0 * vs[i0] + b1 * vs[i1] + b2 * vs[i2];
  out.perturbation = perturbation_scale * jitter_unit;
  out.dir0 = b0 * ns[i0] + b1 * ns[i1] + b2 * ns[i2] + out.perturbation;
  return out;
}

}  // namespace detail

RootSample sample_root(const HeadMesh& mesh, const PaintSelection& sel, std::uint64_t seed,
                       double perturbation_scale) {
  return sample_root(mesh, sel, SeededUniform(seed), perturbation_scale);
}

std::vector<Strand> grow_region(const HeadMesh& mesh, const PaintSelection& sel,
                                const GrowthParams& params, int count, std::uint64_t seed) {
  if (count < 0) throw Error(ErrorCode::InvalidArgument, "count must be >= 0");
  validate(params);
  std::vector<Strand> strands;
  if (count == 0) return strands;
  if (sel.triangle_ids.empty()) throw Error(ErrorCode::EmptySelection, "paint selection has no triangles");
  strands.resize(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(static)
  for (int k = 0; k < count; ++k) {
    SeededUniform rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
    const RootSample r = sample_root(mesh, sel, rng, params.perturbation_scale);
    auto& s = strands[static_cast<std::size_t>(k)];
    s.vertices.reserve(static_cast<std::size_t>(params.steps) + 1);
    grow_into<double>(r.root, r.dir0, params, [&](const Vec3& v) { s.vertices.push_back(v); });
  }
  return strands;
}

int strand_count_for(const HeadMesh& mesh, const PaintSelection& sel) {
  double area = 0.0;
  for (int t : sel.triangle_ids) area += mesh.triangle_area(t);
  return static_cast<int>(std::lround(area * sel.density));
}

SweepGrid sweep_grid(const Vec3& root, const Vec3& dir0, const GrowthParams& base,
                     const std::vector<double>& p_helix_radius_values,
                     const std::vector<double>& p_gravity_values) {
  if (p_helix_radius_values.empty() || p_gravity_values.empty()) {
    throw Error(ErrorCode::InvalidArgument, "sweep value lists must be non-empty");
  }
  SweepGrid grid{p_helix_radius_values, p_gravity_values, {}};
  grid.cells.resize(p_helix_radius_values.size());
  for (std::size_t h = 0; h < p_helix_radius_values.size(); ++h) {
    for (double g : p_gravity_values) {
      GrowthParams p = base;
      p.p_helix_radius = p_helix_radius_values[h];
      p.p_gravity = g;
      grid.cells[h].push_back(grow_strand(root, dir0, p));
    }
  }
  return grid;
}

}  // namespace hairforge::growth

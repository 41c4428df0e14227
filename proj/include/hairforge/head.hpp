#pragma once

#include "hairforge/model.hpp"

namespace hairforge {

struct HeadShape {
  Vec3 semi_axes{7.5, 9.0, 8.8};  // cm; scalp top at y = +9
  int rings = 24;                  // latitude bands
  int segments = 48;               // longitude slices
  int proxy_count = 32;
};

// Watertight ellipsoidal head (2 * segments * (rings - 1) triangles) with
// analytic unit normals and fitted collision proxies.
HeadMesh make_head_mesh(const HeadShape& shape = {});

// One central sphere plus count-1 surface-hugging spheres placed at
// farthest-point-sampled vertices, each shrunk until it touches the nearest
// mesh vertex.
std::vector<Sphere> fit_collision_proxies(const HeadMesh& mesh, int count);

// Triangles whose centroid satisfies the predicate.
template <typename Pred>
PaintSelection select_triangles(const HeadMesh& mesh, Pred&& pred, double density = 1.0) {
  PaintSelection sel;
  sel.density = density;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec3 c = (mesh.vertices[static_cast<std::size_t>(tri[0])] +
                    mesh.vertices[static_cast<std::size_t>(tri[1])] +
                    mesh.vertices[static_cast<std::size_t>(tri[2])]) / 3.0;
    if (pred(c)) sel.triangle_ids.push_back(static_cast<int>(t));
  }
  return sel;
}

PaintSelection scalp_selection(const HeadMesh& mesh);
PaintSelection beard_selection(const HeadMesh& mesh);
PaintSelection mustache_selection(const HeadMesh& mesh);

}  // namespace hairforge

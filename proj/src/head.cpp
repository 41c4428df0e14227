#include "hairforge/head.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace hairforge {

HeadMesh make_head_mesh(const HeadShape& shape) {
  HeadMesh mesh;
  const Vec3& a = shape.semi_axes;
  const double pi = std::numbers::pi;

  // poles + (rings-1) latitude rows of `segments` vertices
  auto add = [&](double theta, double phi) {
    const Vec3 unit(std::sin(theta) * std::cos(phi), std::cos(theta), std::sin(theta) * std::sin(phi));
    mesh.vertices.push_back(a.cwiseProduct(unit));
    mesh.vertex_normals.push_back(unit.cwiseQuotient(a).normalized());
  };
  add(0.0, 0.0);
  for (int r = 1; r < shape.rings; ++r) {
    const double theta = pi * r / shape.rings;
    for (int s = 0; s < shape.segments; ++s) add(theta, 2.0 * pi * s / shape.segments);
  }
  add(pi, 0.0);

  const int south = static_cast<int>(mesh.vertices.size()) - 1;
  auto row = [&](int r, int s) { return 1 + (r - 1) * shape.segments + (s % shape.segments); };
  for (int s = 0; s < shape.segments; ++s) mesh.triangles.push_back({0, row(1, s + 1), row(1, s)});
  for (int r = 1; r < shape.rings - 1; ++r) {
    for (int s = 0; s < shape.segments; ++s) {
      const int p = row(r, s), q = row(r, s + 1), u = row(r + 1, s), v = row(r + 1, s + 1);
      mesh.triangles.push_back({p, q, v});
      mesh.triangles.push_back({p, v, u});
    }
  }
  for (int s = 0; s < shape.segments; ++s) {
    mesh.triangles.push_back({south, row(shape.rings - 1, s), row(shape.rings - 1, s + 1)});
  }
  mesh.collision_proxies = fit_collision_proxies(mesh, shape.proxy_count);
  return mesh;
}

std::vector<Sphere> fit_collision_proxies(const HeadMesh& mesh, int count) {
  std::vector<Sphere> proxies;
  if (mesh.vertices.empty() || count <= 0) return proxies;

  const Vec3 center = mesh.bounds().center();
  auto nearest_vertex = [&](const Vec3& p) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& v : mesh.vertices) best = std::min(best, (v - p).norm());
    return best;
  };
  proxies.push_back({center, nearest_vertex(center)});

  const double depth = 0.5 * mesh.bounds().sizes().minCoeff() * 0.5;
  std::vector<double> dist(mesh.vertices.size(), std::numeric_limits<double>::infinity());
  std::size_t next = 0;
  for (int k = 1; k < count; ++k) {
    const Vec3& p = mesh.vertices[next];
    const Vec3 c = p - depth * mesh.vertex_normals[next];
    proxies.push_back({c, nearest_vertex(c)});
    double far = -1.0;
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      dist[i] = std::min(dist[i], (mesh.vertices[i] - p).norm());
      if (dist[i] > far) {
        far = dist[i];
        next = i;
      }
    }
  }
  return proxies;
}

PaintSelection scalp_selection(const HeadMesh& mesh) {
  // crown, sides above the ears, and the back of the head
  return select_triangles(mesh, [](const Vec3& c) {
    return c.y() > 2.5 || (c.z() < -2.0 && c.y() > -3.0);
  });
}

PaintSelection beard_selection(const HeadMesh& mesh) {
  return select_triangles(mesh, [](const Vec3& c) {
    return c.z() > 3.0 && c.y() < -3.5 && c.y() > -8.0;
  });
}

PaintSelection mustache_selection(const HeadMesh& mesh) {
  return select_triangles(mesh, [](const Vec3& c) {
    return c.z() > 6.5 && c.y() < -2.0 && c.y() > -3.6 && std::abs(c.x()) < 3.0;
  });
}

}  // namespace hairforge

#include "hairforge/model.hpp"

#include <cmath>
#include <sstream>

namespace hairforge {

std::size_t Hairstyle::vertex_count() const {
  std::size_t n = 0;
  for (const auto& s : strands) n += s.size();
  return n;
}

double HeadMesh::triangle_area(int t) const {
  const auto& tri = triangles[static_cast<std::size_t>(t)];
  const Vec3& a = vertices[static_cast<std::size_t>(tri[0])];
  const Vec3& b = vertices[static_cast<std::size_t>(tri[1])];
  const Vec3& c = vertices[static_cast<std::size_t>(tri[2])];
  return 0.5 * (b - a).cross(c - a).norm();
}

Eigen::AlignedBox3d HeadMesh::bounds() const {
  Eigen::AlignedBox3d box;
  for (const auto& v : vertices) box.extend(v);
  return box;
}

std::vector<Violation> validate_hairstyle(const Hairstyle& h) {
  std::vector<Violation> out;
  if (h.strands.empty()) {
    out.push_back({std::nullopt, "nonempty", "hairstyle has no strands"});
  }
  if (h.id.empty()) {
    out.push_back({std::nullopt, "id", "hairstyle id is empty"});
  }
  for (std::size_t s = 0; s < h.strands.size(); ++s) {
    const auto& strand = h.strands[s];
    if (strand.vertices.size() < 2) {
      out.push_back({s, "min_vertices", "strand needs at least 2 vertices to be simulated"});
      if (strand.vertices.empty()) continue;
    }
    for (std::size_t i = 0; i < strand.vertices.size(); ++i) {
      if (!all_finite(strand.vertices[i])) {
        std::ostringstream msg;
        msg << "vertex " << i << " is not finite";
        out.push_back({s, "finite", msg.str()});
        break;
      }
    }
  }
  return out;
}

std::vector<std::string> validate_head(const HeadMesh& mesh) {
  std::vector<std::string> out;
  const auto nv = static_cast<int>(mesh.vertices.size());
  if (mesh.vertex_normals.size() != mesh.vertices.size()) {
    out.push_back("normal count differs from vertex count");
  }
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    for (int idx : mesh.triangles[t]) {
      if (idx < 0 || idx >= nv) {
        out.push_back("triangle " + std::to_string(t) + " index out of range");
        break;
      }
    }
  }
  for (std::size_t i = 0; i < mesh.vertex_normals.size(); ++i) {
    if (std::abs(mesh.vertex_normals[i].norm() - 1.0) > 1e-5) {
      out.push_back("normal " + std::to_string(i) + " not unit length");
      break;
    }
  }
  if (!mesh.vertices.empty()) {
    Eigen::AlignedBox3d box = mesh.bounds();
    const Vec3 pad = 0.05 * box.sizes();  // 10% total inflation
    box.min() -= pad;
    box.max() += pad;
    for (std::size_t i = 0; i < mesh.collision_proxies.size(); ++i) {
      const auto& p = mesh.collision_proxies[i];
      const Vec3 r = Vec3::Constant(p.radius);
      if (!box.contains(p.center - r) || !box.contains(p.center + r)) {
        out.push_back("proxy " + std::to_string(i) + " outside inflated bounds");
      }
    }
  }
  return out;
}

std::vector<std::string> validate_selection(const HeadMesh& mesh, const PaintSelection& sel) {
  std::vector<std::string> out;
  const auto nt = static_cast<int>(mesh.triangles.size());
  for (int id : sel.triangle_ids) {
    if (id < 0 || id >= nt) out.push_back("triangle id " + std::to_string(id) + " out of range");
  }
  if (!(sel.density > 0.0)) out.push_back("density must be positive");
  return out;
}

std::size_t word_count(const std::string& text) {
  std::istringstream in(text);
  std::size_t n = 0;
  std::string w;
  while (in >> w) ++n;
  return n;
}

}  // namespace hairforge

#pragma once

// Core value types shared across the engine. Units are centimeters, Y-up,
// head centered at the origin with the scalp top near y = +9.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace hairforge {

using Vec3 = Eigen::Vector3d;
using Vec3f = Eigen::Vector3f;

struct Strand {
  std::vector<Vec3> vertices;  // vertices[0] is the root

  std::size_t size() const { return vertices.size(); }
  const Vec3& root() const { return vertices.front(); }
};

enum class StyleSource { database, groomed, procedural };

struct Hairstyle {
  std::string id;
  std::vector<Strand> strands;
  std::string caption;
  StyleSource source = StyleSource::database;

  std::size_t vertex_count() const;
};

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

struct HeadMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Vec3> vertex_normals;
  std::vector<Sphere> collision_proxies;

  double triangle_area(int t) const;
  Eigen::AlignedBox3d bounds() const;
};

struct PaintSelection {
  std::vector<int> triangle_ids;
  double density = 1.0;  // strands per cm^2
};

struct RenderAttributes {
  std::string gender;
  std::string hair_color;
  std::string head_pose;
  std::string misc;
};

struct Violation {
  std::optional<std::size_t> strand;  // unset for style-level rules
  std::string rule;                    // "nonempty", "finite", "min_vertices", "id"
  std::string detail;
};

// Empty iff every Hairstyle invariant holds. Never throws.
std::vector<Violation> validate_hairstyle(const Hairstyle& h);

std::vector<std::string> validate_head(const HeadMesh& mesh);
std::vector<std::string> validate_selection(const HeadMesh& mesh, const PaintSelection& sel);

// Conventional caption limit; longer captions are accepted with a warning.
inline constexpr std::size_t kCaptionWordLimit = 60;
std::size_t word_count(const std::string& text);

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace hairforge

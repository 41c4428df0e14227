#include "hairforge/fixtures.hpp"

#include "hairforge/assets.hpp"
#include "hairforge/growth.hpp"
#include "hairforge/head.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

namespace hairforge::fixtures {

const std::vector<StyleRecipe>& database_recipes() {
  // clang-format off
  static const std::vector<StyleRecipe> recipes = {
    {"short_bob", "short bob, straight type 1 hair, chin length with blunt ends", 1600, 16, 11.0, 0.5, 0.0, 4.0, 0.05, 101},
    {"long_straight", "long straight hair, type 1, sleek and glossy, falls past the shoulders", 1400, 24, 30.0, 0.5, 0.0, 4.0, 0.10, 102},
    {"pixie", "pixie cut, cropped sides and textured top, straight type 1", 1200, 16, 5.0, 1.2, 0.0, 4.0, 0.20, 103},
    {"medium_wavy", "medium wavy hair, type 2A loose waves at shoulder length", 1500, 20, 18.0, 0.5, 0.6, 9.0, 0.10, 104},
    {"beach_waves", "tousled beach waves, type 2B S-shaped texture, shoulder length", 1400, 20, 20.0, 0.5, 0.9, 7.0, 0.15, 105},
    {"deep_waves", "long deep waves, type 2C, voluminous and defined", 1300, 24, 26.0, 0.5, 1.1, 6.0, 0.10, 106},
    {"long_curly", "long curly hair, type 3A loose spiral curls", 1300, 28, 28.0, 0.6, 1.4, 5.0, 0.10, 107},
    {"springy_ringlets", "springy ringlets, type 3B bouncy curls, medium length", 1200, 24, 16.0, 0.7, 1.1, 3.5, 0.15, 108},
    {"corkscrew", "tight corkscrew curls, type 3C, dense and short", 1200, 24, 10.0, 0.9, 0.7, 2.0, 0.15, 109},
    {"soft_coils", "soft coily afro, type 4A coils with defined spirals", 1100, 24, 8.0, 1.4, 0.5, 1.4, 0.15, 110},
    {"zigzag_coils", "voluminous afro with type 4B zigzag coils", 1100, 24, 9.0, 1.6, 0.45, 1.1, 0.15, 111},
    {"dense_coils", "tightly coiled type 4C hair, very dense, cropped", 1100, 20, 6.0, 1.8, 0.35, 0.9, 0.15, 112},
  };
  // clang-format on
  return recipes;
}

std::shared_ptr<const HeadMesh> default_head() {
  static const auto head = std::make_shared<const HeadMesh>(make_head_mesh());
  return head;
}

void push_out_of_proxies(Strand& strand, const HeadMesh& head, double margin) {
  for (std::size_t i = 1; i < strand.vertices.size(); ++i) {
    Vec3& v = strand.vertices[i];
    // a few sweeps; moving out of one sphere can enter its neighbour
    for (int sweep = 0; sweep < 4; ++sweep) {
      bool moved = false;
      for (const auto& p : head.collision_proxies) {
        const Vec3 d = v - p.center;
        const double r = p.radius + margin;
        const double len = d.norm();
        if (len >= r) continue;
        v = p.center + r * (len > 1e-9 ? Vec3(d / len) : Vec3::UnitY());
        moved = true;
      }
      if (!moved) break;
    }
  }
}

namespace {

constexpr double kFixtureMargin = 0.3;

Strand grow_fixture_strand(const StyleRecipe& r, const HeadMesh& head, const PaintSelection& scalp,
                           std::uint64_t seed) {
  growth::SeededUniform rng(seed);
  const auto sample = growth::sample_root(head, scalp, rng, 0.0);
  const Vec3 normal = sample.dir0.normalized();
  const double length = r.length * (1.0 + r.length_jitter * (2.0 * rng() - 1.0));
  const int nv = std::max(r.vertices, 2);
  const double seg = length / (nv - 1);
  const double fall = seg / (std::max(r.lift, 0.05) * 3.0);

  Strand centre;
  centre.vertices.push_back(sample.root);
  Vec3 d = normal;
  for (int i = 1; i < nv; ++i) {
    d = (d + fall * Vec3(0.0, -1.0, 0.0)).normalized();
    Vec3 p = centre.vertices.back() + seg * d;
    Strand probe{{centre.vertices.back(), p}};
    push_out_of_proxies(probe, head, kFixtureMargin);
    p = probe.vertices[1];
    d = (p - centre.vertices.back()).normalized();
    centre.vertices.push_back(p);
  }
  if (r.curl_radius <= 0.0) return centre;

  const double phase0 = 2.0 * std::numbers::pi * rng();
  Strand curled;
  curled.vertices.push_back(centre.vertices.front());
  for (int i = 1; i < nv; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    const Vec3 t = (centre.vertices[iu] - centre.vertices[iu - 1]).normalized();
    const Vec3 ref = std::abs(t.y()) < 0.9 ? Vec3::UnitY() : Vec3::UnitX();
    const Vec3 a = t.cross(ref).normalized();
    const Vec3 b = t.cross(a);
    const double s = seg * i;
    const double phi = 2.0 * std::numbers::pi * s / r.curl_period + phase0;
    const double radius = r.curl_radius * std::min(1.0, s / 2.0);
    curled.vertices.push_back(centre.vertices[iu] + radius * (std::cos(phi) * a + std::sin(phi) * b));
  }
  push_out_of_proxies(curled, head, kFixtureMargin);
  return curled;
}

}  // namespace

Hairstyle make_style(const StyleRecipe& recipe, const HeadMesh& head) {
  const PaintSelection scalp = scalp_selection(head);
  Hairstyle h;
  h.id = recipe.id;
  h.caption = recipe.caption;
  h.source = StyleSource::database;
  h.strands.resize(static_cast<std::size_t>(recipe.strands));
  for (int k = 0; k < recipe.strands; ++k) {
    h.strands[static_cast<std::size_t>(k)] =
        grow_fixture_strand(recipe, head, scalp, growth::mix_seed(recipe.seed, static_cast<std::uint64_t>(k)));
  }
  // float32-representable so the .hair round trip is exact
  for (auto& s : h.strands) {
    for (auto& v : s.vertices) v = v.cast<float>().cast<double>();
  }
  return h;
}

Hairstyle make_bench_style(int strands, int vertices, const HeadMesh& head, std::uint64_t seed) {
  StyleRecipe r;
  r.id = "bench_" + std::to_string(strands) + "x" + std::to_string(vertices);
  r.caption = "benchmark straight strands";
  r.strands = strands;
  r.vertices = vertices;
  r.length = 14.0;
  r.seed = seed;
  return make_style(r, head);
}

Hairstyle make_pendulum() {
  Hairstyle h;
  h.id = "pendulum";
  h.caption = "two-particle pendulum";
  h.source = StyleSource::procedural;
  h.strands.push_back(Strand{{Vec3(0.0, 0.0, 0.0), Vec3(0.0, -1.0, 0.0)}});
  return h;
}

std::vector<std::string> write_database(const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto head = default_head();
  std::vector<std::string> ids;
  for (const auto& r : database_recipes()) {
    const Hairstyle h = make_style(r, *head);
    const std::filesystem::path base = std::filesystem::path(dir) / r.id;
    assets::write_hairstyle(h, base.string() + ".hair");
    assets::write_sidecar(h, base.string() + ".json");
    ids.push_back(r.id);
  }
  return ids;
}

}  // namespace hairforge::fixtures

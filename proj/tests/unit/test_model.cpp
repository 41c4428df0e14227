#include "doctest.h"

#include "hairforge/fixtures.hpp"
#include "hairforge/head.hpp"
#include "hairforge/model.hpp"

#include <limits>

using namespace hairforge;

namespace {

Hairstyle two_strands() {
  Hairstyle h;
  h.id = "pair";
  h.strands.push_back({{Vec3(0, 9, 0), Vec3(0, 10, 0), Vec3(0, 11, 0)}});
  h.strands.push_back({{Vec3(1, 9, 0), Vec3(1, 10, 0)}});
  return h;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("well-formed style has no violations") {
    CHECK(validate_hairstyle(two_strands()).empty());
  }

  TEST_CASE("non-finite coordinate is reported with its strand") {
    auto h = two_strands();
    h.strands[1].vertices[1].y() = std::numeric_limits<double>::quiet_NaN();
    const auto v = validate_hairstyle(h);
    REQUIRE(v.size() == 1);
    CHECK(v[0].strand == std::size_t{1});
    CHECK(v[0].rule == "finite");
  }

  TEST_CASE("empty style violates nonempty") {
    Hairstyle h;
    h.id = "empty";
    const auto v = validate_hairstyle(h);
    REQUIRE(v.size() == 1);
    CHECK_FALSE(v[0].strand.has_value());
    CHECK(v[0].rule == "nonempty");
  }

  TEST_CASE("single-vertex strand is not simulatable") {
    auto h = two_strands();
    h.strands[0].vertices.resize(1);
    const auto v = validate_hairstyle(h);
    REQUIRE(v.size() == 1);
    CHECK(v[0].rule == "min_vertices");
    CHECK(v[0].strand == std::size_t{0});
  }

  TEST_CASE("validation is pure") {
    auto h = two_strands();
    h.strands[0].vertices[2].x() = std::numeric_limits<double>::infinity();
    const auto a = validate_hairstyle(h);
    const auto b = validate_hairstyle(h);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].rule == b[i].rule);
      CHECK(a[i].strand == b[i].strand);
    }
  }

  TEST_CASE("default head mesh satisfies its invariants") {
    const auto head = fixtures::default_head();
    CHECK(validate_head(*head).empty());
    CHECK(head->triangles.size() >= 1000);
    const auto box = head->bounds();
    CHECK(box.max().y() == doctest::Approx(9.0).epsilon(0.01));
  }

  TEST_CASE("head validation catches bad indices and normals") {
    HeadMesh mesh = *fixtures::default_head();
    mesh.triangles[0][1] = static_cast<int>(mesh.vertices.size());
    mesh.vertex_normals[3] *= 2.0;
    CHECK(validate_head(mesh).size() >= 2);
  }

  TEST_CASE("paint selection validation") {
    const auto head = fixtures::default_head();
    PaintSelection sel = scalp_selection(*head);
    CHECK(validate_selection(*head, sel).empty());
    sel.triangle_ids.push_back(-1);
    sel.density = 0.0;
    CHECK(validate_selection(*head, sel).size() >= 2);
  }

  TEST_CASE("region selections are disjoint and non-empty") {
    const auto head = fixtures::default_head();
    const auto scalp = scalp_selection(*head);
    const auto beard = beard_selection(*head);
    const auto mustache = mustache_selection(*head);
    CHECK_FALSE(scalp.triangle_ids.empty());
    CHECK_FALSE(beard.triangle_ids.empty());
    CHECK_FALSE(mustache.triangle_ids.empty());
    for (int t : mustache.triangle_ids) {
      CHECK(std::find(scalp.triangle_ids.begin(), scalp.triangle_ids.end(), t) == scalp.triangle_ids.end());
    }
  }

  TEST_CASE("word count") {
    CHECK(word_count("") == 0);
    CHECK(word_count("  long   curly hair ") == 3);
  }

  TEST_CASE("fixture database captions and sizes") {
    const auto& recipes = fixtures::database_recipes();
    CHECK(recipes.size() >= 10);
    for (const auto& r : recipes) {
      CHECK(word_count(r.caption) <= kCaptionWordLimit);
      CHECK(r.strands >= 1000);
      CHECK(r.strands <= 4000);
    }
  }
}

#include "doctest.h"

#include "hairforge/fixtures.hpp"
#include "hairforge/growth.hpp"
#include "hairforge/head.hpp"
#include "support.hpp"

#include "json.hpp"

#include <fstream>
#include <limits>

using namespace hairforge;
using namespace hairforge::growth;

namespace {

GrowthParams params_from(const nlohmann::json& p) {
  GrowthParams g;
  g.p_gamma_cap = p["p_gamma_cap"].get<double>();
  g.p_gravity = p["p_gravity"].get<double>();
  g.p_spiral = p["p_spiral"].get<double>();
  g.p_helix_radius = p["p_helix_radius"].get<double>();
  g.p_freq = p["p_freq"].get<double>();
  g.steps = p["steps"].get<int>();
  g.segment_scale = p["segment_scale"].get<double>();
  return g;
}

Vec3 vec(const nlohmann::json& a) { return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()}; }

}  // namespace

TEST_SUITE("growth") {
  TEST_CASE("T steps give T+1 vertices starting at the root") {
    GrowthParams p;
    p.steps = 16;
    const auto s = grow_strand(Vec3(1, 2, 3), Vec3(0, 1, 0), p);
    CHECK(s.size() == 17);
    CHECK(s.root() == Vec3(1, 2, 3));
  }

  TEST_CASE("zero steps give the root alone") {
    GrowthParams p;
    p.steps = 0;
    const auto s = grow_strand(Vec3(0, 9, 0), Vec3(0, 1, 0), p);
    REQUIRE(s.size() == 1);
    CHECK(s.root() == Vec3(0, 9, 0));
  }

  TEST_CASE("no gravity and no spiral grow a straight strand") {
    GrowthParams p;
    p.p_gravity = 0.0;
    p.p_spiral = 0.0;
    p.steps = 20;
    const Vec3 dir(0.3, 0.8, -0.2);
    const auto s = grow_strand(Vec3::Zero(), dir, p);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const Vec3 expected = static_cast<double>(i) * dir;
      CHECK((s.vertices[i] - expected).norm() < 1e-12);
    }
  }

  TEST_CASE("matches the scripted reference on the 16-step example") {
    std::ifstream in(hftest::data_path("growth_oracle.json"));
    const auto doc = nlohmann::json::parse(in);
    const auto& c = doc["example_t16"];
    const auto s = grow_strand(vec(c["root"]), vec(c["dir0"]), params_from(c["params"]));
    REQUIRE(s.size() == c["vertices"].size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const Vec3 ref = vec(c["vertices"][i]);
      CHECK((s.vertices[i] - ref).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  TEST_CASE("trace recomputes gravity and helix terms exactly") {
    GrowthParams p;
    p.p_gravity = 0.07;
    p.p_helix_radius = 0.8;
    p.p_freq = 1.3;
    p.steps = 12;
    const auto trace = trace_strand(Vec3::Zero(), Vec3(0, 0, 1), p);
    REQUIRE(trace.size() == 13);
    for (std::size_t i = 1; i < trace.size(); ++i) {
      const int step = static_cast<int>(i);
      CHECK(trace[i].step == step);
      CHECK(trace[i].grav == gravity_at<double>(step, p.p_gravity));
      CHECK(trace[i].helix == helix_at<double>(step, p.p_helix_radius, p.p_freq));
    }
  }

  TEST_CASE("single precision instantiation tracks double precision") {
    GrowthParams p;
    p.steps = 16;
    std::vector<Eigen::Vector3f> fv;
    grow_into<float>(Eigen::Vector3f(0, 9, 0), Eigen::Vector3f(0, 1, 0), p,
                     [&](const Eigen::Vector3f& v) { fv.push_back(v); });
    const auto dv = grow_strand(Vec3(0, 9, 0), Vec3(0, 1, 0), p);
    REQUIRE(fv.size() == dv.size());
    for (std::size_t i = 0; i < fv.size(); ++i) CHECK((fv[i].cast<double>() - dv.vertices[i]).norm() < 1e-3);
  }

  TEST_CASE("bad input is rejected") {
    GrowthParams p;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(grow_strand(Vec3(nan, 0, 0), Vec3(0, 1, 0), p), Error);
    try {
      grow_strand(Vec3(nan, 0, 0), Vec3(0, 1, 0), p);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonFiniteInput);
    }
    try {
      grow_strand(Vec3::Zero(), Vec3::Zero(), p);
      FAIL("zero direction accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidArgument);
    }
    p.p_gamma_cap = 1.5;
    CHECK_THROWS_AS(validate(p), Error);
    p = {};
    p.steps = -1;
    CHECK_THROWS_AS(validate(p), Error);
  }

  TEST_CASE("root sampling lands on the selected triangle") {
    const auto head = fixtures::default_head();
    const auto sel = scalp_selection(*head);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto r = sample_root(*head, sel, seed, 0.0);
      CHECK(std::find(sel.triangle_ids.begin(), sel.triangle_ids.end(), r.triangle_id) != sel.triangle_ids.end());
      const auto& tri = head->triangles[static_cast<std::size_t>(r.triangle_id)];
      const Vec3 a = head->vertices[static_cast<std::size_t>(tri[0])];
      const Vec3 b = head->vertices[static_cast<std::size_t>(tri[1])];
      const Vec3 c = head->vertices[static_cast<std::size_t>(tri[2])];
      const Vec3 n = (b - a).cross(c - a).normalized();
      CHECK(std::abs((r.root - a).dot(n)) < 1e-9);
      CHECK(r.dir0.norm() == doctest::Approx(1.0).epsilon(0.05));
    }
  }

  TEST_CASE("sampling is deterministic and the perturbation is scaled") {
    const auto head = fixtures::default_head();
    const auto sel = beard_selection(*head);
    const auto a = sample_root(*head, sel, 42, 0.1);
    const auto b = sample_root(*head, sel, 42, 0.1);
    CHECK(a.root == b.root);
    CHECK(a.dir0 == b.dir0);
    CHECK(a.perturbation.cwiseAbs().maxCoeff() <= 0.1);
    const auto c = sample_root(*head, sel, 42, 0.0);
    CHECK(c.perturbation.isZero(0.0));
  }

  TEST_CASE("empty selection is an error") {
    const auto head = fixtures::default_head();
    try {
      sample_root(*head, PaintSelection{}, 1, 0.1);
      FAIL("empty selection accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptySelection);
    }
  }

  TEST_CASE("region growth is deterministic per strand") {
    const auto head = fixtures::default_head();
    const auto sel = mustache_selection(*head);
    GrowthParams p;
    p.steps = 6;
    const auto all = grow_region(*head, sel, p, 20, 9);
    const auto again = grow_region(*head, sel, p, 20, 9);
    REQUIRE(all.size() == 20);
    for (std::size_t k = 0; k < all.size(); ++k) {
      CHECK(all[k].vertices == again[k].vertices);
      const auto r = sample_root(*head, sel, SeededUniform(mix_seed(9, k)), p.perturbation_scale);
      CHECK(all[k].vertices == grow_strand(r.root, r.dir0, p).vertices);
    }
    const auto other = grow_region(*head, sel, p, 20, 10);
    CHECK(other[0].vertices != all[0].vertices);
  }

  TEST_CASE("density sets the strand count") {
    const auto head = fixtures::default_head();
    auto sel = scalp_selection(*head);
    sel.density = 2.0;
    const int two = strand_count_for(*head, sel);
    sel.density = 1.0;
    const int one = strand_count_for(*head, sel);
    CHECK(one > 0);
    CHECK(std::abs(two - 2 * one) <= 1);
  }

  TEST_CASE("sweep grid has one strand per parameter pair") {
    GrowthParams p;
    const auto grid = sweep_grid(Vec3::Zero(), Vec3(0, 0, 1), p, {0.2, 0.5, 1.0}, {0.0, 0.05, 0.1});
    REQUIRE(grid.cells.size() == 3);
    for (std::size_t h = 0; h < 3; ++h) {
      REQUIRE(grid.cells[h].size() == 3);
      for (std::size_t g = 0; g < 3; ++g) {
        GrowthParams q = p;
        q.p_helix_radius = grid.p_helix_radius_values[h];
        q.p_gravity = grid.p_gravity_values[g];
        CHECK(grid.cells[h][g].vertices == grow_strand(Vec3::Zero(), Vec3(0, 0, 1), q).vertices);
      }
    }
    CHECK_THROWS_AS(sweep_grid(Vec3::Zero(), Vec3(0, 0, 1), p, {}, {0.1}), Error);
  }
}

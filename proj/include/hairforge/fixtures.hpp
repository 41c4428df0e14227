#pragma once

// Authored fixture data: a head mesh and a small captioned database whose
// styles span the ten curl types (1, 2A-2C, 3A-3C, 4A-4C).

#include "hairforge/model.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace hairforge::fixtures {

struct StyleRecipe {
  std::string id;
  std::string caption;
  int strands = 1000;
  int vertices = 16;
  double length = 12.0;      // cm
  double lift = 0.6;         // how long the strand follows the scalp normal before falling
  double curl_radius = 0.0;  // cm
  double curl_period = 4.0;  // cm of arc length per turn
  double length_jitter = 0.15;
  std::uint64_t seed = 1;
};

const std::vector<StyleRecipe>& database_recipes();

std::shared_ptr<const HeadMesh> default_head();

Hairstyle make_style(const StyleRecipe& recipe, const HeadMesh& head);

// Straight strands of `vertices` points grown from the scalp and pushed clear
// of the collision proxies; used for benchmarks.
Hairstyle make_bench_style(int strands, int vertices, const HeadMesh& head, std::uint64_t seed = 7);

// Root pinned at the origin, one child 1 cm below.
Hairstyle make_pendulum();

// Moves every vertex outside the proxies (radius + margin).
void push_out_of_proxies(Strand& strand, const HeadMesh& head, double margin);

// Writes <id>.hair + <id>.json for every recipe; returns the ids.
std::vector<std::string> write_database(const std::string& dir);

}  // namespace hairforge::fixtures

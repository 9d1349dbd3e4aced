#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "minesearch/errors.hpp"
#include "minesearch/rng.hpp"
#include "minesearch/world.hpp"
#include "oracles.hpp"

using namespace minesearch;

namespace {

std::string dump(const WorldGeometry& w) {
  std::ostringstream out;
  write_geometry(w, out);
  return out.str();
}

using oracle::march;
using oracle::random_free_point;
using oracle::random_unit;
using oracle::solid_at;

}  // namespace

TEST_CASE("build_world is deterministic per seed") {
  const auto a = dump(build_world(EnvVariant::original(), 7));
  const auto b = dump(build_world(EnvVariant::original(), 7));
  CHECK(a == b);
  CHECK(a != dump(build_world(EnvVariant::original(), 8)));
}

TEST_CASE("complex variant dimensions") {
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const auto w = build_world(EnvVariant::complex(), seed);
    CHECK(w.corridor_width == 15.0);
    CHECK(w.fork_half_angle == 40.0);
    CHECK(w.obstacles.size() == 6);
  }
  // Layout 1 shifts obstacles along x by at most the jitter.
  const auto w = build_world(EnvVariant::complex(), 5);
  for (std::size_t i = 0; i < w.obstacles.size(); ++i)
    CHECK(std::abs(w.obstacles[i].center.x() - (8.0 + 8.0 * i)) <= 2.0);
}

TEST_CASE("target branch is a fair coin") {
  int left = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto w = build_world(EnvVariant::original(), seed);
    if (w.target_branch == Branch::left) ++left;
  }
  CHECK(left >= 4850);
  CHECK(left <= 5150);
}

TEST_CASE("target lies in exactly one branch and outside the straight corridor") {
  for (auto variant : {EnvVariant::original(), EnvVariant::complex()}) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto w = build_world(variant, seed);
      int inside = 0;
      for (const auto& poly : w.branch_polygons) inside += point_in_polygon(poly, w.target_position) ? 1 : 0;
      CHECK(inside == 1);
      CHECK_FALSE(in_straight_corridor(w, w.target_position));
      CHECK(point_in_polygon(w.free_space_polygon, w.target_position));
      CHECK(w.d_cross == doctest::Approx((w.target_position - w.crossroad_center()).norm()));
      // The target sits on the side its branch label says.
      CHECK((w.target_position.y() < 0) == (w.target_branch == Branch::left));
    }
  }
}

TEST_CASE("invalid variants are rejected with the field name") {
  EnvVariant v;
  v.corridor_width = 2.0;
  CHECK_THROWS_WITH_AS(build_world(v, 1), doctest::Contains("corridor_width"), ConfigError);
  v = EnvVariant{};
  v.fork_half_angle = 85.0;
  CHECK_THROWS_WITH_AS(build_world(v, 1), doctest::Contains("fork_half_angle"), ConfigError);
}

TEST_CASE("raycast basic cases") {
  WorldLayout layout;
  layout.obstacle_count = 0;
  const auto w = build_world(EnvVariant::original(), layout, 3);
  const RayHit side = raycast(w, Vec3(20, 0, -3), Vec3(0, 1, 0), 20.0);
  CHECK(side.hit_kind == HitKind::wall);
  CHECK(side.distance == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(side.normalized_distance == doctest::Approx(0.25));

  // Down the first leg of the branch away from the target: nothing within 5 m.
  const double sign = w.target_branch == Branch::left ? 1.0 : -1.0;
  const double phi = w.fork_half_angle * std::numbers::pi / 180.0;
  const Vec3 dir(std::cos(phi), sign * std::sin(phi), 0.0);
  const RayHit none = raycast(w, Vec3(w.x_cross, 0, -3), dir, 5.0);
  CHECK(none.hit_kind == HitKind::none);
  CHECK(none.distance == 5.0);
  CHECK(none.normalized_distance == 1.0);

  // Above the wall tops the horizontal ray escapes.
  CHECK(raycast(w, Vec3(20, 0, -7), Vec3(0, 1, 0), 20.0).hit_kind == HitKind::none);
}

TEST_CASE("raycast rejects bad input") {
  const auto w = build_world(EnvVariant::original(), 1);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(raycast(w, Vec3(nan, 0, 0), Vec3(1, 0, 0), 10), NumericInputError);
  CHECK_THROWS_AS(raycast(w, Vec3(1, 0, 0), Vec3(1, 1e-4, 0), 10), NumericInputError);
  CHECK_THROWS_AS(raycast(w, Vec3(1, 0, 0), Vec3(1, 0, 0), 0.0), NumericInputError);
}

TEST_CASE("raycast matches a point-marching oracle") {
  Rng rng(20240611);
  int checked = 0;
  for (int k = 0; k < 300; ++k) {
    const auto variant = (k % 2 == 0) ? EnvVariant::original() : EnvVariant::complex();
    const auto w = build_world(variant, 1000 + k);
    const Vec2 p = random_free_point(w, rng);
    const Vec3 o(p.x(), p.y(), -rng.uniform(0.1, 7.0));
    if (solid_at(w, o)) continue;
    const Vec3 d = random_unit(rng);
    const double max_range = 20.0;
    const RayHit hit = raycast(w, o, d, max_range);
    const double expect = march(w, o, d, max_range);
    CHECK(std::abs(hit.distance - expect) <= 1e-3 + 1e-9);
    ++checked;
  }
  CHECK(checked > 250);
}

TEST_CASE("target is occluded from the straight corridor") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto w = build_world(EnvVariant::original(), seed);
    Rng rng(seed);
    const double h = w.corridor_width / 2.0;
    for (int i = 0; i < 500; ++i) {
      const Vec3 p(rng.uniform(0.0, w.straight_end), rng.uniform(-h + 0.01, h - 0.01),
                   -rng.uniform(0.0, w.wall_height));
      const Vec3 d = (w.target_center() - p).normalized();
      CHECK(raycast(w, p, d, 1000.0).hit_kind != HitKind::target);
    }
  }
}

TEST_CASE("check_collision basics and sweep") {
  WorldLayout layout;
  layout.obstacle_count = 0;
  const auto w = build_world(EnvVariant::original(), layout, 1);
  CHECK_FALSE(check_collision(w, Vec3(20, 0, -3), 0.3));
  CHECK(check_collision(w, Vec3(20, 5, -3), 0.3));
  CHECK_THROWS_AS(check_collision(w, Vec3(20, 0, -3), 0.0), NumericInputError);

  // Sweep toward the right wall at y = 5 in 1 mm steps.
  int flips = 0;
  bool prev = false;
  double flip_y = 0;
  for (int i = 0; i <= 5000; ++i) {
    const double y = i * 1e-3;
    const bool c = check_collision(w, Vec3(20, y, -3), 0.3);
    if (c != prev) {
      ++flips;
      flip_y = y;
    }
    prev = c;
  }
  CHECK(flips == 1);
  CHECK(5.0 - flip_y <= 0.3 + 1e-12);
  CHECK(5.0 - flip_y > 0.3 - 1e-3);
}

TEST_CASE("obstacles collide below their top only") {
  const auto w = build_world(EnvVariant::original(), 1);
  const Vec2 c = w.obstacles[0].center;
  CHECK(check_collision(w, Vec3(c.x(), c.y(), -1.0), 0.3));
  CHECK_FALSE(check_collision(w, Vec3(c.x(), c.y(), -2.5), 0.3));
  CHECK(check_collision(w, Vec3(c.x(), c.y(), -2.2), 0.3));
}

TEST_CASE("raycast is consistent with collision clearance") {
  Rng rng(5);
  for (int k = 0; k < 200; ++k) {
    const auto w = build_world(EnvVariant::original(), k);
    const Vec2 p = random_free_point(w, rng);
    const Vec3 o(p.x(), p.y(), -rng.uniform(0.5, 5.0));
    const double r = 0.3;
    if (check_collision(w, o, r)) continue;
    const double near = clearance(w, o);
    CHECK(near > r);
    for (int j = 0; j < 10; ++j) {
      const RayHit hit = raycast(w, o, random_unit(rng), 50.0, ray_walls | ray_obstacles);
      CHECK(hit.distance >= near - 1e-6);
    }
  }
}

TEST_CASE("geometry file round trip") {
  const auto w = build_world(EnvVariant::complex(), 11);
  std::istringstream in(dump(w));
  const auto back = read_geometry(in);
  CHECK(dump(back) == dump(w));
  std::istringstream bad("not a geometry\n");
  CHECK_THROWS_AS(read_geometry(bad), IoError);
}

TEST_CASE("no-fork layout puts the target on the axis") {
  WorldLayout layout;
  layout.fork = false;
  layout.corridor_length = 12;
  layout.branch_length = 8;
  layout.target_distance = 6;
  layout.obstacle_count = 2;
  layout.obstacle_first_x = 4;
  layout.obstacle_spacing = 4;
  const auto w = build_world(EnvVariant::original(), layout, 3);
  CHECK(w.target_position.x() == 18.0);
  CHECK(w.target_position.y() == 0.0);
  CHECK(w.target_branch == Branch::straight);
  CHECK(w.d_cross == 6.0);
  CHECK(w.obstacles.size() == 2);
}

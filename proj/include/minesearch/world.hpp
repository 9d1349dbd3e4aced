#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace minesearch {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

// World frame: x runs along the tunnel, y points to the right when looking
// down +x, z points along gravity (altitude is -z). Walls and obstacles are
// vertical prisms that extend indefinitely below ground level.

enum class VariantName { original, complex };

struct EnvVariant {
  VariantName name = VariantName::original;
  double corridor_width = 10.0;        // m
  double fork_half_angle = 30.0;       // deg, heading of each branch's first leg
  int obstacle_layout_id = 0;          // 0: fixed slalom, 1: seeded shifts
  double target_branch_angle = 90.0;   // deg, bend between first and second leg

  static EnvVariant original();
  static EnvVariant complex();
};

// Dimensions that neither variant pins down. Defaults give the original mine.
struct WorldLayout {
  double corridor_length = 60.0;   // x of the crossroad center
  double branch_length = 25.0;     // centerline length of each branch
  double first_leg_length = 10.0;  // branch length before the bend
  double target_distance = 20.0;   // target position along the branch centerline
  double target_radius = 1.0;
  bool fork = true;                // false: the corridor continues straight past x_cross
  int obstacle_count = 6;
  double obstacle_first_x = 8.0;
  double obstacle_spacing = 8.0;
  double obstacle_lateral_offset = 2.5;
  double obstacle_length = 1.0;    // extent along the corridor
  double obstacle_width = 2.0;     // extent across the corridor
  double obstacle_jitter = 2.0;    // max |shift| along x for layout 1
  double wall_height = 6.0;
  double obstacle_height = 2.0;
};

struct Segment {
  Vec2 a;
  Vec2 b;
};

struct Obstacle {
  Vec2 center;
  Vec2 half_extents;   // local x, local y
  double rotation = 0; // rad, local frame -> world
};

enum class Branch { left = -1, straight = 0, right = 1 };

struct WorldGeometry {
  VariantName variant = VariantName::original;
  std::uint64_t seed = 0;

  std::vector<Segment> wall_segments;
  std::vector<Obstacle> obstacles;
  // Boundary of the free space, in wall order (closed implicitly).
  std::vector<Vec2> free_space_polygon;
  // One polygon per branch; the target lies in exactly one of them.
  std::vector<std::vector<Vec2>> branch_polygons;

  double corridor_width = 0;
  double corridor_length = 0;
  double fork_half_angle = 0;   // deg
  double bend_angle = 0;        // deg
  double branch_length = 0;
  double x_cross = 0;
  // The straight corridor region is 0 <= x <= straight_end, |y| <= width/2.
  double straight_end = 0;
  Vec2 target_position = Vec2::Zero();
  double target_radius = 0;
  double target_altitude = 0;   // sphere center height above ground
  double d_cross = 0;
  Branch target_branch = Branch::straight;

  double wall_height = 0;
  double obstacle_height = 0;

  Vec2 crossroad_center() const { return {x_cross, 0.0}; }
  Vec3 target_center() const { return {target_position.x(), target_position.y(), -target_altitude}; }
};

// Validates ranges; throws ConfigError naming the offending field.
void validate(const EnvVariant& variant, const WorldLayout& layout);

WorldGeometry build_world(const EnvVariant& variant, const WorldLayout& layout, std::uint64_t seed);
WorldGeometry build_world(const EnvVariant& variant, std::uint64_t seed);

enum class HitKind { none, wall, obstacle, target };

struct RayHit {
  double distance = 0;
  HitKind hit_kind = HitKind::none;
  double normalized_distance = 1.0;
};

// Which primitives a ray may hit.
enum RayMask : unsigned {
  ray_walls = 1u,
  ray_obstacles = 2u,
  ray_target = 4u,
  ray_all = 7u,
};

RayHit raycast(const WorldGeometry& world, const Vec3& origin, const Vec3& direction,
               double max_range, unsigned mask = ray_all);

bool check_collision(const WorldGeometry& world, const Vec3& center, double body_radius);

// True when the horizontal segment a->b crosses any wall segment.
bool crosses_wall(const WorldGeometry& world, const Vec2& a, const Vec2& b);

// Distance from a 3D point to the nearest wall or obstacle surface.
double clearance(const WorldGeometry& world, const Vec3& point);

// Rectangle corners in world coordinates, counter-clockwise.
std::vector<Vec2> obstacle_corners(const Obstacle& o);

bool point_in_polygon(const std::vector<Vec2>& polygon, const Vec2& p);
bool in_straight_corridor(const WorldGeometry& world, const Vec2& p);

const char* to_string(VariantName name);
VariantName parse_variant_name(const std::string& text);
const char* to_string(HitKind kind);

// Versioned plain-text geometry file, one primitive per line. See
// docs/formats.md.
void write_geometry(const WorldGeometry& world, std::ostream& out);
WorldGeometry read_geometry(std::istream& in);

}  // namespace minesearch

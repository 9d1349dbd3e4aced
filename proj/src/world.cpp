#include "minesearch/world.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "minesearch/errors.hpp"
#include "minesearch/format.hpp"
#include "minesearch/rng.hpp"

namespace minesearch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Intersection of p + t*d and q + u*e; returns nullopt-like flag when parallel.
bool intersect_lines(const Vec2& p, const Vec2& d, const Vec2& q, const Vec2& e, Vec2& out) {
  const double denom = cross2(d, e);
  if (std::abs(denom) < 1e-12) return false;
  const double t = cross2(q - p, e) / denom;
  out = p + t * d;
  return true;
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const Vec2 r = p2 - p1;
  const Vec2 s = q2 - q1;
  const double denom = cross2(r, s);
  if (std::abs(denom) < 1e-15) return false;
  const double t = cross2(q1 - p1, s) / denom;
  const double u = cross2(q1 - p1, r) / denom;
  return t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

Vec2 to_local(const Obstacle& o, const Vec2& p) {
  const double c = std::cos(o.rotation);
  const double s = std::sin(o.rotation);
  const Vec2 q = p - o.center;
  return {c * q.x() + s * q.y(), -s * q.x() + c * q.y()};
}

Vec2 dir_to_local(const Obstacle& o, const Vec2& d) {
  const double c = std::cos(o.rotation);
  const double s = std::sin(o.rotation);
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y()};
}

double point_box_distance(const Obstacle& o, const Vec2& p) {
  const Vec2 q = to_local(o, p);
  const double dx = std::max(std::abs(q.x()) - o.half_extents.x(), 0.0);
  const double dy = std::max(std::abs(q.y()) - o.half_extents.y(), 0.0);
  return std::hypot(dx, dy);
}

void require_finite(const Vec3& v, const char* what) {
  if (!v.allFinite()) throw NumericInputError(std::string(what) + " must be finite");
}

// Corner points of one fork branch, for side sigma (-1 left, +1 right).
struct BranchOutline {
  Vec2 k, q, e_out, e_in, m;
  Vec2 p1, p2, d1, d2;
};

BranchOutline branch_outline(double x_cross, double h, double phi, double beta, double leg1,
                             double leg2, double sigma) {
  BranchOutline b;
  const Vec2 c{x_cross, 0.0};
  b.d1 = Vec2{std::cos(phi), sigma * std::sin(phi)};
  b.d2 = Vec2{std::cos(phi + beta), sigma * std::sin(phi + beta)};
  auto n_out = [sigma](const Vec2& d) { return Vec2{-d.y() * sigma, d.x() * sigma}; };
  b.p1 = c + leg1 * b.d1;
  b.p2 = b.p1 + leg2 * b.d2;
  b.k = Vec2{x_cross - h * std::tan(phi / 2.0), sigma * h};
  const Vec2 out1 = c + h * n_out(b.d1);
  const Vec2 out2 = b.p1 + h * n_out(b.d2);
  const Vec2 in1 = c - h * n_out(b.d1);
  const Vec2 in2 = b.p1 - h * n_out(b.d2);
  if (!intersect_lines(out1, b.d1, out2, b.d2, b.q)) b.q = b.p1 + h * n_out(b.d1);
  if (!intersect_lines(in1, b.d1, in2, b.d2, b.m)) b.m = b.p1 - h * n_out(b.d1);
  b.e_out = b.p2 + h * n_out(b.d2);
  b.e_in = b.p2 - h * n_out(b.d2);
  return b;
}

bool polygon_is_simple(const std::vector<Vec2>& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

void range_check(double value, double lo, double hi, const char* field) {
  if (!std::isfinite(value) || value < lo || value > hi) {
    std::ostringstream msg;
    msg << field << " = " << value << " outside [" << lo << ", " << hi << "]";
    throw ConfigError(msg.str());
  }
}

}  // namespace

std::vector<Vec2> obstacle_corners(const Obstacle& o) {
  const double c = std::cos(o.rotation);
  const double s = std::sin(o.rotation);
  std::vector<Vec2> out;
  for (const auto& [sx, sy] : {std::pair{-1.0, -1.0}, {1.0, -1.0}, {1.0, 1.0}, {-1.0, 1.0}}) {
    const double lx = sx * o.half_extents.x();
    const double ly = sy * o.half_extents.y();
    out.emplace_back(o.center.x() + c * lx - s * ly, o.center.y() + s * lx + c * ly);
  }
  return out;
}

EnvVariant EnvVariant::original() { return EnvVariant{}; }

EnvVariant EnvVariant::complex() {
  EnvVariant v;
  v.name = VariantName::complex;
  v.corridor_width = 15.0;
  v.fork_half_angle = 40.0;
  v.obstacle_layout_id = 1;
  v.target_branch_angle = 80.0;
  return v;
}

const char* to_string(VariantName name) {
  return name == VariantName::complex ? "complex" : "original";
}

VariantName parse_variant_name(const std::string& text) {
  if (text == "original") return VariantName::original;
  if (text == "complex") return VariantName::complex;
  throw ConfigError("variant must be 'original' or 'complex', got '" + text + "'");
}

const char* to_string(HitKind kind) {
  switch (kind) {
    case HitKind::wall: return "wall";
    case HitKind::obstacle: return "obstacle";
    case HitKind::target: return "target";
    case HitKind::none: break;
  }
  return "none";
}

void validate(const EnvVariant& variant, const WorldLayout& layout) {
  range_check(variant.corridor_width, 4.0, 30.0, "corridor_width");
  range_check(variant.fork_half_angle, 10.0, 80.0, "fork_half_angle");
  range_check(variant.target_branch_angle, 0.0, 150.0, "target_branch_angle");
  if (variant.obstacle_layout_id != 0 && variant.obstacle_layout_id != 1)
    throw ConfigError("obstacle_layout_id must be 0 or 1");
  range_check(layout.corridor_length, 1.0, 1e4, "corridor_length");
  range_check(layout.branch_length, 1.0, 1e4, "branch_length");
  range_check(layout.target_radius, 0.05, 10.0, "target_radius");
  range_check(layout.target_distance, 0.0, layout.branch_length - layout.target_radius,
              "target_distance");
  range_check(layout.wall_height, 0.1, 100.0, "wall_height");
  range_check(layout.obstacle_height, 0.0, layout.wall_height, "obstacle_height");
  if (layout.obstacle_count < 0 || layout.obstacle_count > 64)
    throw ConfigError("obstacle_count must be in [0, 64]");
  range_check(layout.obstacle_length, 0.0, 100.0, "obstacle_length");
  range_check(layout.obstacle_width, 0.0, 100.0, "obstacle_width");
  range_check(layout.obstacle_jitter, 0.0, 100.0, "obstacle_jitter");
  if (layout.fork) {
    range_check(layout.first_leg_length, 0.0, layout.branch_length, "first_leg_length");
  }
  const double h = variant.corridor_width / 2.0;
  // A feasible path must remain beside every obstacle.
  if (layout.obstacle_count > 0) {
    const double across = layout.obstacle_width / 2.0;
    if (!(variant.corridor_width > 2.0 * across))
      throw ConfigError("obstacle_width leaves no passage in the corridor");
    if (std::abs(layout.obstacle_lateral_offset) + across > h)
      throw ConfigError("obstacle_lateral_offset places obstacles in the wall");
  }
}

WorldGeometry build_world(const EnvVariant& variant, std::uint64_t seed) {
  return build_world(variant, WorldLayout{}, seed);
}

WorldGeometry build_world(const EnvVariant& variant, const WorldLayout& layout, std::uint64_t seed) {
  validate(variant, layout);
  Rng rng = Rng::stream(seed, "world");

  WorldGeometry w;
  w.variant = variant.name;
  w.seed = seed;
  w.corridor_width = variant.corridor_width;
  w.corridor_length = layout.corridor_length;
  w.fork_half_angle = layout.fork ? variant.fork_half_angle : 0.0;
  w.bend_angle = layout.fork ? variant.target_branch_angle : 0.0;
  w.branch_length = layout.branch_length;
  w.x_cross = layout.corridor_length;
  w.target_radius = layout.target_radius;
  w.target_altitude = layout.target_radius;
  w.wall_height = layout.wall_height;
  w.obstacle_height = layout.obstacle_height;

  const double h = variant.corridor_width / 2.0;
  const double xc = w.x_cross;
  // The branch draw comes first so the target side is independent of layout.
  const bool left = rng.uniform() < 0.5;

  std::vector<Vec2> poly;
  if (layout.fork) {
    const double phi = deg2rad(variant.fork_half_angle);
    const double beta = deg2rad(variant.target_branch_angle);
    const double leg1 = layout.first_leg_length;
    const double leg2 = layout.branch_length - leg1;
    const BranchOutline l = branch_outline(xc, h, phi, beta, leg1, leg2, -1.0);
    const BranchOutline r = branch_outline(xc, h, phi, beta, leg1, leg2, +1.0);
    const Vec2 crotch{xc + h / std::sin(phi), 0.0};
    const Vec2 c{xc, 0.0};

    // Each corner must appear in order along its wall line.
    const double k_par = (l.k - c).dot(l.d1);
    const double q_par = (l.q - c).dot(l.d1);
    const double x_par = (crotch - c).dot(l.d1);
    const double m_par = (l.m - c).dot(l.d1);
    if (!(q_par > k_par)) throw ConfigError("first_leg_length too short for the fork bend");
    if (!(m_par > x_par)) throw ConfigError("first_leg_length too short: branches overlap");
    if (!((l.e_out - l.p1).dot(l.d2) > (l.q - l.p1).dot(l.d2)) ||
        !((l.e_in - l.p1).dot(l.d2) > (l.m - l.p1).dot(l.d2)))
      throw ConfigError("branch_length too short for the fork bend");
    if (l.k.x() <= 0.0) throw ConfigError("corridor_length too short for the fork");

    poly = {Vec2{0.0, -h}, l.k, l.q, l.e_out, l.e_in, l.m, crotch,
            r.m, r.e_in, r.e_out, r.q, r.k, Vec2{0.0, h}};
    w.branch_polygons = {{l.k, l.q, l.e_out, l.e_in, l.m, crotch},
                         {r.k, r.q, r.e_out, r.e_in, r.m, crotch}};
    w.straight_end = std::min(l.k.x(), xc - h);

    const BranchOutline& chosen = left ? l : r;
    const double s = layout.target_distance;
    w.target_position = s <= leg1 ? Vec2(c + s * chosen.d1) : Vec2(chosen.p1 + (s - leg1) * chosen.d2);
    w.target_branch = left ? Branch::left : Branch::right;
  } else {
    const double end = xc + layout.branch_length;
    poly = {Vec2{0.0, -h}, Vec2{end, -h}, Vec2{end, h}, Vec2{0.0, h}};
    w.branch_polygons = {{Vec2{xc, -h}, Vec2{end, -h}, Vec2{end, h}, Vec2{xc, h}}};
    w.straight_end = xc;
    w.target_position = Vec2{xc + layout.target_distance, 0.0};
    w.target_branch = Branch::straight;
  }
  if (!polygon_is_simple(poly)) throw ConfigError("fork geometry self-intersects; adjust branch angles");
  w.free_space_polygon = poly;
  for (std::size_t i = 0; i < poly.size(); ++i)
    w.wall_segments.push_back(Segment{poly[i], poly[(i + 1) % poly.size()]});
  w.d_cross = (w.target_position - w.crossroad_center()).norm();

  for (int i = 0; i < layout.obstacle_count; ++i) {
    Obstacle o;
    double x = layout.obstacle_first_x + i * layout.obstacle_spacing;
    if (variant.obstacle_layout_id == 1) x += rng.uniform(-layout.obstacle_jitter, layout.obstacle_jitter);
    const double y = (i % 2 == 0 ? 1.0 : -1.0) * layout.obstacle_lateral_offset;
    o.center = Vec2{x, y};
    o.half_extents = Vec2{layout.obstacle_length / 2.0, layout.obstacle_width / 2.0};
    o.rotation = 0.0;
    if (x - o.half_extents.x() < 0.0 || x + o.half_extents.x() > w.straight_end)
      throw ConfigError("obstacle " + std::to_string(i) + " lies outside the straight corridor");
    w.obstacles.push_back(o);
  }
  return w;
}

RayHit raycast(const WorldGeometry& world, const Vec3& origin, const Vec3& direction,
               double max_range, unsigned mask) {
  require_finite(origin, "ray origin");
  require_finite(direction, "ray direction");
  if (std::abs(direction.norm() - 1.0) > 1e-9) throw NumericInputError("ray direction must be unit length");
  if (!(max_range > 0.0) || !std::isfinite(max_range)) throw NumericInputError("max_range must be positive");

  const Vec2 o2{origin.x(), origin.y()};
  const Vec2 d2{direction.x(), direction.y()};
  double best = max_range;
  HitKind kind = HitKind::none;

  // Altitude test for a vertical prism whose top sits at `height`.
  auto below = [&](double t, double height) { return origin.z() + t * direction.z() >= -height; };

  if (mask & ray_walls) {
    for (const auto& seg : world.wall_segments) {
      const Vec2 e = seg.b - seg.a;
      const double denom = cross2(d2, e);
      if (std::abs(denom) < 1e-15) continue;
      const Vec2 ao = seg.a - o2;
      const double t = cross2(ao, e) / denom;
      const double s = cross2(ao, d2) / denom;
      if (t < 0.0 || s < 0.0 || s > 1.0 || t > best) continue;
      if (!below(t, world.wall_height)) continue;
      if (t < best || kind == HitKind::none) {
        best = t;
        kind = HitKind::wall;
      }
    }
    // Rock outside the mine is solid up to the wall top, so a ray coming down
    // over a wall lands on that top surface.
    if (direction.z() > 0.0 && origin.z() < -world.wall_height) {
      const double t = (-world.wall_height - origin.z()) / direction.z();
      const Vec2 p = o2 + t * d2;
      if (t <= best && !point_in_polygon(world.free_space_polygon, p)) {
        best = t;
        kind = HitKind::wall;
      }
    }
  }

  if (mask & ray_obstacles) {
    for (const auto& ob : world.obstacles) {
      const Vec2 lo = to_local(ob, o2);
      const Vec2 ld = dir_to_local(ob, d2);
      double t0 = 0.0;
      double t1 = kInf;
      bool miss = false;
      for (int axis = 0; axis < 2 && !miss; ++axis) {
        const double ext = ob.half_extents[axis];
        if (std::abs(ld[axis]) < 1e-15) {
          if (std::abs(lo[axis]) > ext) miss = true;
          continue;
        }
        double ta = (-ext - lo[axis]) / ld[axis];
        double tb = (ext - lo[axis]) / ld[axis];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) miss = true;
      }
      if (miss) continue;
      // Half-space z >= -height.
      const double top = -world.obstacle_height;
      if (direction.z() > 0.0) {
        t0 = std::max(t0, (top - origin.z()) / direction.z());
      } else if (direction.z() < 0.0) {
        t1 = std::min(t1, (top - origin.z()) / direction.z());
      } else if (origin.z() < top) {
        continue;
      }
      if (t0 > t1 || t0 > best) continue;
      if (t0 < best || kind == HitKind::none) {
        best = t0;
        kind = HitKind::obstacle;
      }
    }
  }

  if (mask & ray_target) {
    const Vec3 oc = origin - world.target_center();
    const double b = direction.dot(oc);
    const double c = oc.squaredNorm() - world.target_radius * world.target_radius;
    const double disc = b * b - c;
    if (disc >= 0.0) {
      const double root = std::sqrt(disc);
      double t = -b - root;
      if (t < 0.0) t = (-b + root >= 0.0) ? 0.0 : -1.0;
      if (t >= 0.0 && t <= best && (t < best || kind == HitKind::none)) {
        best = t;
        kind = HitKind::target;
      }
    }
  }

  RayHit hit;
  hit.hit_kind = kind;
  hit.distance = kind == HitKind::none ? max_range : best;
  hit.normalized_distance = std::min(hit.distance, max_range) / max_range;
  return hit;
}

bool check_collision(const WorldGeometry& world, const Vec3& center, double body_radius) {
  require_finite(center, "collision center");
  if (!(body_radius > 0.0) || !std::isfinite(body_radius))
    throw NumericInputError("body_radius must be positive");
  const Vec2 p{center.x(), center.y()};
  const double altitude = -center.z();
  const double r2 = body_radius * body_radius;

  const double dv_wall = std::max(0.0, altitude - world.wall_height);
  for (const auto& seg : world.wall_segments) {
    const double dh = point_segment_distance(p, seg.a, seg.b);
    if (dh * dh + dv_wall * dv_wall <= r2) return true;
  }
  const double dv_obs = std::max(0.0, altitude - world.obstacle_height);
  for (const auto& ob : world.obstacles) {
    const double dh = point_box_distance(ob, p);
    if (dh * dh + dv_obs * dv_obs <= r2) return true;
  }
  return false;
}

double clearance(const WorldGeometry& world, const Vec3& point) {
  const Vec2 p{point.x(), point.y()};
  const double altitude = -point.z();
  double best = kInf;
  const double dv_wall = std::max(0.0, altitude - world.wall_height);
  for (const auto& seg : world.wall_segments)
    best = std::min(best, std::hypot(point_segment_distance(p, seg.a, seg.b), dv_wall));
  const double dv_obs = std::max(0.0, altitude - world.obstacle_height);
  for (const auto& ob : world.obstacles) best = std::min(best, std::hypot(point_box_distance(ob, p), dv_obs));
  return best;
}

bool crosses_wall(const WorldGeometry& world, const Vec2& a, const Vec2& b) {
  for (const auto& seg : world.wall_segments)
    if (segments_intersect(a, b, seg.a, seg.b)) return true;
  return false;
}

bool point_in_polygon(const std::vector<Vec2>& polygon, const Vec2& p) {
  bool inside = false;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = polygon[i];
    const Vec2& b = polygon[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

bool in_straight_corridor(const WorldGeometry& world, const Vec2& p) {
  const double h = world.corridor_width / 2.0;
  return p.x() >= 0.0 && p.x() <= world.straight_end && std::abs(p.y()) <= h;
}

void write_geometry(const WorldGeometry& w, std::ostream& out) {
  out << "minesearch-geometry 1\n";
  out << "variant " << to_string(w.variant) << "\n";
  out << "seed " << w.seed << "\n";
  out << "corridor_width " << fmt_exact(w.corridor_width) << "\n";
  out << "corridor_length " << fmt_exact(w.corridor_length) << "\n";
  out << "fork_half_angle " << fmt_exact(w.fork_half_angle) << "\n";
  out << "bend_angle " << fmt_exact(w.bend_angle) << "\n";
  out << "branch_length " << fmt_exact(w.branch_length) << "\n";
  out << "x_cross " << fmt_exact(w.x_cross) << "\n";
  out << "straight_end " << fmt_exact(w.straight_end) << "\n";
  out << "wall_height " << fmt_exact(w.wall_height) << "\n";
  out << "obstacle_height " << fmt_exact(w.obstacle_height) << "\n";
  out << "target_branch " << static_cast<int>(w.target_branch) << "\n";
  out << "target " << fmt_exact(w.target_position.x()) << ' ' << fmt_exact(w.target_position.y()) << ' '
      << fmt_exact(w.target_radius) << ' ' << fmt_exact(w.target_altitude) << "\n";
  out << "d_cross " << fmt_exact(w.d_cross) << "\n";
  for (const auto& v : w.free_space_polygon)
    out << "free_space " << fmt_exact(v.x()) << ' ' << fmt_exact(v.y()) << "\n";
  for (std::size_t i = 0; i < w.branch_polygons.size(); ++i)
    for (const auto& v : w.branch_polygons[i])
      out << "branch_vertex " << i << ' ' << fmt_exact(v.x()) << ' ' << fmt_exact(v.y()) << "\n";
  for (const auto& s : w.wall_segments)
    out << "wall " << fmt_exact(s.a.x()) << ' ' << fmt_exact(s.a.y()) << ' ' << fmt_exact(s.b.x()) << ' '
        << fmt_exact(s.b.y()) << "\n";
  for (const auto& o : w.obstacles)
    out << "obstacle " << fmt_exact(o.center.x()) << ' ' << fmt_exact(o.center.y()) << ' '
        << fmt_exact(o.half_extents.x()) << ' ' << fmt_exact(o.half_extents.y()) << ' '
        << fmt_exact(o.rotation) << "\n";
}

WorldGeometry read_geometry(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "minesearch-geometry 1")
    throw IoError("not a version-1 geometry file (header: '" + line + "')");
  WorldGeometry w;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    std::string kind;
    ls >> kind;
    auto num = [&]() {
      std::string tok;
      if (!(ls >> tok)) throw IoError("geometry line " + std::to_string(line_no) + ": missing value");
      return parse_double(tok);
    };
    if (kind == "variant") {
      std::string v;
      ls >> v;
      w.variant = parse_variant_name(v);
    } else if (kind == "seed") {
      ls >> w.seed;
    } else if (kind == "corridor_width") {
      w.corridor_width = num();
    } else if (kind == "corridor_length") {
      w.corridor_length = num();
    } else if (kind == "fork_half_angle") {
      w.fork_half_angle = num();
    } else if (kind == "bend_angle") {
      w.bend_angle = num();
    } else if (kind == "branch_length") {
      w.branch_length = num();
    } else if (kind == "x_cross") {
      w.x_cross = num();
    } else if (kind == "straight_end") {
      w.straight_end = num();
    } else if (kind == "wall_height") {
      w.wall_height = num();
    } else if (kind == "obstacle_height") {
      w.obstacle_height = num();
    } else if (kind == "target_branch") {
      int b = 0;
      ls >> b;
      w.target_branch = static_cast<Branch>(b);
    } else if (kind == "target") {
      const double x = num();
      const double y = num();
      w.target_position = Vec2{x, y};
      w.target_radius = num();
      w.target_altitude = num();
    } else if (kind == "d_cross") {
      w.d_cross = num();
    } else if (kind == "free_space") {
      const double x = num();
      w.free_space_polygon.emplace_back(x, num());
    } else if (kind == "branch_vertex") {
      std::size_t idx = 0;
      ls >> idx;
      if (w.branch_polygons.size() <= idx) w.branch_polygons.resize(idx + 1);
      const double x = num();
      w.branch_polygons[idx].emplace_back(x, num());
    } else if (kind == "wall") {
      const double ax = num();
      const double ay = num();
      const double bx = num();
      const double by = num();
      w.wall_segments.push_back(Segment{Vec2{ax, ay}, Vec2{bx, by}});
    } else if (kind == "obstacle") {
      Obstacle o;
      const double cx = num();
      const double cy = num();
      o.center = Vec2{cx, cy};
      const double hx = num();
      const double hy = num();
      o.half_extents = Vec2{hx, hy};
      o.rotation = num();
      w.obstacles.push_back(o);
    } else {
      throw IoError("geometry line " + std::to_string(line_no) + ": unknown primitive '" + kind + "'");
    }
  }
  return w;
}

}  // namespace minesearch

#include "minesearch/vehicles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "minesearch/errors.hpp"

namespace minesearch {

namespace {

void check_dt(double dt) {
  if (!(dt > 0.0 && dt <= 0.1)) throw StepError("dt must lie in (0, 0.1], got " + std::to_string(dt));
}

Vec4 clamped(const UavCommand& cmd) {
  if (!cmd.a.allFinite()) throw ActionError("UAV command has non-finite components");
  return cmd.a.cwiseMax(-1.0).cwiseMin(1.0);
}

constexpr std::array<UgvAction, kUgvActionCount> kTable = {{
    {1, 1.5, -1}, {2, 1.5, 0}, {3, 1.5, 1},
    {4, 3.0, -1}, {5, 3.0, 0}, {6, 3.0, 1},
    {7, 0.75, -1}, {8, 0.75, 1},
}};

}  // namespace

UgvAction ugv_action(int id) {
  if (id < 1 || id > kUgvActionCount) throw ActionError("UGV action id must be 1..8, got " + std::to_string(id));
  return kTable[static_cast<std::size_t>(id - 1)];
}

Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

Mat3 expm_so3(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = skew(phi);
  if (theta < 1e-8) return Mat3::Identity() + k + 0.5 * k * k;
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

Mat3 orthonormalize(const Mat3& m) {
  Vec3 c0 = m.col(0).normalized();
  Vec3 c1 = m.col(1) - c0.dot(m.col(1)) * c0;
  c1.normalize();
  Vec3 c2 = m.col(2) - c0.dot(m.col(2)) * c0 - c1.dot(m.col(2)) * c1;
  c2.normalize();
  Mat3 out;
  out.col(0) = c0;
  out.col(1) = c1;
  out.col(2) = c2;
  return out;
}

Mat3 yaw_rotation(double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Mat3 r;
  r << c, -s, 0.0,
       s, c, 0.0,
       0.0, 0.0, 1.0;
  return r;
}

double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  a = std::remainder(a, 2.0 * pi);
  if (a <= -pi) a += 2.0 * pi;
  return a;
}

Vec4 quaternion_wxyz(const Mat3& R) {
  Eigen::Quaterniond q(R);
  q.normalize();
  Vec4 out(q.w(), q.x(), q.y(), q.z());
  if (out[0] < 0.0) out = -out;
  return out;
}

Vec3 body_rates(const UavCommand& cmd, const VehicleParams& p) {
  const Vec4 a = clamped(cmd);
  return {a[0] * p.rate_xy_max, a[1] * p.rate_xy_max, a[2] * p.rate_z_max};
}

double thrust(const UavCommand& cmd, const VehicleParams& p) {
  return p.mass * p.gravity * (1.0 + clamped(cmd)[3]);
}

UavState step_uav_rigid(const UavState& s, const UavCommand& cmd, double dt, const VehicleParams& p) {
  check_dt(dt);
  const Vec3 w = body_rates(cmd, p);
  const double t = thrust(cmd, p);
  UavState n = s;
  n.v_w = s.v_w + dt * (s.R * Vec3(0.0, 0.0, -t / p.mass) + Vec3(0.0, 0.0, p.gravity));
  n.p_w = s.p_w + dt * n.v_w;
  n.R = orthonormalize(s.R * expm_so3(dt * w));
  n.yaw = std::atan2(n.R(1, 0), n.R(0, 0));
  return n;
}

UavState step_uav_planar(const UavState& s, const UavCommand& cmd, double dt, const VehicleParams& p) {
  check_dt(dt);
  const Vec4 a = clamped(cmd);
  UavState n = s;
  const double c = std::cos(s.yaw);
  const double sn = std::sin(s.yaw);
  const double vf = a[0] * p.v_max;
  const double vr = a[1] * p.v_max;
  const double climb = a[3] * p.vz_max;
  n.v_w = Vec3(c * vf - sn * vr, sn * vf + c * vr, -climb);
  n.p_w = s.p_w + dt * n.v_w;
  const double altitude = std::clamp(-n.p_w.z(), p.h_min, p.h_max);
  n.p_w.z() = -altitude;
  n.yaw = wrap_angle(s.yaw + dt * a[2] * p.yaw_rate_max);
  n.R = yaw_rotation(n.yaw);
  return n;
}

UavState step_uav(UavMode mode, const UavState& s, const UavCommand& cmd, double dt, const VehicleParams& p) {
  return mode == UavMode::rigid ? step_uav_rigid(s, cmd, dt, p) : step_uav_planar(s, cmd, dt, p);
}

UgvState step_ugv(const UgvState& s, const UgvAction& action, double dt, const VehicleParams& p) {
  check_dt(dt);
  const UgvAction ref = ugv_action(action.id);
  if (ref.speed_magnitude != action.speed_magnitude || ref.turning_direction != action.turning_direction)
    throw ActionError("UGV action " + std::to_string(action.id) + " does not match the action table");
  UgvState n;
  n.heading = wrap_angle(s.heading + action.turning_direction * p.ugv_turn_rate * dt);
  n.position = s.position + action.speed_magnitude * dt * Vec2(std::cos(n.heading), std::sin(n.heading));
  n.speed = action.speed_magnitude;
  return n;
}

const char* to_string(UavMode m) { return m == UavMode::rigid ? "rigid" : "planar"; }

UavMode parse_uav_mode(const std::string& text) {
  if (text == "rigid") return UavMode::rigid;
  if (text == "planar") return UavMode::planar;
  throw ConfigError("uav mode must be 'rigid' or 'planar', got '" + text + "'");
}

}  // namespace minesearch

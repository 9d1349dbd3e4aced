#pragma once

#include <array>

#include <Eigen/Core>

#include "minesearch/world.hpp"

namespace minesearch {

using Mat3 = Eigen::Matrix3d;
using Vec4 = Eigen::Vector4d;

struct VehicleParams {
  double mass = 1.0;             // kg
  double gravity = 9.81;         // m/s^2
  double dt = 0.05;              // s, control period for both vehicles
  double rate_xy_max = 1.5707963267948966;  // rad/s, body roll/pitch rate at |a| = 1
  double rate_z_max = 3.141592653589793;    // rad/s, body yaw rate at |a| = 1
  // Planar mode
  double v_max = 5.0;            // m/s
  double yaw_rate_max = 3.141592653589793;  // rad/s
  double vz_max = 2.0;           // m/s
  double h_min = 1.0;            // m altitude
  double h_max = 4.0;            // m altitude
  // UGV
  double ugv_turn_rate = 1.5707963267948966;  // rad/s
  double uav_radius = 0.3;
  double ugv_radius = 0.5;
  double ugv_sensor_height = 0.5;
};

enum class UavMode { rigid, planar };

// Body frame is forward-right-down; z of the world frame points along gravity.
struct UavState {
  Vec3 p_w = Vec3::Zero();
  Vec3 v_w = Vec3::Zero();
  Mat3 R = Mat3::Identity();  // body -> world
  double yaw = 0.0;           // rad, kept in sync with R
};

struct UavCommand {
  Vec4 a = Vec4::Zero();  // (w_x, w_y, w_z, thrust) in [-1, 1]
};

struct UgvState {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;  // rad in (-pi, pi], positive turns toward +y
  double speed = 0.0;    // last commanded, m/s
};

struct UgvAction {
  int id = 0;
  double speed_magnitude = 0.0;
  int turning_direction = 0;
};

inline constexpr int kUgvActionCount = 8;
// Stage-1 pseudo-action: the UGV is not stepped at all.
inline constexpr int kUgvHold = 0;

// Table of the eight discrete UGV actions, ids 1..8. Throws ActionError.
UgvAction ugv_action(int id);

Mat3 skew(const Vec3& w);
// Rotation matrix exp(skew(phi)) via Rodrigues' formula.
Mat3 expm_so3(const Vec3& phi);
// Column Gram-Schmidt; returns a proper rotation for near-orthonormal input.
Mat3 orthonormalize(const Mat3& m);
Mat3 yaw_rotation(double yaw);
double wrap_angle(double a);
// Unit quaternion (w, x, y, z) of R with w >= 0.
Vec4 quaternion_wxyz(const Mat3& R);

// Clamped command -> (body rates, thrust).
Vec3 body_rates(const UavCommand& cmd, const VehicleParams& p);
double thrust(const UavCommand& cmd, const VehicleParams& p);

UavState step_uav_rigid(const UavState& s, const UavCommand& cmd, double dt, const VehicleParams& p = {});
UavState step_uav_planar(const UavState& s, const UavCommand& cmd, double dt, const VehicleParams& p = {});
UavState step_uav(UavMode mode, const UavState& s, const UavCommand& cmd, double dt, const VehicleParams& p);
UgvState step_ugv(const UgvState& s, const UgvAction& action, double dt, const VehicleParams& p = {});

const char* to_string(UavMode m);
UavMode parse_uav_mode(const std::string& text);

}  // namespace minesearch

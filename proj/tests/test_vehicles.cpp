#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "minesearch/errors.hpp"
#include "minesearch/rng.hpp"
#include "minesearch/vehicles.hpp"

using namespace minesearch;

namespace {

Vec3 random_vec(Rng& rng, double scale = 1.0) {
  return Vec3(rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(-scale, scale));
}

}  // namespace

TEST_CASE("skew matrix") {
  CHECK(skew(Vec3::Zero()) == Mat3::Zero());
  Mat3 expect;
  expect << 0, -3, 2, 3, 0, -1, -2, 1, 0;
  CHECK(skew(Vec3(1, 2, 3)) == expect);

  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vec3 w = random_vec(rng, 10.0);
    const Mat3 s = skew(w);
    CHECK((s + s.transpose()) == Mat3::Zero());
    const Vec3 u = random_vec(rng, 10.0);
    CHECK((s * u - w.cross(u)).norm() <= 1e-12);
  }
}

TEST_CASE("rigid hover equilibrium is exact") {
  UavState s;
  s.p_w = Vec3(2, 0, -3);
  s.v_w = Vec3(0.5, -0.25, 0.0);
  const UavState n = step_uav_rigid(s, UavCommand{}, 0.05);
  CHECK(n.v_w == s.v_w);
  CHECK(n.R == Mat3::Identity());
}

TEST_CASE("zero thrust free-falls along +z") {
  UavState s;
  UavCommand cmd;
  cmd.a = Vec4(0, 0, 0, -1);
  const VehicleParams p;
  UavState n = step_uav_rigid(s, cmd, 0.05);
  CHECK(n.v_w.x() == 0.0);
  CHECK(n.v_w.y() == 0.0);
  CHECK(n.v_w.z() == doctest::Approx(p.gravity * 0.05).epsilon(1e-15));
  for (int i = 0; i < 100; ++i) {
    const UavState next = step_uav_rigid(n, cmd, 0.05);
    CHECK(std::abs((next.v_w.z() - n.v_w.z()) - p.gravity * 0.05) <= 1e-9);
    n = next;
  }
}

TEST_CASE("constant yaw rate returns R after a full turn") {
  UavState s;
  UavCommand cmd;
  cmd.a = Vec4(0, 0, 0.5, 0);  // pi/2 rad/s
  UavState n = s;
  for (int i = 0; i < 400; ++i) n = step_uav_rigid(n, cmd, 0.01);
  CHECK((n.R - s.R).norm() <= 1e-4);
  // Halfway the heading has turned by pi.
  n = s;
  for (int i = 0; i < 200; ++i) n = step_uav_rigid(n, cmd, 0.01);
  CHECK(std::abs(std::abs(n.yaw) - std::numbers::pi) <= 1e-6);
}

TEST_CASE("rigid steps keep R orthonormal") {
  Rng rng(42);
  UavState s;
  double worst_det = 0;
  double worst_ortho = 0;
  for (int i = 0; i < 100000; ++i) {
    UavCommand cmd;
    cmd.a = Vec4(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    s = step_uav_rigid(s, cmd, 0.05);
    s.p_w.setZero();  // keep numbers bounded; position does not feed back
    s.v_w.setZero();
    worst_det = std::max(worst_det, std::abs(s.R.determinant() - 1.0));
    worst_ortho = std::max(worst_ortho, (s.R.transpose() * s.R - Mat3::Identity()).norm());
  }
  CHECK(worst_det <= 1e-6);
  CHECK(worst_ortho <= 1e-6);
}

TEST_CASE("dt outside (0, 0.1] is rejected") {
  CHECK_THROWS_AS(step_uav_rigid(UavState{}, UavCommand{}, 0.0), StepError);
  CHECK_THROWS_AS(step_uav_planar(UavState{}, UavCommand{}, 0.2), StepError);
  CHECK_THROWS_AS(step_ugv(UgvState{}, ugv_action(2), -1.0), StepError);
}

TEST_CASE("commands are clamped to [-1, 1]") {
  UavCommand big;
  big.a = Vec4(5, -5, 9, 3);
  UavCommand unit;
  unit.a = Vec4(1, -1, 1, 1);
  UavState s;
  s.p_w = Vec3(0, 0, -2);
  const UavState a = step_uav_rigid(s, big, 0.05);
  const UavState b = step_uav_rigid(s, unit, 0.05);
  CHECK(a.p_w == b.p_w);
  CHECK(a.R == b.R);
  UavCommand bad;
  bad.a = Vec4(std::nan(""), 0, 0, 0);
  CHECK_THROWS_AS(step_uav_planar(s, bad, 0.05), ActionError);
}

TEST_CASE("planar mode") {
  UavState s;
  s.p_w = Vec3(1, 2, -3);
  const UavState same = step_uav_planar(s, UavCommand{}, 0.05);
  CHECK(same.p_w == s.p_w);
  CHECK(same.yaw == s.yaw);

  UavCommand fwd;
  fwd.a = Vec4(1, 0, 0, 0);
  const UavState moved = step_uav_planar(s, fwd, 0.1);
  CHECK(moved.p_w.x() - s.p_w.x() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(moved.p_w.y() == s.p_w.y());

  // Right strafe moves toward +y at yaw 0.
  UavCommand right;
  right.a = Vec4(0, 1, 0, 0);
  CHECK(step_uav_planar(s, right, 0.1).p_w.y() > s.p_w.y());

  Rng rng(3);
  const VehicleParams p;
  UavState f = s;
  for (int i = 0; i < 20000; ++i) {
    UavCommand c;
    c.a = Vec4(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
    f = step_uav_planar(f, c, 0.05);
    const double alt = -f.p_w.z();
    CHECK(alt >= p.h_min);
    CHECK(alt <= p.h_max);
  }
}

TEST_CASE("UGV action table") {
  const double speeds[] = {1.5, 1.5, 1.5, 3, 3, 3, 0.75, 0.75};
  const int turns[] = {-1, 0, 1, -1, 0, 1, -1, 1};
  for (int id = 1; id <= 8; ++id) {
    const UgvAction a = ugv_action(id);
    CHECK(a.id == id);
    CHECK(a.speed_magnitude == speeds[id - 1]);
    CHECK(a.turning_direction == turns[id - 1]);
  }
  CHECK(ugv_action(7).turning_direction != 0);
  CHECK(ugv_action(8).turning_direction != 0);
  CHECK_THROWS_AS(ugv_action(0), ActionError);
  CHECK_THROWS_AS(ugv_action(9), ActionError);
  UgvAction forged = ugv_action(2);
  forged.speed_magnitude = 10;
  CHECK_THROWS_AS(step_ugv(UgvState{}, forged, 0.05), ActionError);
}

TEST_CASE("UGV kinematics") {
  const UgvState start;
  const UgvState a = step_ugv(start, ugv_action(2), 0.1);
  CHECK(a.position.x() == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(a.position.y() == 0.0);
  CHECK(a.heading == 0.0);

  const UgvState b = step_ugv(start, ugv_action(5), 0.1);
  CHECK(b.position.norm() == 2.0 * a.position.norm());

  // A left turn at 90 deg/s for one second ends facing -y.
  UgvState t = start;
  for (int i = 0; i < 20; ++i) t = step_ugv(t, ugv_action(1), 0.05);
  CHECK(t.heading == doctest::Approx(-std::numbers::pi / 2).epsilon(1e-12));

  Rng rng(9);
  UgvState s;
  for (int i = 0; i < 1000; ++i) {
    const UgvAction act = ugv_action(1 + static_cast<int>(rng.below(8)));
    s.position.setZero();  // measure the displacement without cancellation error
    const UgvState n = step_ugv(s, act, 0.05);
    CHECK(std::abs(n.position.norm() - act.speed_magnitude * 0.05) <= 1e-16);
    CHECK(n.heading > -std::numbers::pi);
    CHECK(n.heading <= std::numbers::pi);
    s = n;
  }
}

TEST_CASE("stepping is pure") {
  UavState s;
  s.p_w = Vec3(3, 1, -2);
  UavCommand c;
  c.a = Vec4(0.3, -0.2, 0.7, 0.1);
  const UavState a = step_uav_rigid(s, c, 0.05);
  const UavState b = step_uav_rigid(s, c, 0.05);
  CHECK(a.p_w == b.p_w);
  CHECK(a.R == b.R);
  CHECK(a.v_w == b.v_w);
}

TEST_CASE("quaternion has unit norm and w >= 0") {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const Mat3 r = expm_so3(random_vec(rng, 3.0));
    const Vec4 q = quaternion_wxyz(r);
    CHECK(std::abs(q.norm() - 1.0) <= 1e-12);
    CHECK(q[0] >= 0.0);
  }
}

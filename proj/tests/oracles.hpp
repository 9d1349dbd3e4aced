#pragma once

// Independent reference implementations shared by unit tests and the
// acceptance binary. Each one is written the slow, obvious way.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "minesearch/nn.hpp"
#include "minesearch/rng.hpp"
#include "minesearch/world.hpp"

namespace oracle {

// Generalized advantage by explicit summation of discounted TD errors.
// dones[t] cuts both the bootstrap and the sum after t; v_n = bootstrap.
inline std::vector<double> gae_by_sum(const std::vector<double>& r, const std::vector<double>& v,
                                      const std::vector<bool>& dones, double bootstrap, double gamma,
                                      double lambda) {
  const std::size_t n = r.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = dones[t] ? 0.0 : (t + 1 < n ? v[t + 1] : bootstrap);
    delta[t] = r[t] + gamma * next - v[t];
  }
  std::vector<double> a(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double weight = 1.0;
    for (std::size_t l = t; l < n; ++l) {
      a[t] += weight * delta[l];
      if (dones[l]) break;
      weight *= gamma * lambda;
    }
  }
  return a;
}

struct GradCheck {
  double rel_error = 0;  // |g - fd| / max(|g|, |fd|) over the whole vector
  double max_abs = 0;
  double norm = 0;
};

// Central differences of `loss` around ps.flat(), one coordinate at a time.
inline GradCheck check_gradient(minesearch::ParamSet<double>& ps, const Eigen::VectorXd& analytic,
                                const std::function<double()>& loss, double h = 1e-5) {
  Eigen::VectorXd fd(analytic.size());
  auto& x = ps.flat();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = loss();
    x[i] = keep - h;
    const double down = loss();
    x[i] = keep;
    fd[i] = (up - down) / (2.0 * h);
  }
  GradCheck out;
  const double diff = (analytic - fd).norm();
  out.norm = std::max(analytic.norm(), fd.norm());
  out.rel_error = out.norm > 0 ? diff / out.norm : diff;
  out.max_abs = (analytic - fd).cwiseAbs().maxCoeff();
  return out;
}

// Stage-1 loop bookkeeping transcribed line by line: one call per window
// with the window's reward_sum. Returns true when the while loop would exit.
struct LiteralGate {
  int window_steps = 10000;
  double threshold = 5000.0;
  int required = 50;
  int reward_counter = 0;
  bool window(double reward_sum) {
    if (reward_sum / window_steps >= threshold) {
      reward_counter = reward_counter + 1;
    } else {
      reward_counter = 0;
    }
    return !(reward_counter < required);
  }
};

// Even-odd crossing test, boundary handling left to chance; the oracles below
// only sample points a few millimetres apart, so the boundary never matters.
inline bool inside_polygon(const std::vector<minesearch::Vec2>& poly, const minesearch::Vec2& p) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) &&
        p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x())
      in = !in;
  }
  return in;
}

// True when the point lies in a wall (outside the floor plan, below the wall
// top), an obstacle box, or the target sphere.
inline bool solid_at(const minesearch::WorldGeometry& w, const minesearch::Vec3& q) {
  const minesearch::Vec2 p = q.head<2>();
  const double alt = -q.z();
  if (alt <= w.wall_height && !inside_polygon(w.free_space_polygon, p)) return true;
  for (const auto& o : w.obstacles) {
    const minesearch::Vec2 d = p - o.center;
    const double c = std::cos(o.rotation), s = std::sin(o.rotation);
    const double lx = c * d.x() + s * d.y(), ly = -s * d.x() + c * d.y();
    if (std::abs(lx) <= o.half_extents.x() && std::abs(ly) <= o.half_extents.y() && alt <= w.obstacle_height)
      return true;
  }
  return (q - w.target_center()).norm() <= w.target_radius;
}

// First 1 mm sample along the ray that lies inside solid geometry.
inline double march(const minesearch::WorldGeometry& w, const minesearch::Vec3& o, const minesearch::Vec3& d,
                    double max_range) {
  const double step = 1e-3;
  const int n = static_cast<int>(max_range / step);
  for (int i = 0; i <= n; ++i) {
    const double t = i * step;
    if (solid_at(w, o + t * d)) return t;
  }
  return max_range;
}

inline minesearch::Vec3 random_unit(minesearch::Rng& rng) {
  minesearch::Vec3 v(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

// Uniform point of the floor plan clear of every obstacle footprint.
inline minesearch::Vec2 random_free_point(const minesearch::WorldGeometry& w, minesearch::Rng& rng) {
  for (;;) {
    minesearch::Vec2 p(rng.uniform(0.0, w.x_cross + w.branch_length), rng.uniform(-40.0, 40.0));
    if (!inside_polygon(w.free_space_polygon, p)) continue;
    bool in_box = false;
    for (const auto& o : w.obstacles)
      if ((p - o.center).cwiseAbs().maxCoeff() <= o.half_extents.maxCoeff() + 0.01) in_box = true;
    if (!in_box) return p;
  }
}

}  // namespace oracle

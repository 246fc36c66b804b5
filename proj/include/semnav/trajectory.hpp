#pragma once
// Candidate trajectory: ordered 2D waypoints at fixed timestep with the
// per-step velocities they integrate from. Waypoints are robot-frame unless
// a function says otherwise; p[k+1] = p[k] + v[k] * dt holds exactly.

#include <cmath>
#include <vector>

namespace semnav {

struct Vec2 {
  double x = 0, y = 0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dist(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Trajectory {
  std::vector<Vec2> waypoints;
  std::vector<Vec2> velocities;
  double dt = 1.0;
  bool feasible = true;  // slope-filter verdict, set by the caller

  size_t size() const { return waypoints.size(); }
};

// Euler integration from the origin: waypoint[k] = sum of v[0..k] * dt.
inline Trajectory integrate_velocities(const std::vector<Vec2>& velocities, double dt) {
  Trajectory t;
  t.dt = dt;
  t.velocities = velocities;
  t.waypoints.reserve(velocities.size());
  Vec2 p;
  for (const Vec2& v : velocities) {
    p.x += v.x * dt;
    p.y += v.y * dt;
    t.waypoints.push_back(p);
  }
  return t;
}

// Final displacement error between two trajectories' endpoints.
inline double fde(const Trajectory& a, const Trajectory& b) {
  return dist(a.waypoints.back(), b.waypoints.back());
}

}  // namespace semnav

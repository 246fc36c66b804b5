#include "semnav/slope/filter.hpp"

#include <algorithm>
#include <cmath>

namespace semnav::slope {

std::optional<double> footprint_max(const world::LocalGrid& elev, double x, double y,
                                    double d_foot) {
  const double half = d_foot / 2.0;
  int64_t ix0 = static_cast<int64_t>(std::floor((x - half - elev.min_x) / elev.res));
  int64_t iy0 = static_cast<int64_t>(std::floor((y - half - elev.min_y) / elev.res));
  int64_t ix1 = static_cast<int64_t>(std::floor((x + half - elev.min_x) / elev.res));
  int64_t iy1 = static_cast<int64_t>(std::floor((y + half - elev.min_y) / elev.res));
  ix0 = std::max<int64_t>(ix0, 0);
  iy0 = std::max<int64_t>(iy0, 0);
  ix1 = std::min(ix1, elev.nx - 1);
  iy1 = std::min(iy1, elev.ny - 1);
  if (ix0 > ix1 || iy0 > iy1) return std::nullopt;
  double best = -1e300;
  for (int64_t iy = iy0; iy <= iy1; ++iy)
    for (int64_t ix = ix0; ix <= ix1; ++ix) best = std::max(best, elev.at(ix, iy));
  return best;
}

Verdict check_trajectory(const Trajectory& traj, const world::LocalGrid& elev,
                         const FilterConfig& cfg) {
  Verdict v;
  // z_0 anchored at the robot's own footprint
  std::optional<double> prev_z = footprint_max(elev, 0.0, 0.0, cfg.d_foot);
  if (!prev_z) prev_z = 0.0;
  Vec2 prev_p{0.0, 0.0};
  for (size_t i = 0; i < traj.waypoints.size(); ++i) {
    const Vec2& p = traj.waypoints[i];
    if (!elev.contains(p.x, p.y)) {
      v.feasible = false;
      v.reason = Discard::kOutOfWindow;
      v.failed_segment = static_cast<int>(i);
      return v;
    }
    const std::optional<double> z = footprint_max(elev, p.x, p.y, cfg.d_foot);
    if (!z) {
      v.feasible = false;
      v.reason = Discard::kOutOfWindow;
      v.failed_segment = static_cast<int>(i);
      return v;
    }
    const double planar = dist(prev_p, p);
    // zero planar displacement: vertical by definition, always discards
    const double theta = planar > 0 ? std::atan((*z - *prev_z) / planar) : M_PI / 2.0;
    if (theta > v.worst_theta) v.worst_theta = theta;
    if (theta > cfg.theta_max) {
      v.feasible = false;
      v.reason = Discard::kSlope;
      v.failed_segment = static_cast<int>(i);
      return v;
    }
    prev_z = z;
    prev_p = p;
  }
  return v;
}

FilterResult filter_collisions(const std::vector<Trajectory>& trajectories,
                               const world::LocalGrid& elev, const FilterConfig& cfg) {
  FilterResult res;
  res.verdicts.reserve(trajectories.size());
  for (size_t i = 0; i < trajectories.size(); ++i) {
    Verdict v = check_trajectory(trajectories[i], elev, cfg);
    if (v.feasible) res.feasible.push_back(static_cast<int>(i));
    res.verdicts.push_back(v);
  }
  return res;
}

std::optional<double> recovery_direction(const world::RobotState& state,
                                         double goal_bearing_world,
                                         const world::LocalGrid& elev,
                                         const FilterConfig& cfg, const RecoveryConfig& rec) {
  const double goal_rel = world::wrap_angle(goal_bearing_world - state.heading);
  const int n_steps = static_cast<int>(std::ceil(M_PI / rec.scan_step));
  auto probe_free = [&](double rel_heading) {
    Trajectory probe;
    probe.dt = 1.0;
    const int n = static_cast<int>(std::llround(rec.probe_length / rec.probe_spacing));
    for (int k = 1; k <= n; ++k) {
      const double d = rec.probe_spacing * static_cast<double>(k);
      probe.waypoints.push_back({d * std::cos(rel_heading), d * std::sin(rel_heading)});
    }
    return check_trajectory(probe, elev, cfg).feasible;
  };
  if (probe_free(goal_rel)) return world::wrap_angle(state.heading + goal_rel);
  for (int k = 1; k <= n_steps; ++k) {
    const double off = rec.scan_step * static_cast<double>(k);
    for (const double sign : {+1.0, -1.0}) {
      if (off >= M_PI && sign < 0) continue;  // +pi and -pi coincide
      const double rel = goal_rel + sign * off;
      if (probe_free(rel)) return world::wrap_angle(state.heading + rel);
    }
  }
  return std::nullopt;
}

}  // namespace semnav::slope

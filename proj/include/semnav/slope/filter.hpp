#pragma once
// Slope-based collision filter over the local elevation grid: a trajectory
// is discarded when any consecutive-waypoint incline exceeds theta_max,
// with per-waypoint heights taken as the max elevation under the robot
// footprint. Also hosts the recovery-direction scan.

#include <optional>
#include <vector>

#include "semnav/trajectory.hpp"
#include "semnav/world/sensors.hpp"

namespace semnav::slope {

struct FilterConfig {
  double theta_max = 30.0 * M_PI / 180.0;  // unreported by the method source; mandatory report
  double d_foot = 0.8;
};

enum class Discard { kNone, kSlope, kOutOfWindow };

struct Verdict {
  bool feasible = true;
  Discard reason = Discard::kNone;
  double worst_theta = 0.0;  // signed, radians
  int failed_segment = -1;   // first offending waypoint index
};

// Max elevation within the d_foot square centered at (x, y), clipped to the
// grid. Returns nullopt when the square misses the grid entirely.
std::optional<double> footprint_max(const world::LocalGrid& elev, double x, double y,
                                    double d_foot);

Verdict check_trajectory(const Trajectory& traj, const world::LocalGrid& elev,
                         const FilterConfig& cfg);

struct FilterResult {
  std::vector<int> feasible;  // indices into the input set
  std::vector<Verdict> verdicts;
};

FilterResult filter_collisions(const std::vector<Trajectory>& trajectories,
                               const world::LocalGrid& elev, const FilterConfig& cfg);

struct RecoveryConfig {
  double scan_step = 10.0 * M_PI / 180.0;
  double probe_length = 4.0;
  double probe_spacing = 1.0;
};

// Scans headings outward from the goal bearing (alternating sides, nearest
// offset first) and returns the first collision-free world-frame heading, or
// nullopt when a full revolution fails.
std::optional<double> recovery_direction(const world::RobotState& state,
                                         double goal_bearing_world,
                                         const world::LocalGrid& elev,
                                         const FilterConfig& cfg,
                                         const RecoveryConfig& rec = {});

}  // namespace semnav::slope

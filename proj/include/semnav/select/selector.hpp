#pragma once
// Semantic trajectory selection: fuse class probability maps into a cost
// image via per-pixel argmax, project candidate waypoints through the
// camera, score them with a discounted occlusion-masked semantic sum plus a
// geometric goal term, and pick the argmin.

#include <optional>
#include <string>
#include <vector>

#include "semnav/trajectory.hpp"
#include "semnav/world/sensors.hpp"
#include "semnav/world/world.hpp"

namespace semnav::select {

struct ClassCostTable {
  struct Entry {
    std::string name;
    double cost = 0;
  };
  std::vector<Entry> entries;

  static ClassCostTable defaults();
  void validate() const;  // unique names, costs >= 0
  std::optional<size_t> find(const std::string& name) const;
  std::vector<std::string> names() const;
};

struct SemanticCostMap {
  int width = 0, height = 0;
  std::vector<double> cost;
  double timestamp = 0;

  double at(int u, int v) const {
    return cost[static_cast<size_t>(v) * static_cast<size_t>(width) + static_cast<size_t>(u)];
  }
};

// Per pixel: cost of the argmax-probability class, ties to the lowest index.
// Map order must match table order.
SemanticCostMap build_costmap(const world::ClassProbMaps& maps, const ClassCostTable& table);

struct SelectorConfig {
  double gamma = 0.8;
  double alpha1 = 2.0;
  double alpha2 = 0.2;
  double c_u = 2.0;    // occlusion / not-visible penalty
  double t_occ = 2.0;  // mask threshold: cost above this is treated as occluder
};

struct ProjectedWaypoint {
  double u = 0, v = 0;  // pixel coordinates, valid when visible
  bool visible = false; // in front of the camera and inside the frame
};

// Waypoints projected at ground height (z = 0 in the robot frame).
std::vector<ProjectedWaypoint> project_trajectory(const Trajectory& traj,
                                                  const world::CameraModel& cam);

struct WaypointScore {
  int exponent = 0;       // discount exponent j (1-based)
  bool visible = false;
  bool masked = false;    // cost above t_occ
  double pixel_cost = 0;  // raw map value when visible
  double contribution = 0;
};

struct SemanticScore {
  double total = 0;
  std::vector<WaypointScore> waypoints;
};

// J = sum_j gamma^j [ I_c(p_j) 1{unmasked} + C_u 1{masked} ]; waypoints
// outside the view contribute C_u like occluded ones.
SemanticScore score_semantic(const std::vector<ProjectedWaypoint>& projected,
                             const SemanticCostMap& costmap, const SelectorConfig& cfg);

// One waypoint's contribution given its state; re-scoring reuses this with
// the waypoint's original exponent.
double waypoint_contribution(bool visible, double pixel_cost, int exponent,
                             const SelectorConfig& cfg);

double goal_cost(double distance, double theta_end, const SelectorConfig& cfg);

// theta_end: angle between the final segment direction and the bearing from
// the final waypoint to the goal (zero when they coincide).
double score_goal(const Trajectory& traj, const Vec2& goal_robot, const SelectorConfig& cfg);

struct Selection {
  int index = -1;
  double best_cost = 0;
  std::vector<double> joint_costs;
};

std::optional<Selection> select_best(const std::vector<Trajectory>& feasible,
                                     const SemanticCostMap& costmap,
                                     const world::CameraModel& cam, const Vec2& goal_robot,
                                     const SelectorConfig& cfg);

}  // namespace semnav::select

#pragma once
// Grid planner over the world's class grid: 8-connected A* with soft-terrain
// edge multipliers, strict cells blocked. Used for ground-truth path
// generation and for reference rollouts.

#include <optional>
#include <vector>

#include "semnav/trajectory.hpp"
#include "semnav/world/world.hpp"

namespace semnav::data {

struct PlannerConfig {
  double soft_mult = 3.0;  // edge-cost multiplier on non-preferred soft cells
  double inflate = 0.7;    // clearance around strict cells (footprint + corner cut)
};

// Strict-or-near-strict mask: true where a strict cell lies within `inflate`
// (box metric) of the cell.
std::vector<uint8_t> inflated_blocked_mask(const world::WorldModel& world, double inflate);

// World-frame path at cell centers from start to goal, start cell included.
std::optional<std::vector<Vec2>> plan_path(const world::WorldModel& world, Vec2 start,
                                           Vec2 goal, const PlannerConfig& cfg = {});

double path_length(const std::vector<Vec2>& path);

// Geodesic cost-to-reach for every cell (same edge model as plan_path);
// unreachable cells get infinity. Row-major by cell index.
std::vector<double> reachability_costs(const world::WorldModel& world, Vec2 start,
                                       const PlannerConfig& cfg = {});

}  // namespace semnav::data

#pragma once
// Navigation metrics: success rate, success weighted by path length, executed
// path traversability (strict and soft readings), non-traversable rate of
// raw generated waypoints, time ratio and recovery counts.

#include <vector>

#include "semnav/exec/episode.hpp"
#include "semnav/select/selector.hpp"

namespace semnav::eval {

struct EpisodeMetrics {
  bool success = false, collision = false, timeout = false;
  double path_length = 0, ref_length = 0;
  double spl_contribution = 0;
  double ept_strict = 0, ept_soft = 0;  // percent
  double ntr = 0;                       // percent
  double t_nav = 0, t_ref = 0, t_ratio = 0;
  int recoveries = 0, switches = 0;
  int generated_waypoints = 0, nonpreferred_waypoints = 0;
};

// SPL = (1/N) sum S_i d_i / max(p_i, d_i); rejects empty input.
double compute_spl(const std::vector<EpisodeMetrics>& episodes);

struct EptResult {
  double strict_pct = 0;  // preferred cells only (cost 0)
  double soft_pct = 0;    // cost <= T_occ counts as within soft zones
};
EptResult compute_ept(const std::vector<world::RobotState>& states,
                      const world::WorldModel& world, const select::ClassCostTable& table,
                      double t_occ = 2.0);

// percent of generated waypoints on cells with nonzero cost (or off-world);
// rejects an empty stream.
double compute_ntr(const std::vector<std::vector<Vec2>>& waypoints_per_tick,
                   const world::WorldModel& world, const select::ClassCostTable& table);

// cost of the world cell's class under the table; absent classes read as
// pavement (unqueried classes behave like the preferred surface)
double cell_cost(const world::WorldModel& world, double x, double y,
                 const select::ClassCostTable& table);

EpisodeMetrics evaluate_episode(const exec::EpisodeResult& episode,
                                const world::WorldModel& world,
                                const select::ClassCostTable& table, double t_occ = 2.0);

}  // namespace semnav::eval

#include "semnav/eval/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace semnav::eval {

double compute_spl(const std::vector<EpisodeMetrics>& episodes) {
  if (episodes.empty()) throw std::invalid_argument("compute_spl: no episodes");
  double acc = 0;
  for (const auto& e : episodes) acc += e.spl_contribution;
  return acc / static_cast<double>(episodes.size());
}

double cell_cost(const world::WorldModel& w, double x, double y,
                 const select::ClassCostTable& table) {
  if (!w.in_bounds(x, y)) return table.entries.empty() ? 0.0 : 1e9;
  const std::string& name = w.registry.def(w.class_at(x, y)).name;
  const auto idx = table.find(name);
  return idx ? table.entries[*idx].cost : 0.0;
}

EptResult compute_ept(const std::vector<world::RobotState>& states,
                      const world::WorldModel& w, const select::ClassCostTable& table,
                      double t_occ) {
  if (states.empty()) return {};
  int strict_ok = 0, soft_ok = 0;
  for (const auto& s : states) {
    const double c = cell_cost(w, s.x, s.y, table);
    if (c == 0.0) ++strict_ok;
    if (c <= t_occ) ++soft_ok;
  }
  const double n = static_cast<double>(states.size());
  return {100.0 * strict_ok / n, 100.0 * soft_ok / n};
}

double compute_ntr(const std::vector<std::vector<Vec2>>& waypoints_per_tick,
                   const world::WorldModel& w, const select::ClassCostTable& table) {
  int64_t total = 0, bad = 0;
  for (const auto& tick : waypoints_per_tick)
    for (const Vec2& p : tick) {
      ++total;
      if (cell_cost(w, p.x, p.y, table) > 0.0) ++bad;
    }
  if (total == 0) throw std::invalid_argument("compute_ntr: zero generated waypoints");
  return 100.0 * static_cast<double>(bad) / static_cast<double>(total);
}

EpisodeMetrics evaluate_episode(const exec::EpisodeResult& ep, const world::WorldModel& w,
                                const select::ClassCostTable& table, double t_occ) {
  EpisodeMetrics m;
  m.success = ep.success;
  m.collision = ep.collision;
  m.timeout = ep.timeout;
  m.path_length = ep.path_length;
  m.ref_length = ep.ref_length;
  m.spl_contribution =
      ep.success && std::max(ep.path_length, ep.ref_length) > 0
          ? ep.ref_length / std::max(ep.path_length, ep.ref_length)
          : (ep.success ? 1.0 : 0.0);
  const EptResult ept = compute_ept(ep.states, w, table, t_occ);
  m.ept_strict = ept.strict_pct;
  m.ept_soft = ept.soft_pct;
  int64_t total = 0, bad = 0;
  for (const auto& tick : ep.generated_waypoints)
    for (const Vec2& p : tick) {
      ++total;
      if (cell_cost(w, p.x, p.y, table) > 0.0) ++bad;
    }
  m.generated_waypoints = static_cast<int>(total);
  m.nonpreferred_waypoints = static_cast<int>(bad);
  m.ntr = total > 0 ? 100.0 * static_cast<double>(bad) / static_cast<double>(total) : 0.0;
  m.t_nav = ep.nav_time;
  m.t_ref = ep.ref_time;
  m.t_ratio = ep.ref_time > 0 ? ep.nav_time / ep.ref_time : 0.0;
  m.recoveries = ep.recoveries;
  m.switches = ep.switches;
  return m;
}

}  // namespace semnav::eval

#include "semnav/select/selector.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace semnav::select {

ClassCostTable ClassCostTable::defaults() {
  ClassCostTable t;
  t.entries = {{"pavement", 0}, {"tree", 3}, {"grass", 2}, {"wall", 3},
               {"stairs", 3},   {"person", 3}, {"hole", 3}, {"sky", 4}};
  return t;
}

void ClassCostTable::validate() const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (e.cost < 0) throw std::invalid_argument("ClassCostTable: negative cost for " + e.name);
    if (!seen.insert(e.name).second)
      throw std::invalid_argument("ClassCostTable: duplicate class " + e.name);
  }
}

std::optional<size_t> ClassCostTable::find(const std::string& name) const {
  for (size_t i = 0; i < entries.size(); ++i)
    if (entries[i].name == name) return i;
  return std::nullopt;
}

std::vector<std::string> ClassCostTable::names() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.name);
  return out;
}

SemanticCostMap build_costmap(const world::ClassProbMaps& maps, const ClassCostTable& table) {
  table.validate();
  if (table.entries.empty() || maps.maps.empty())
    throw std::invalid_argument("build_costmap: empty class set");
  if (maps.names.size() != table.entries.size())
    throw std::invalid_argument("build_costmap: map count disagrees with cost table");
  for (size_t i = 0; i < maps.names.size(); ++i)
    if (maps.names[i] != table.entries[i].name)
      throw std::invalid_argument("build_costmap: map order mismatch at '" + maps.names[i] +
                                  "' vs '" + table.entries[i].name + "'");
  SemanticCostMap out;
  out.width = maps.width;
  out.height = maps.height;
  out.timestamp = maps.timestamp;
  const size_t npix = static_cast<size_t>(maps.width) * static_cast<size_t>(maps.height);
  out.cost.resize(npix);
  for (size_t p = 0; p < npix; ++p) {
    size_t best = 0;
    double best_prob = maps.maps[0][p];
    for (size_t i = 1; i < maps.maps.size(); ++i)
      if (maps.maps[i][p] > best_prob) {  // strict: ties keep the lowest index
        best_prob = maps.maps[i][p];
        best = i;
      }
    out.cost[p] = table.entries[best].cost;
  }
  return out;
}

std::vector<ProjectedWaypoint> project_trajectory(const Trajectory& traj,
                                                  const world::CameraModel& cam) {
  std::vector<ProjectedWaypoint> out;
  out.reserve(traj.waypoints.size());
  for (const Vec2& w : traj.waypoints) {
    // robot-frame point at ground height
    const double p[3] = {w.x, w.y, 0.0};
    double c[3];
    for (int i = 0; i < 3; ++i)
      c[i] = cam.r[3 * i] * p[0] + cam.r[3 * i + 1] * p[1] + cam.r[3 * i + 2] * p[2] +
             cam.t[i];
    ProjectedWaypoint pw;
    if (c[2] > 0) {
      pw.u = cam.fx * c[0] / c[2] + cam.cx;
      pw.v = cam.fy * c[1] / c[2] + cam.cy;
      pw.visible = pw.u >= 0 && pw.v >= 0 && pw.u < static_cast<double>(cam.width) &&
                   pw.v < static_cast<double>(cam.height);
    }
    out.push_back(pw);
  }
  return out;
}

double waypoint_contribution(bool visible, double pixel_cost, int exponent,
                             const SelectorConfig& cfg) {
  const double discount = std::pow(cfg.gamma, exponent);
  if (!visible) return discount * cfg.c_u;
  const bool masked = pixel_cost > cfg.t_occ;
  return discount * (masked ? cfg.c_u : pixel_cost);
}

SemanticScore score_semantic(const std::vector<ProjectedWaypoint>& projected,
                             const SemanticCostMap& costmap, const SelectorConfig& cfg) {
  SemanticScore s;
  s.waypoints.reserve(projected.size());
  for (size_t i = 0; i < projected.size(); ++i) {
    const ProjectedWaypoint& pw = projected[i];
    WaypointScore ws;
    ws.exponent = static_cast<int>(i) + 1;
    ws.visible = pw.visible;
    if (pw.visible) {
      ws.pixel_cost = costmap.at(static_cast<int>(pw.u), static_cast<int>(pw.v));
      ws.masked = ws.pixel_cost > cfg.t_occ;
    }
    ws.contribution = waypoint_contribution(pw.visible, ws.pixel_cost, ws.exponent, cfg);
    s.total += ws.contribution;
    s.waypoints.push_back(ws);
  }
  return s;
}

double goal_cost(double distance, double theta_end, const SelectorConfig& cfg) {
  return cfg.alpha1 * std::log1p(distance) + cfg.alpha2 * std::fabs(theta_end) / M_PI;
}

double score_goal(const Trajectory& traj, const Vec2& goal_robot, const SelectorConfig& cfg) {
  if (traj.waypoints.empty()) throw std::invalid_argument("score_goal: empty trajectory");
  const Vec2& last = traj.waypoints.back();
  const double d = dist(last, goal_robot);
  double theta_end = 0.0;
  if (d > 1e-12) {
    const Vec2 prev =
        traj.waypoints.size() >= 2 ? traj.waypoints[traj.waypoints.size() - 2] : Vec2{0, 0};
    const double seg = std::atan2(last.y - prev.y, last.x - prev.x);
    const double bearing = std::atan2(goal_robot.y - last.y, goal_robot.x - last.x);
    theta_end = world::wrap_angle(bearing - seg);
  }
  return goal_cost(d, theta_end, cfg);
}

std::optional<Selection> select_best(const std::vector<Trajectory>& feasible,
                                     const SemanticCostMap& costmap,
                                     const world::CameraModel& cam, const Vec2& goal_robot,
                                     const SelectorConfig& cfg) {
  if (feasible.empty()) return std::nullopt;
  Selection sel;
  sel.joint_costs.reserve(feasible.size());
  for (size_t i = 0; i < feasible.size(); ++i) {
    const SemanticScore ss = score_semantic(project_trajectory(feasible[i], cam), costmap, cfg);
    const double j = ss.total + score_goal(feasible[i], goal_robot, cfg);
    sel.joint_costs.push_back(j);
    if (sel.index < 0 || j < sel.best_cost) {  // strict: ties keep the earliest
      sel.index = static_cast<int>(i);
      sel.best_cost = j;
    }
  }
  return sel;
}

}  // namespace semnav::select

#include "semnav/exec/executive.hpp"

#include <cmath>
#include <stdexcept>

namespace semnav::exec {

void ExecutiveConfig::validate() const {
  if (!(f_gen > 0) || f_clip < f_gen)
    throw std::invalid_argument("ExecutiveConfig: need f_clip >= f_gen > 0");
  if (!(epsilon > 0) && !switch_every_tick)
    throw std::invalid_argument("ExecutiveConfig: hysteresis epsilon must be > 0");
}

Executive::Executive(ExecutiveConfig cfg, CandidateSource& source, world::CameraModel cam,
                     select::ClassCostTable table, Vec2 goal_world)
    : cfg_(cfg), source_(source), cam_(std::move(cam)), table_(std::move(table)),
      goal_(goal_world) {
  cfg_.validate();
  table_.validate();
}

void Executive::rescore_future(const world::RobotState& state) {
  if (!plan_ || !costmap_) return;
  for (auto& e : plan_->ledger) {
    if (e.frozen) continue;
    double rx, ry;
    world::world_to_robot(state, e.world.x, e.world.y, rx, ry);
    Trajectory probe;
    probe.waypoints = {{rx, ry}};
    const auto proj = select::project_trajectory(probe, cam_);
    e.visible = proj[0].visible;
    e.pixel_cost = 0;
    e.masked = false;
    if (e.visible) {
      e.pixel_cost = costmap_->at(static_cast<int>(proj[0].u), static_cast<int>(proj[0].v));
      e.masked = e.pixel_cost > cfg_.selector.t_occ;
    }
    e.contribution =
        select::waypoint_contribution(e.visible, e.pixel_cost, e.exponent, cfg_.selector);
  }
}

void Executive::tick_perception(const world::ClassProbMaps& maps,
                                const world::RobotState& state) {
  costmap_ = select::build_costmap(maps, table_);
  rescore_future(state);
}

void Executive::adopt(const Trajectory& robot_traj, const select::SemanticScore& score,
                      double goal_term, const world::RobotState& state, double sim_time) {
  ActivePlan plan;
  plan.goal_term = goal_term;
  plan.adopted_at = sim_time;
  plan.ledger.reserve(robot_traj.waypoints.size());
  for (size_t i = 0; i < robot_traj.waypoints.size(); ++i) {
    LedgerEntry e;
    double wx, wy;
    world::robot_to_world(state, robot_traj.waypoints[i].x, robot_traj.waypoints[i].y, wx,
                          wy);
    e.world = {wx, wy};
    const auto& ws = score.waypoints[i];
    e.exponent = ws.exponent;
    e.visible = ws.visible;
    e.masked = ws.masked;
    e.pixel_cost = ws.pixel_cost;
    e.contribution = ws.contribution;
    plan.ledger.push_back(e);
  }
  plan_ = std::move(plan);
  wants_generation_ = false;
}

GenTickStats Executive::tick_generation(const GenerationContext& ctx,
                                        const world::LocalGrid& elev) {
  GenTickStats stats;
  wants_generation_ = false;  // the request is satisfied by this attempt
  std::vector<Trajectory> raw = source_.generate(ctx);
  stats.n_raw = static_cast<int>(raw.size());
  stats.raw_world.reserve(raw.size());
  for (const auto& t : raw) {
    Trajectory w = t;
    for (auto& p : w.waypoints) {
      double wx, wy;
      world::robot_to_world(ctx.state, p.x, p.y, wx, wy);
      p = {wx, wy};
    }
    stats.raw_world.push_back(std::move(w));
  }

  const slope::FilterResult filt = slope::filter_collisions(raw, elev, cfg_.slope);
  stats.n_feasible = static_cast<int>(filt.feasible.size());

  if (filt.feasible.empty()) {
    stats.empty = true;
    ++empty_streak_;
    if (empty_streak_ >= cfg_.recovery_after) {
      ++recoveries_;
      stats.recovery_invoked = true;
      empty_streak_ = 0;
      const double bearing =
          std::atan2(goal_.y - ctx.state.y, goal_.x - ctx.state.x);
      stats.recovery_heading = slope::recovery_direction(ctx.state, bearing, elev, cfg_.slope);
      rotate_target_ = stats.recovery_heading;
    }
    return stats;
  }
  empty_streak_ = 0;

  if (!costmap_)
    throw std::logic_error("Executive: generation before the first perception tick");

  std::vector<Trajectory> feasible;
  feasible.reserve(filt.feasible.size());
  for (int idx : filt.feasible) feasible.push_back(raw[static_cast<size_t>(idx)]);

  double grx, gry;
  world::world_to_robot(ctx.state, goal_.x, goal_.y, grx, gry);
  const Vec2 goal_robot{grx, gry};
  const auto sel = select::select_best(feasible, *costmap_, cam_, goal_robot, cfg_.selector);
  stats.best_cost = sel->best_cost;

  const Trajectory& best = feasible[static_cast<size_t>(sel->index)];
  const auto score =
      select::score_semantic(select::project_trajectory(best, cam_), *costmap_, cfg_.selector);
  const double goal_term = select::score_goal(best, goal_robot, cfg_.selector);

  if (!plan_ || plan_->exhausted()) {
    // first adoption (or replacing a spent plan) is unconditional, not a switch
    adopt(best, score, goal_term, ctx.state, ctx.state.t);
    stats.adopted = true;
    return stats;
  }
  stats.current_cost = plan_->running_cost();
  const bool take =
      should_switch(sel->best_cost, stats.current_cost, cfg_.epsilon, cfg_.switch_every_tick);
  if (take) {
    adopt(best, score, goal_term, ctx.state, ctx.state.t);
    stats.adopted = true;
    stats.switched = true;
    ++switches_;
  }
  return stats;
}

world::VelocityCommand Executive::follow(const world::RobotState& state) {
  // recovery rotation takes precedence
  if (rotate_target_) {
    const double err = world::wrap_angle(*rotate_target_ - state.heading);
    if (std::fabs(err) < 5.0 * M_PI / 180.0) {
      rotate_target_.reset();
      wants_generation_ = true;
      return {0, 0};
    }
    return {0, err > 0 ? cfg_.rotate_speed : -cfg_.rotate_speed};
  }
  if (!plan_) return {0, 0};  // startup: the scheduled tick will arrive
  // freeze waypoints the robot has reached
  auto& plan = *plan_;
  while (plan.next_waypoint < static_cast<int>(plan.ledger.size())) {
    auto& e = plan.ledger[static_cast<size_t>(plan.next_waypoint)];
    if (std::hypot(e.world.x - state.x, e.world.y - state.y) <= cfg_.waypoint_reached) {
      e.frozen = true;
      ++plan.next_waypoint;
    } else {
      break;
    }
  }
  if (plan.exhausted()) {
    wants_generation_ = true;
    return {0, 0};
  }
  // lookahead point: first remaining waypoint at least `lookahead` away
  Vec2 target = plan.ledger.back().world;
  for (int i = plan.next_waypoint; i < static_cast<int>(plan.ledger.size()); ++i) {
    const Vec2& w = plan.ledger[static_cast<size_t>(i)].world;
    if (std::hypot(w.x - state.x, w.y - state.y) >= cfg_.lookahead) {
      target = w;
      break;
    }
  }
  double rx, ry;
  world::world_to_robot(state, target.x, target.y, rx, ry);
  const double alpha = std::atan2(ry, rx);
  if (std::fabs(alpha) > M_PI / 2.0)  // target behind: rotate in place
    return {0, alpha > 0 ? cfg_.rotate_speed : -cfg_.rotate_speed};
  const double l = std::max(std::hypot(rx, ry), 1e-6);
  const double curvature = 2.0 * std::sin(alpha) / l;
  const double v = cfg_.cruise_speed * std::max(0.25, std::cos(alpha));
  return {v, curvature * v};
}

}  // namespace semnav::exec

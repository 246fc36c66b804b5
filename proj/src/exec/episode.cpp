#include "semnav/exec/episode.hpp"

#include <cmath>
#include <deque>

#include <json.hpp>

#include "semnav/data/planner.hpp"
#include "semnav/seg/pointseg.hpp"

namespace semnav::exec {

namespace {

using nlohmann::json;

json state_json(const world::RobotState& s) {
  return json::array({s.t, s.x, s.y, s.heading, s.v});
}

}  // namespace

PathTrace trace_path(const world::WorldModel& w, const std::vector<Vec2>& path, Vec2 goal,
                     const EpisodeConfig& cfg) {
  PathTrace out;
  if (path.empty()) return out;
  world::RobotState s;
  s.x = path.front().x;
  s.y = path.front().y;
  s.heading = std::atan2(path.back().y - s.y, path.back().x - s.x);
  out.states.push_back(s);
  size_t next = 0;
  const double hard_cap = 600.0;
  while (s.t < hard_cap) {
    if (std::hypot(goal.x - s.x, goal.y - s.y) <= cfg.exec.goal_tolerance) {
      out.reached = true;
      break;
    }
    // track progress by nearest-point projection (monotonic, windowed) so a
    // deviating robot re-acquires the path instead of circling a stale target
    size_t best = next;
    double best_d = std::hypot(path[next].x - s.x, path[next].y - s.y);
    for (size_t i = next; i < std::min(path.size(), next + 60); ++i) {
      const double d = std::hypot(path[i].x - s.x, path[i].y - s.y);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    next = best;
    while (next < path.size() &&
           std::hypot(path[next].x - s.x, path[next].y - s.y) < cfg.exec.waypoint_reached)
      ++next;
    if (next >= path.size()) break;
    Vec2 target = path.back();
    for (size_t i = next; i < path.size(); ++i)
      if (std::hypot(path[i].x - s.x, path[i].y - s.y) >= cfg.exec.lookahead) {
        target = path[i];
        break;
      }
    double rx, ry;
    world::world_to_robot(s, target.x, target.y, rx, ry);
    const double alpha = std::atan2(ry, rx);
    world::VelocityCommand cmd;
    if (std::fabs(alpha) > M_PI / 2.0) {
      cmd = {0, alpha > 0 ? cfg.exec.rotate_speed : -cfg.exec.rotate_speed};
    } else {
      const double l = std::max(std::hypot(rx, ry), 1e-6);
      cmd.v = cfg.exec.cruise_speed * std::max(0.25, std::cos(alpha));
      cmd.omega = 2.0 * std::sin(alpha) / l * cmd.v;
    }
    const auto res = world::step_robot(w, s, cmd, cfg.dt_sim);
    out.length += std::hypot(res.state.x - s.x, res.state.y - s.y);
    s = res.state;
    out.states.push_back(s);
    if (res.collision) break;
  }
  return out;
}

ReferenceRollout run_reference(const world::WorldModel& w, const EpisodeConfig& cfg) {
  const auto path = data::plan_path(w, {w.start_x, w.start_y}, {w.goal_x, w.goal_y});
  if (!path) return {};
  PathTrace trace = trace_path(w, *path, {w.goal_x, w.goal_y}, cfg);
  return {trace.reached, trace.length,
          trace.states.empty() ? 0.0 : trace.states.back().t};
}

EpisodeResult run_episode_with_source(const world::WorldModel& w, CandidateSource& source,
                                      const gen::ModelConfig& mcfg, const EpisodeConfig& cfg,
                                      uint64_t seed, const LogSink* log) {
  Rng rng(seed);
  auto emit = [&](const json& j) {
    if (log) (*log)(j.dump());
  };

  const ReferenceRollout ref = run_reference(w, cfg);
  EpisodeResult res;
  res.ref_length = ref.length;
  res.ref_time = ref.duration;
  const double timeout =
      std::max(cfg.min_timeout, cfg.timeout_factor * (ref.reached ? ref.duration : 120.0));

  world::CameraModel cam =
      world::forward_camera(cfg.camera_width, cfg.camera_height, cfg.camera_hfov,
                            cfg.camera_mount);
  Executive executive(cfg.exec, source, cam, cfg.cost_table, {w.goal_x, w.goal_y});
  std::vector<std::string> queries;
  for (const auto& e : cfg.cost_table.entries) queries.push_back(e.name);

  world::RobotState s;
  s.x = w.start_x;
  s.y = w.start_y;
  s.heading = std::atan2(w.goal_y - s.y, w.goal_x - s.x);

  emit(json{{"event", "header"},
            {"world_seed", w.seed},
            {"seed", seed},
            {"ref_length", ref.length},
            {"ref_time", ref.duration},
            {"timeout", timeout},
            {"epsilon", cfg.exec.epsilon},
            {"theta_max", cfg.exec.slope.theta_max},
            {"d_foot", cfg.exec.slope.d_foot}});

  // capture ring buffers, pre-filled so the bundle is valid at t = 0
  std::deque<world::PointCloud> clouds;
  std::deque<world::RobotState> snapshots;
  auto capture = [&](uint64_t cap_seed) {
    world::PointCloud raw = world::sample_pointcloud(w, s, mcfg.n_points, cap_seed, cfg.lidar);
    clouds.push_back(seg::preprocess_cloud(raw, mcfg.seg));
    snapshots.push_back(s);
    if (static_cast<int>(clouds.size()) > std::max(mcfg.n_lidar, mcfg.n_history)) {
      clouds.pop_front();
      snapshots.pop_front();
    }
  };

  auto build_bundle = [&]() {
    gen::ObservationBundle obs;
    // most recent n_lidar clouds, padded with the oldest available
    for (int i = mcfg.n_lidar - 1; i >= 0; --i) {
      const int idx = std::max(0, static_cast<int>(clouds.size()) - 1 - i);
      obs.lidar.push_back(clouds[static_cast<size_t>(idx)]);
    }
    for (int i = mcfg.n_history - 1; i >= 0; --i) {
      const int idx = std::max(0, static_cast<int>(snapshots.size()) - 1 - i);
      const world::RobotState& snap = snapshots[static_cast<size_t>(idx)];
      double rx, ry;
      world::world_to_robot(s, snap.x, snap.y, rx, ry);
      const double vwx = snap.v * std::cos(snap.heading), vwy = snap.v * std::sin(snap.heading);
      const double c = std::cos(s.heading), sn = std::sin(s.heading);
      obs.history.push_back({rx, ry, (c * vwx + sn * vwy) / mcfg.v_max,
                             (-sn * vwx + c * vwy) / mcfg.v_max});
    }
    const double dxg = w.goal_x - s.x, dyg = w.goal_y - s.y;
    obs.goal_rho = std::hypot(dxg, dyg);
    obs.goal_theta = world::wrap_angle(std::atan2(dyg, dxg) - s.heading);
    return obs;
  };

  const double eps_t = 1e-9;
  double next_capture = 0, next_perception = 0, next_generation = 0;
  double last_gen_attempt = -1e9;
  int step_count = 0;
  res.states.push_back(s);

  // immediate success when the goal sits on the start pose
  if (std::hypot(w.goal_x - s.x, w.goal_y - s.y) <= cfg.exec.goal_tolerance) {
    res.success = true;
    emit(json{{"event", "done"}, {"outcome", "success"}, {"t", 0.0}, {"path_length", 0.0}});
    res.recoveries = 0;
    return res;
  }

  while (s.t < timeout + eps_t) {
    if (s.t + eps_t >= next_capture) {
      capture(rng.fork(1000 + step_count).next_u64());
      next_capture += cfg.capture_interval;
    }
    if (s.t + eps_t >= next_perception) {
      world::RenderNoise nz = cfg.noise;
      nz.seed = rng.fork(2000 + step_count).next_u64();
      const auto maps = world::render_semantics(w, s, cam, queries, nz);
      executive.tick_perception(maps, s);
      ++res.perception_ticks;
      emit(json{{"event", "perception"},
                {"t", s.t},
                {"running_cost", executive.plan() ? executive.plan()->running_cost() : -1.0}});
      next_perception += 1.0 / cfg.exec.f_clip;
    }
    const bool scheduled_gen = s.t + eps_t >= next_generation;
    // an exhausted plan requests an immediate tick, rate-limited to the
    // capture cadence; generation pauses while the recovery rotation runs
    const bool immediate_gen =
        executive.wants_generation() && s.t - last_gen_attempt >= cfg.capture_interval;
    if (scheduled_gen) next_generation += 1.0 / cfg.exec.f_gen;
    if ((scheduled_gen || immediate_gen) && !executive.rotating()) {
      last_gen_attempt = s.t;
      gen::ObservationBundle obs = build_bundle();
      GenerationContext ctx;
      ctx.state = s;
      ctx.obs = &obs;
      ctx.seed = rng.fork(3000 + step_count).next_u64();
      const auto elev = world::crop_elevation(w, s, cfg.crop);
      const auto stats = executive.tick_generation(ctx, elev);
      ++res.generation_ticks;
      std::vector<Vec2> raw_wps;
      for (const auto& t : stats.raw_world)
        raw_wps.insert(raw_wps.end(), t.waypoints.begin(), t.waypoints.end());
      res.generated_waypoints.push_back(raw_wps);
      if (stats.adopted && executive.plan()) {
        std::vector<Vec2> plan_wps;
        for (const auto& e : executive.plan()->ledger) plan_wps.push_back(e.world);
        res.adopted_plans.push_back(std::move(plan_wps));
      }
      if (stats.recovery_invoked) res.recovery_positions.push_back({s.x, s.y});
      json gj{{"event", "generation"}, {"t", s.t},          {"raw", stats.n_raw},
              {"feasible", stats.n_feasible}, {"adopted", stats.adopted},
              {"switched", stats.switched},   {"empty", stats.empty}};
      if (stats.recovery_invoked) {
        gj["recovery"] = true;
        gj["recovery_heading"] =
            stats.recovery_heading ? json(*stats.recovery_heading) : json(nullptr);
        emit(json{{"event", "recovery"}, {"t", s.t}});
      }
      emit(gj);
    }

    const world::VelocityCommand cmd = executive.follow(s);
    const auto stepped = world::step_robot(w, s, cmd, cfg.dt_sim);
    res.path_length += std::hypot(stepped.state.x - s.x, stepped.state.y - s.y);
    s = stepped.state;
    res.states.push_back(s);
    emit(json{{"event", "state"}, {"s", state_json(s)}});
    ++step_count;
    if (stepped.collision) {
      res.collision = true;
      break;
    }
    if (std::hypot(w.goal_x - s.x, w.goal_y - s.y) <= cfg.exec.goal_tolerance) {
      res.success = true;
      break;
    }
  }
  res.nav_time = s.t;
  res.timeout = !res.success && !res.collision;
  res.recoveries = executive.recovery_count();
  res.switches = executive.switch_count();
  emit(json{{"event", "done"},
            {"outcome", res.success ? "success" : (res.collision ? "collision" : "timeout")},
            {"t", s.t},
            {"path_length", res.path_length},
            {"recoveries", res.recoveries},
            {"switches", res.switches}});
  return res;
}

EpisodeResult run_episode(const world::WorldModel& w, const gen::TrajectoryCvae& model,
                          const EpisodeConfig& cfg, uint64_t seed, const LogSink* log) {
  CvaeSource source(model, cfg.k_samples, cfg.filters);
  return run_episode_with_source(w, source, model.config(), cfg, seed, log);
}

}  // namespace semnav::exec

#pragma once
// Closed-loop episode on the simulated clock: sensor captures, perception
// and generation ticks, the follower, and termination on success, collision
// or timeout. Everything that metrics need is collected in the result; the
// optional JSON-lines log records one event per line.

#include <functional>
#include <optional>
#include <string>

#include "semnav/exec/executive.hpp"
#include "semnav/world/worldgen.hpp"

namespace semnav::exec {

struct EpisodeConfig {
  ExecutiveConfig exec;
  int k_samples = 50;
  gen::SampleFilters filters;
  double dt_sim = 0.1;
  double capture_interval = 0.5;
  double timeout_factor = 4.0;  // times the reference rollout duration
  double min_timeout = 40.0;
  int camera_width = 64, camera_height = 48;
  double camera_hfov = 90.0, camera_mount = 0.6;
  world::LidarConfig lidar;
  world::RenderNoise noise;
  select::ClassCostTable cost_table = select::ClassCostTable::defaults();
  world::ElevationCropConfig crop;
};

struct EpisodeResult {
  bool success = false, collision = false, timeout = false;
  double path_length = 0, nav_time = 0;
  double ref_length = 0, ref_time = 0;
  int recoveries = 0, switches = 0, generation_ticks = 0, perception_ticks = 0;
  std::vector<world::RobotState> states;                 // one per sim step
  std::vector<std::vector<Vec2>> generated_waypoints;   // per tick, world frame
  std::vector<std::vector<Vec2>> adopted_plans;          // world frame, per adoption
  std::vector<Vec2> recovery_positions;
};

// Pure-pursuit rollout along the soft-cost grid path; supplies the reference
// length/time for SPL, T_ratio and the timeout.
struct ReferenceRollout {
  bool reached = false;
  double length = 0, duration = 0;
};
ReferenceRollout run_reference(const world::WorldModel& world, const EpisodeConfig& cfg);

// Full state trace of the same follower along a fixed world-frame path
// toward `goal` (also used by the dataset pipeline to produce run traces).
struct PathTrace {
  std::vector<world::RobotState> states;  // one per sim step, initial included
  bool reached = false;
  double length = 0;
};
PathTrace trace_path(const world::WorldModel& world, const std::vector<Vec2>& path, Vec2 goal,
                     const EpisodeConfig& cfg);

using LogSink = std::function<void(const std::string& line)>;

EpisodeResult run_episode(const world::WorldModel& world, const gen::TrajectoryCvae& model,
                          const EpisodeConfig& cfg, uint64_t seed,
                          const LogSink* log = nullptr);

// Same loop with an arbitrary candidate source (used by tests and ablations).
EpisodeResult run_episode_with_source(const world::WorldModel& world, CandidateSource& source,
                                      const gen::ModelConfig& model_cfg,
                                      const EpisodeConfig& cfg, uint64_t seed,
                                      const LogSink* log = nullptr);

}  // namespace semnav::exec

#pragma once
// Training-data pipeline: ground-truth path fans from planner rollouts to
// reachable frontiers, endpoint-diversity filtering, slicing of driven runs
// into observation/ground-truth samples, and on-disk serialization.

#include <optional>
#include <string>
#include <vector>

#include "semnav/data/planner.hpp"
#include "semnav/exec/episode.hpp"
#include "semnav/gen/train.hpp"

namespace semnav::data {

struct DatasetConfig {
  double r_max = 15.0;
  double fde_min = 0.5;
  double slice_interval = 0.5;
  double warmup = 5.0;         // slices before this are dropped
  double cruise = 1.2;         // GT resampling speed
  int m_max = 8;               // ground-truth hypotheses kept per sample
  int frontier_bearing_deg = 15;
  gen::ModelConfig model;      // geometry: N_w, clouds, history length
  world::LidarConfig lidar;
  exec::EpisodeConfig episode;  // follower parameters for run traces
  PlannerConfig planner;
};

// Robot-frame ground-truth trajectories from `pose` to reachable frontier
// cells at euclidean distance in [0.9, 1.0] * r_max, one frontier per
// bearing bucket, each resampled to N_w waypoints at cruise speed.
std::vector<Trajectory> plan_ground_truth(const world::WorldModel& world,
                                          const world::RobotState& pose,
                                          const DatasetConfig& cfg);

// Greedy retention in path-length order (shortest first): keep a trajectory
// iff its endpoint is farther than fde_min from every kept endpoint.
std::vector<Trajectory> diversity_filter(const std::vector<Trajectory>& paths,
                                         double fde_min);

// Strict-obstacle occupancy around `pose` in the robot frame (the collision
// loss target).
std::vector<double> strict_obstacle_map(const world::WorldModel& world,
                                        const world::RobotState& pose, int64_t cells,
                                        double res);

// Slices one driven run trace into training samples.
std::vector<gen::TrainingSample> slice_run(const world::WorldModel& world,
                                           const exec::PathTrace& trace, Vec2 run_goal,
                                           const DatasetConfig& cfg, uint64_t seed);

// Full generation: n_runs start/goal pairs (run 0 uses the world anchors),
// oracle rollout, slice, concatenate.
std::vector<gen::TrainingSample> generate_dataset(const world::WorldModel& world, int n_runs,
                                                  const DatasetConfig& cfg, uint64_t seed);

// ---------------------------------------------------------------------------
// Serialization: one binary file per sample (JSON header + raw payloads) and
// a manifest carrying counts and the config hash. read(write(x)) == x.
// ---------------------------------------------------------------------------

uint64_t dataset_config_hash(const DatasetConfig& cfg);

void write_dataset(const std::string& dir, const std::vector<gen::TrainingSample>& samples,
                   const DatasetConfig& cfg);
std::vector<gen::TrainingSample> read_dataset(const std::string& dir);

}  // namespace semnav::data

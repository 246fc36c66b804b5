#pragma once
// Closed-loop navigation state machine. Generation and perception run at
// decoupled rates on the simulated clock: perception re-scores the future
// waypoints of the running plan against the newest costmap (traversed
// waypoints stay frozen at their last value), generation proposes candidates
// and switches plans only when the newcomer beats the running cost by the
// hysteresis margin. Repeated empty candidate sets trigger the in-place
// recovery rotation.

#include <memory>
#include <optional>
#include <vector>

#include "semnav/gen/model.hpp"
#include "semnav/select/selector.hpp"
#include "semnav/slope/filter.hpp"
#include "semnav/trajectory.hpp"
#include "semnav/world/sensors.hpp"
#include "semnav/world/world.hpp"

namespace semnav::exec {

struct ExecutiveConfig {
  double f_gen = 0.5;
  double f_clip = 2.5;
  double epsilon = 0.5;  // hysteresis margin; mandatory in every report
  int recovery_after = 2;
  double lookahead = 1.5;
  double goal_tolerance = 5.0;
  double waypoint_reached = 0.5;
  double cruise_speed = 1.2;
  double rotate_speed = 0.8;
  bool switch_every_tick = false;  // synchronous-update variant
  select::SelectorConfig selector;
  slope::FilterConfig slope;

  void validate() const;
};

struct GenerationContext {
  world::RobotState state;
  const gen::ObservationBundle* obs = nullptr;
  uint64_t seed = 0;
};

// Hysteresis rule: adopt the newcomer only when it beats the running cost by
// more than epsilon; the synchronous variant adopts unconditionally (the
// epsilon = -inf limit).
inline bool should_switch(double j_new, double j_curr, double epsilon, bool every_tick) {
  return every_tick || j_new < j_curr - epsilon;
}

// Candidate provider: the model-backed source in production, synthetic
// fixtures in tests.
class CandidateSource {
 public:
  virtual ~CandidateSource() = default;
  // robot-frame candidates
  virtual std::vector<Trajectory> generate(const GenerationContext& ctx) = 0;
};

class CvaeSource : public CandidateSource {
 public:
  CvaeSource(const gen::TrajectoryCvae& model, int k, gen::SampleFilters filters = {})
      : model_(model), k_(k), filters_(filters) {}
  std::vector<Trajectory> generate(const GenerationContext& ctx) override {
    if (!ctx.obs) throw std::invalid_argument("CvaeSource: observation bundle required");
    return model_.sample_trajectories(*ctx.obs, k_, ctx.seed, filters_);
  }

 private:
  const gen::TrajectoryCvae& model_;
  int k_;
  gen::SampleFilters filters_;
};

struct LedgerEntry {
  Vec2 world;             // waypoint in the world frame
  int exponent = 1;       // discount exponent fixed at adoption
  bool frozen = false;    // traversed: contribution no longer changes
  double contribution = 0;
  bool visible = false;
  bool masked = false;
  double pixel_cost = 0;
};

struct ActivePlan {
  std::vector<LedgerEntry> ledger;
  double goal_term = 0;  // J_goal, fixed at adoption (world-frame trajectory, static goal)
  int next_waypoint = 0;
  double adopted_at = 0;

  double running_cost() const {
    double c = goal_term;
    for (const auto& e : ledger) c += e.contribution;
    return c;
  }
  bool exhausted() const { return next_waypoint >= static_cast<int>(ledger.size()); }
};

struct GenTickStats {
  int n_raw = 0, n_feasible = 0;
  bool adopted = false;   // plan replaced or first adoption
  bool switched = false;  // replaced an existing plan
  bool empty = false;
  bool recovery_invoked = false;
  std::optional<double> recovery_heading;
  double best_cost = 0, current_cost = 0;
  std::vector<Trajectory> raw_world;  // raw candidates, world frame (for NTR)
};

class Executive {
 public:
  Executive(ExecutiveConfig cfg, CandidateSource& source, world::CameraModel cam,
            select::ClassCostTable table, Vec2 goal_world);

  void tick_perception(const world::ClassProbMaps& maps, const world::RobotState& state);
  GenTickStats tick_generation(const GenerationContext& ctx, const world::LocalGrid& elev);
  world::VelocityCommand follow(const world::RobotState& state);

  const std::optional<ActivePlan>& plan() const { return plan_; }
  const std::optional<select::SemanticCostMap>& costmap() const { return costmap_; }
  bool wants_generation() const { return wants_generation_; }
  bool rotating() const { return rotate_target_.has_value(); }
  int switch_count() const { return switches_; }
  int recovery_count() const { return recoveries_; }
  const ExecutiveConfig& config() const { return cfg_; }
  Vec2 goal() const { return goal_; }

 private:
  void rescore_future(const world::RobotState& state);
  void adopt(const Trajectory& robot_traj, const select::SemanticScore& score,
             double goal_term, const world::RobotState& state, double sim_time);

  ExecutiveConfig cfg_;
  CandidateSource& source_;
  world::CameraModel cam_;
  select::ClassCostTable table_;
  Vec2 goal_;
  std::optional<ActivePlan> plan_;
  std::optional<select::SemanticCostMap> costmap_;
  std::optional<double> rotate_target_;
  int empty_streak_ = 0;
  int switches_ = 0;
  int recoveries_ = 0;
  bool wants_generation_ = false;
};

}  // namespace semnav::exec

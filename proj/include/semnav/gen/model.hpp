#pragma once
// Trajectory CVAE with learned prior. The prior encoder fuses pooled
// point-cloud features, the polar goal and the state history into a context
// vector and latent Gaussian; the posterior encoder reads the ground-truth
// trajectory through a BiLSTM; the decoder is an autoregressive GRU over
// velocities whose integrated waypoints form the candidates. Candidate
// generation draws K latents from the prior and filters on acceleration
// limits and the traversability heatmap.

#include <array>
#include <optional>
#include <vector>

#include "semnav/ad/nn.hpp"
#include "semnav/ad/tensor.hpp"
#include "semnav/seg/heatmap.hpp"
#include "semnav/seg/pointseg.hpp"
#include "semnav/trajectory.hpp"

namespace semnav::gen {

struct ModelConfig {
  // desk-scale defaults; paper-scale: feature 256, latent 512, points 2560
  int64_t feature_size = 64;
  int64_t latent_size = 32;
  int64_t n_waypoints = 12;
  int n_lidar = 3;
  int n_history = 10;
  int n_points = 256;
  double dt = 1.0;
  double v_max = 2.0;
  double accel_limit = 0.5;

  int64_t traj_hidden = 32;
  int64_t goal_hidden = 32;
  int64_t posterior_hidden = 32;
  int64_t gru_hidden = 64;
  int64_t map_feature = 32;

  seg::SegConfig seg;
  seg::HeatmapConfig heatmap;
  double iseg_threshold = 1.0;  // neutral value of the heatmap
  bool finetune_backbone = false;
};

struct ObservationBundle {
  std::vector<world::PointCloud> lidar;            // oldest first, preprocessed
  std::vector<std::array<double, 4>> history;      // (x, y, vx/v_max, vy/v_max), robot frame
  double goal_rho = 0, goal_theta = 0;

  void validate(const ModelConfig& cfg) const;
  Vec2 last_velocity(double v_max) const {  // de-normalized
    if (history.empty()) return {};
    return {history.back()[2] * v_max, history.back()[3] * v_max};
  }
};

struct LatentGaussian {
  ad::Tensor mean, log_var;  // (1, N_z)
};

struct PriorEncoding {
  LatentGaussian latent;
  ad::Tensor h_x, h_map;
  seg::TraversabilityHeatmap heatmap;
};

// Per-sample constants reused across epochs when the backbone is frozen.
struct PreparedObs {
  std::vector<ad::Tensor> pooled;  // one (1, G) per cloud
  ad::Tensor heatmap_tensor;
  seg::TraversabilityHeatmap heatmap;
  ad::Tensor history;  // (N_v, 4)
  ad::Tensor goal;     // (1, 2)
  Vec2 last_velocity;
};

struct DecodeOut {
  ad::Tensor mean_all, log_var_all;  // (n_steps, 2)
  std::vector<ad::Tensor> step_mean, step_log_var;
};

struct SampleFilters {
  bool accel = true;
  bool heatmap = true;
};

class TrajectoryCvae {
 public:
  TrajectoryCvae(ModelConfig cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  seg::PointSegModel& segmenter() { return segmenter_; }
  const seg::PointSegModel& segmenter() const { return segmenter_; }

  // every parameter (segmenter backbone included) for checkpointing
  ad::ParamSet& params() { return all_params_; }
  const ad::ParamSet& params() const { return all_params_; }
  // generator-side parameters only (what the optimizer sees when frozen)
  ad::ParamSet& generator_params() { return gen_params_; }

  PreparedObs prepare(const ObservationBundle& obs) const;
  PriorEncoding encode_prepared(const PreparedObs& prep) const;
  PriorEncoding encode_prior(const ObservationBundle& obs) const;

  LatentGaussian encode_posterior(const Trajectory& y) const;

  // Unrolls the GRU; per step the input is [z; h_x; h_map; previous mean
  // velocity; step phase] and the head emits a velocity delta, so the mean
  // chain is deterministic given z and identical at training and inference.
  DecodeOut decode(const ad::Tensor& z, const ad::Tensor& h_x, const ad::Tensor& h_map,
                   const Vec2& v_prev0, int64_t n_steps) const;

  // log p(y | z, x) of ground-truth velocities under the decoded Gaussians
  ad::Tensor log_likelihood(const DecodeOut& dec, const Trajectory& y) const;

  // K prior draws -> velocity samples -> integrated candidates, filtered on
  // acceleration and the heatmap. May return fewer than K (possibly zero).
  std::vector<Trajectory> sample_trajectories(const ObservationBundle& obs, int k,
                                              uint64_t seed,
                                              const SampleFilters& filters = {}) const;
  std::vector<Trajectory> sample_prepared(const PreparedObs& prep, int k, uint64_t seed,
                                          const SampleFilters& filters = {}) const;

 private:
  ModelConfig cfg_;
  seg::PointSegModel segmenter_;
  ad::ParamSet gen_params_;
  ad::ParamSet all_params_;
  seg::HeatmapEncoder heatmap_enc_;
  ad::Dense lidar_fc_, goal_fc1_, goal_fc2_;
  ad::LstmParams hist_lstm_;
  ad::LayerNormParams fuse_norm_;
  ad::Dense fuse_fc_, prior_mu_, prior_lv_;
  ad::LstmParams post_fwd_, post_bwd_;
  ad::Dense post_mu_, post_lv_;
  ad::GruParams gru_;
  ad::Dense dec_out_;
};

// True when every consecutive velocity change respects the limit, starting
// from the robot's current velocity.
bool accel_ok(const Vec2& v0, const std::vector<Vec2>& velocities, double dt, double limit);

}  // namespace semnav::gen

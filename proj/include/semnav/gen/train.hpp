#pragma once
// CVAE training: KL(prior, posterior) + reconstruction from both latent
// draws + collision loss against the smoothed ground-truth obstacle map.
// The prior reconstruction over the M ground-truth trajectories uses a
// log-mean-exp (soft winner-takes-all); the baseline variant replaces it
// with a plain averaged likelihood.

#include <string>
#include <vector>

#include "semnav/gen/model.hpp"

namespace semnav::gen {

struct TrainingSample {
  ObservationBundle obs;
  std::vector<Trajectory> gt;  // M >= 1, robot frame, velocities filled

  // strict-obstacle grid for the collision loss: centered robot frame
  int64_t map_cells = 90;
  double map_res = 0.2;
  std::vector<double> obstacle_map;  // raw 0/1, row iy col ix

  // segmentation supervision for the latest cloud (training-time only)
  std::vector<int> seg_labels;
  std::vector<char> seg_in_loss;

  // provenance
  uint64_t world_seed = 0;
  double pose_x = 0, pose_y = 0, pose_heading = 0;
};

struct TrainConfig {
  int epochs = 200;
  double lr = 1e-3;
  double lr_decay = 0.95;
  int lr_every = 10;
  double lambda_col = 10.0;  // collision weight
  double beta_max = 1.0;     // KL annealing ceiling
  double warmup_frac = 0.1;  // zero-beta fraction; linear ramp to 50% of epochs
  uint64_t seed = 0;
  bool summed_recon = false;  // baseline: averaged NLL over modes instead of log-mean-exp
  bool kl_qp = false;         // swap printed KL(p||q) for the conventional direction
  double col_sigma_cells = 3.0;
  double col_epsilon = 1e-2;  // log floor; 1e-6 amplifies gradients beyond use
  double kl_free_bits = 1.0;  // no KL pressure below this many nats (0 = exact objective)
  double grad_clip = 5.0;     // global norm; 0 disables
  double weight_decay = 1e-4;
};

struct LossParts {
  double total = 0, kl = 0, recon_prior = 0, recon_post = 0, col = 0;
};

struct LossOut {
  ad::Tensor total;
  LossParts parts;
};

// Smoothed collision map for a sample (gaussian over the raw strict grid).
ad::Tensor smoothed_collision_map(const TrainingSample& sample, double sigma_cells);

// One loss evaluation on an already-prepared observation. `rng` supplies the
// reparameterization draws and the posterior-conditioning pick.
LossOut loss_elbo(const TrajectoryCvae& model, const PreparedObs& prep,
                  const std::vector<Trajectory>& gt, const ad::Tensor& col_map,
                  double map_res, double beta, double lambda, bool summed_recon, bool kl_qp,
                  Rng& rng, double col_epsilon = 1e-2, double kl_free_bits = 0.0);

struct EpochStats {
  int epoch = 0;
  double kl = 0, recon_prior = 0, recon_post = 0, col = 0, total = 0;
  double lr = 0, beta = 0;
};

struct TrainResult {
  std::vector<EpochStats> curves;
};

double beta_for_epoch(int epoch, int total_epochs, double beta_max, double warmup_frac);

TrainResult train_cvae(TrajectoryCvae& model, const std::vector<TrainingSample>& dataset,
                       const TrainConfig& cfg);

void write_curves_csv(const std::string& path, const std::vector<EpochStats>& curves);

}  // namespace semnav::gen

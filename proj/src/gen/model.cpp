#include "semnav/gen/model.hpp"

#include <cmath>
#include <stdexcept>

namespace semnav::gen {

using ad::Tensor;

namespace {
constexpr double kLogVarLo = -9.0;
constexpr double kLogVarHi = -1.0;
}  // namespace

void ObservationBundle::validate(const ModelConfig& cfg) const {
  if (static_cast<int>(lidar.size()) != cfg.n_lidar)
    throw std::invalid_argument("ObservationBundle: expected " + std::to_string(cfg.n_lidar) +
                                " clouds, got " + std::to_string(lidar.size()));
  if (static_cast<int>(history.size()) != cfg.n_history)
    throw std::invalid_argument("ObservationBundle: expected " +
                                std::to_string(cfg.n_history) + " history states, got " +
                                std::to_string(history.size()));
  if (goal_rho < 0) throw std::invalid_argument("ObservationBundle: negative goal range");
  if (goal_theta <= -M_PI - 1e-12 || goal_theta > M_PI + 1e-12)
    throw std::invalid_argument("ObservationBundle: goal bearing outside (-pi, pi]");
}

TrajectoryCvae::TrajectoryCvae(ModelConfig cfg, uint64_t seed)
    : cfg_(cfg), segmenter_(cfg.seg, seed ^ 0x5e9), heatmap_enc_([&] {
        Rng rng(seed);
        return seg::HeatmapEncoder(cfg.heatmap.cells, cfg.map_feature, gen_params_, "gen.hm",
                                   rng);
      }()) {
  Rng rng(seed + 1);
  const int64_t g = cfg_.seg.global_feature;
  lidar_fc_ = ad::Dense(gen_params_, "gen.lidar_fc", g * cfg_.n_lidar, cfg_.feature_size, rng);
  goal_fc1_ = ad::Dense(gen_params_, "gen.goal_fc1", 2, cfg_.goal_hidden, rng);
  goal_fc2_ = ad::Dense(gen_params_, "gen.goal_fc2", cfg_.goal_hidden, cfg_.goal_hidden, rng);
  hist_lstm_ = ad::LstmParams(gen_params_, "gen.hist_lstm", 4, cfg_.traj_hidden, rng);
  const int64_t fused = cfg_.feature_size + cfg_.goal_hidden + cfg_.traj_hidden;
  fuse_norm_ = ad::LayerNormParams(gen_params_, "gen.fuse_norm", fused);
  fuse_fc_ = ad::Dense(gen_params_, "gen.fuse_fc", fused, cfg_.feature_size, rng);
  prior_mu_ = ad::Dense(gen_params_, "gen.prior_mu", cfg_.feature_size, cfg_.latent_size, rng);
  prior_lv_ = ad::Dense(gen_params_, "gen.prior_lv", cfg_.feature_size, cfg_.latent_size, rng);
  post_fwd_ = ad::LstmParams(gen_params_, "gen.post_fwd", 2, cfg_.posterior_hidden, rng);
  post_bwd_ = ad::LstmParams(gen_params_, "gen.post_bwd", 2, cfg_.posterior_hidden, rng);
  post_mu_ = ad::Dense(gen_params_, "gen.post_mu", 2 * cfg_.posterior_hidden,
                       cfg_.latent_size, rng);
  post_lv_ = ad::Dense(gen_params_, "gen.post_lv", 2 * cfg_.posterior_hidden,
                       cfg_.latent_size, rng);
  // per-step input: [z; h_x; h_map; phase]
  const int64_t gru_in = cfg_.latent_size + cfg_.feature_size + cfg_.map_feature + 1;
  gru_ = ad::GruParams(gen_params_, "gen.gru", gru_in, cfg_.gru_hidden, rng);
  dec_out_ = ad::Dense(gen_params_, "gen.dec_out", cfg_.gru_hidden, 4, rng);
  // start the variance head near the data scale instead of sigma = 1
  dec_out_.b.mutable_values()[2] = -3.0;
  dec_out_.b.mutable_values()[3] = -3.0;

  all_params_.merge(gen_params_, "");
  all_params_.merge(segmenter_.params(), "");
}

PreparedObs TrajectoryCvae::prepare(const ObservationBundle& obs) const {
  obs.validate(cfg_);
  ad::NoGrad ng;
  PreparedObs prep;
  for (const auto& cloud : obs.lidar)
    prep.pooled.push_back(segmenter_.global_feature(seg::cloud_to_tensor(cloud)));
  const auto& latest = obs.lidar.back();
  Tensor logits = segmenter_.logits(seg::cloud_to_tensor(latest));
  prep.heatmap = seg::rasterize_heatmap(latest, logits, cfg_.heatmap);
  prep.heatmap_tensor = prep.heatmap.as_tensor();
  std::vector<double> hist;
  hist.reserve(obs.history.size() * 4);
  for (const auto& row : obs.history) hist.insert(hist.end(), row.begin(), row.end());
  prep.history = Tensor::from({static_cast<int64_t>(obs.history.size()), 4}, std::move(hist));
  prep.goal = Tensor::from({1, 2}, {obs.goal_rho, obs.goal_theta});
  prep.last_velocity = obs.last_velocity(cfg_.v_max);
  return prep;
}

PriorEncoding TrajectoryCvae::encode_prepared(const PreparedObs& prep) const {
  std::vector<Tensor> pooled = prep.pooled;
  Tensor h_lidar = ad::relu(lidar_fc_(ad::concat(pooled, 1)));
  Tensor h_goal = goal_fc2_(ad::relu(goal_fc1_(prep.goal)));
  Tensor h_traj = ad::lstm_sequence(prep.history, hist_lstm_).h;
  Tensor fused = fuse_norm_(ad::concat({h_lidar, h_goal, h_traj}, 1));
  Tensor h_x = ad::relu(fuse_fc_(fused));
  PriorEncoding out;
  out.latent = {prior_mu_(h_x), prior_lv_(h_x)};
  out.h_x = h_x;
  out.h_map = heatmap_enc_(prep.heatmap_tensor);
  out.heatmap = prep.heatmap;
  return out;
}

PriorEncoding TrajectoryCvae::encode_prior(const ObservationBundle& obs) const {
  if (!cfg_.finetune_backbone) return encode_prepared(prepare(obs));
  // fine-tuning: pooled backbone features stay on the tape
  obs.validate(cfg_);
  PreparedObs prep;
  for (const auto& cloud : obs.lidar)
    prep.pooled.push_back(segmenter_.global_feature(seg::cloud_to_tensor(cloud)));
  {
    ad::NoGrad ng;  // rasterization is value-level either way
    const auto& latest = obs.lidar.back();
    Tensor logits = segmenter_.logits(seg::cloud_to_tensor(latest));
    prep.heatmap = seg::rasterize_heatmap(latest, logits, cfg_.heatmap);
    prep.heatmap_tensor = prep.heatmap.as_tensor();
  }
  std::vector<double> hist;
  for (const auto& row : obs.history) hist.insert(hist.end(), row.begin(), row.end());
  prep.history = Tensor::from({static_cast<int64_t>(obs.history.size()), 4}, std::move(hist));
  prep.goal = Tensor::from({1, 2}, {obs.goal_rho, obs.goal_theta});
  prep.last_velocity = obs.last_velocity(cfg_.v_max);
  return encode_prepared(prep);
}

LatentGaussian TrajectoryCvae::encode_posterior(const Trajectory& y) const {
  if (y.waypoints.size() < 2)
    throw std::invalid_argument("encode_posterior: trajectory needs at least 2 waypoints");
  std::vector<double> flat;
  flat.reserve(y.waypoints.size() * 2);
  for (const Vec2& w : y.waypoints) {
    flat.push_back(w.x);
    flat.push_back(w.y);
  }
  Tensor seq = Tensor::from({static_cast<int64_t>(y.waypoints.size()), 2}, std::move(flat));
  Tensor feats = ad::bilstm_sequence(seq, post_fwd_, post_bwd_);
  return {post_mu_(feats), post_lv_(feats)};
}

DecodeOut TrajectoryCvae::decode(const Tensor& z, const Tensor& h_x, const Tensor& h_map,
                                 const Vec2& v_prev0, int64_t n_steps) const {
  DecodeOut out;
  Tensor hidden = Tensor::zeros({1, cfg_.gru_hidden});
  (void)v_prev0;  // launch state reaches the decoder through h_x (history)
  for (int64_t t = 0; t < n_steps; ++t) {
    Tensor phase = Tensor::from(
        {1, 1}, {static_cast<double>(t) / static_cast<double>(std::max<int64_t>(1, n_steps))});
    Tensor input = ad::concat({z, h_x, h_map, phase}, 1);
    hidden = ad::gru_cell(input, hidden, gru_);
    Tensor o = dec_out_(hidden);
    Tensor mu = ad::slice_cols(o, 0, 2);
    // soft variance bounds keep the gradient alive at the rails
    Tensor raw = ad::slice_cols(o, 2, 4);
    Tensor upper = ad::sub(Tensor::full({1, 2}, kLogVarHi), ad::softplus(ad::sub(
                       Tensor::full({1, 2}, kLogVarHi), raw)));
    Tensor lv = ad::add(Tensor::full({1, 2}, kLogVarLo),
                        ad::softplus(ad::sub(upper, Tensor::full({1, 2}, kLogVarLo))));
    out.step_mean.push_back(mu);
    out.step_log_var.push_back(lv);
  }
  out.mean_all = ad::concat(out.step_mean, 0);
  out.log_var_all = ad::concat(out.step_log_var, 0);
  return out;
}

Tensor TrajectoryCvae::log_likelihood(const DecodeOut& dec, const Trajectory& y) const {
  const int64_t n = dec.mean_all.dim(0);
  if (static_cast<int64_t>(y.velocities.size()) != n)
    throw std::invalid_argument("log_likelihood: step count mismatch");
  std::vector<double> tgt;
  tgt.reserve(static_cast<size_t>(n) * 2);
  for (const Vec2& v : y.velocities) {
    tgt.push_back(v.x);
    tgt.push_back(v.y);
  }
  Tensor target = Tensor::from({n, 2}, std::move(tgt));
  return ad::neg(ad::gaussian_nll(dec.mean_all, dec.log_var_all, target));
}

bool accel_ok(const Vec2& v0, const std::vector<Vec2>& velocities, double dt, double limit) {
  Vec2 prev = v0;
  for (const Vec2& v : velocities) {
    if (std::hypot(v.x - prev.x, v.y - prev.y) / dt > limit + 1e-12) return false;
    prev = v;
  }
  return true;
}

std::vector<Trajectory> TrajectoryCvae::sample_prepared(const PreparedObs& prep, int k,
                                                        uint64_t seed,
                                                        const SampleFilters& filters) const {
  ad::NoGrad ng;
  PriorEncoding enc = encode_prepared(prep);
  Rng rng(seed);
  std::vector<Trajectory> out;
  out.reserve(static_cast<size_t>(k));
  const auto& mu = enc.latent.mean.values();
  const auto& lv = enc.latent.log_var.values();
  for (int c = 0; c < k; ++c) {
    std::vector<double> zvals(mu.size());
    for (size_t i = 0; i < mu.size(); ++i)
      zvals[i] = mu[i] + std::exp(0.5 * lv[i]) * rng.normal();
    Tensor z = Tensor::from({1, cfg_.latent_size}, std::move(zvals));

    DecodeOut dec = decode(z, enc.h_x, enc.h_map, prep.last_velocity, cfg_.n_waypoints);
    std::vector<Vec2> vels;
    vels.reserve(static_cast<size_t>(cfg_.n_waypoints));
    for (int64_t t = 0; t < cfg_.n_waypoints; ++t) {
      const double sx = std::exp(0.5 * dec.log_var_all.at(t, 0));
      const double sy = std::exp(0.5 * dec.log_var_all.at(t, 1));
      vels.push_back({dec.mean_all.at(t, 0) + sx * rng.normal(),
                      dec.mean_all.at(t, 1) + sy * rng.normal()});
    }
    if (filters.accel && !accel_ok(prep.last_velocity, vels, cfg_.dt, cfg_.accel_limit))
      continue;
    Trajectory traj = integrate_velocities(vels, cfg_.dt);
    if (filters.heatmap) {
      bool ok = true;
      for (const Vec2& w : traj.waypoints)
        if (enc.heatmap.value_at(w.x, w.y) < cfg_.iseg_threshold) {
          ok = false;
          break;
        }
      if (!ok) continue;
    }
    out.push_back(std::move(traj));
  }
  return out;
}

std::vector<Trajectory> TrajectoryCvae::sample_trajectories(const ObservationBundle& obs,
                                                            int k, uint64_t seed,
                                                            const SampleFilters& filters) const {
  return sample_prepared(prepare(obs), k, seed, filters);
}

}  // namespace semnav::gen

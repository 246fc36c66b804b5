#include "semnav/gen/train.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "semnav/ad/optim.hpp"

namespace semnav::gen {

using ad::Tensor;

Tensor smoothed_collision_map(const TrainingSample& sample, double sigma_cells) {
  if (static_cast<int64_t>(sample.obstacle_map.size()) !=
      sample.map_cells * sample.map_cells)
    throw std::invalid_argument("smoothed_collision_map: grid size mismatch");
  std::vector<double> field = sample.obstacle_map;
  world::smooth_field(field, sample.map_cells, sample.map_cells, sigma_cells);
  return Tensor::from({sample.map_cells, sample.map_cells}, std::move(field));
}

LossOut loss_elbo(const TrajectoryCvae& model, const PreparedObs& prep,
                  const std::vector<Trajectory>& gt, const Tensor& col_map, double map_res,
                  double beta, double lambda, bool summed_recon, bool kl_qp, Rng& rng,
                  double col_epsilon, double kl_free_bits) {
  if (gt.empty()) throw std::invalid_argument("loss_elbo: needs at least one ground truth");
  const auto& cfg = model.config();
  const int64_t n_steps = cfg.n_waypoints;

  PriorEncoding prior = model.encode_prepared(prep);
  const size_t m_post = rng.uniform_int(gt.size());
  LatentGaussian post = model.encode_posterior(gt[m_post]);

  auto reparam = [&](const LatentGaussian& g) {
    std::vector<double> eps(static_cast<size_t>(cfg.latent_size));
    for (double& e : eps) e = rng.normal();
    Tensor eps_t = Tensor::from({1, cfg.latent_size}, std::move(eps));
    return ad::add(g.mean, ad::mul(ad::exp_op(ad::mul_scalar(g.log_var, 0.5)), eps_t));
  };
  Tensor z_p = reparam(prior.latent);
  Tensor z_q = reparam(post);

  // prior reconstruction: one rollout, M likelihoods on its Gaussians
  DecodeOut dec_p = model.decode(z_p, prior.h_x, prior.h_map, prep.last_velocity, n_steps);
  std::vector<Tensor> lls;
  lls.reserve(gt.size());
  for (const auto& y : gt) lls.push_back(model.log_likelihood(dec_p, y));
  Tensor ll_stack = ad::concat(lls, 0);  // (M)
  Tensor recon_prior =
      summed_recon
          ? ad::mul_scalar(ad::sum(ll_stack), -1.0 / static_cast<double>(gt.size()))
          : ad::neg(ad::add_scalar(ad::logsumexp(ll_stack, 0),
                                   -std::log(static_cast<double>(gt.size()))));

  // posterior reconstruction of the trajectory that conditioned it
  DecodeOut dec_q = model.decode(z_q, prior.h_x, prior.h_map, prep.last_velocity, n_steps);
  Tensor recon_post = ad::neg(model.log_likelihood(dec_q, gt[m_post]));

  Tensor kl = kl_qp ? ad::diag_gaussian_kl(post.mean, post.log_var, prior.latent.mean,
                                           prior.latent.log_var)
                    : ad::diag_gaussian_kl(prior.latent.mean, prior.latent.log_var,
                                           post.mean, post.log_var);

  // collision loss on the same prior rollout
  const DecodeOut& roll = dec_p;
  std::vector<Tensor> points;
  Tensor pos = Tensor::zeros({1, 2});
  for (const Tensor& mu : roll.step_mean) {
    pos = ad::add(pos, ad::mul_scalar(mu, cfg.dt));
    points.push_back(pos);
  }
  Tensor xy = ad::concat(points, 0);  // (n, 2) as (x, y)
  const int64_t cells = col_map.dim(0);
  const double half = static_cast<double>(cells) * map_res / 2.0;
  const double scale = 1.0 / map_res, offset = half / map_res - 0.5;
  Tensor rows = ad::add_scalar(ad::mul_scalar(ad::slice_cols(xy, 1, 2), scale), offset);
  Tensor cols = ad::add_scalar(ad::mul_scalar(ad::slice_cols(xy, 0, 1), scale), offset);
  Tensor samples = ad::bilinear_sample(col_map, ad::concat({rows, cols}, 1));
  Tensor col_loss = ad::log_op(
      ad::add_scalar(ad::sum(samples), col_epsilon * static_cast<double>(n_steps)));

  Tensor kl_term = kl_free_bits > 0
                       ? ad::relu(ad::add_scalar(kl, -kl_free_bits))
                       : kl;
  Tensor total = ad::add(ad::add(ad::mul_scalar(kl_term, beta),
                                 ad::add(recon_prior, recon_post)),
                         ad::mul_scalar(col_loss, lambda));
  LossOut out{total,
              {total.item(), kl.item(), recon_prior.item(), recon_post.item(),
               col_loss.item()}};
  return out;
}

double beta_for_epoch(int epoch, int total_epochs, double beta_max, double warmup_frac) {
  const double warm = warmup_frac * static_cast<double>(total_epochs);
  const double ramp_end = 0.5 * static_cast<double>(total_epochs);
  if (static_cast<double>(epoch) < warm) return 0.0;
  if (static_cast<double>(epoch) >= ramp_end || ramp_end <= warm) return beta_max;
  return beta_max * (static_cast<double>(epoch) - warm) / (ramp_end - warm);
}

TrainResult train_cvae(TrajectoryCvae& model, const std::vector<TrainingSample>& dataset,
                       const TrainConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("train_cvae: empty dataset");
  for (const auto& s : dataset)
    if (s.gt.empty()) throw std::invalid_argument("train_cvae: sample without ground truth");

  const bool finetune = model.config().finetune_backbone;
  std::vector<PreparedObs> prepared;
  std::vector<Tensor> col_maps;
  prepared.reserve(dataset.size());
  for (const auto& s : dataset) {
    prepared.push_back(model.prepare(s.obs));
    col_maps.push_back(smoothed_collision_map(s, cfg.col_sigma_cells));
  }

  ad::AdamWConfig ocfg;
  ocfg.lr = cfg.lr;
  ocfg.weight_decay = cfg.weight_decay;
  ad::AdamW opt(finetune ? model.params() : model.generator_params(), ocfg);
  ad::ExpLrSchedule sched(cfg.lr, cfg.lr_decay, cfg.lr_every);
  Rng rng(cfg.seed ^ 0x70d0);

  std::vector<size_t> order(dataset.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.set_lr(sched.lr_for_epoch(epoch));
    const double beta = beta_for_epoch(epoch, cfg.epochs, cfg.beta_max, cfg.warmup_frac);
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(i)]);
    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = opt.lr();
    stats.beta = beta;
    for (size_t k : order) {
      if (finetune) prepared[k] = model.prepare(dataset[k].obs);
      opt.zero_grad();
      ad::Tape tape;
      LossOut loss = loss_elbo(model, prepared[k], dataset[k].gt, col_maps[k],
                               dataset[k].map_res, beta, cfg.lambda_col, cfg.summed_recon,
                               cfg.kl_qp, rng, cfg.col_epsilon, cfg.kl_free_bits);
      if (!std::isfinite(loss.parts.total))
        throw std::runtime_error("train_cvae: loss diverged at epoch " +
                                 std::to_string(epoch) + " (total=" +
                                 std::to_string(loss.parts.total) + ")");
      tape.backward(loss.total);
      if (cfg.grad_clip > 0) {
        double norm2 = 0;
        for (auto& [name, t] : (finetune ? model.params() : model.generator_params()).all())
          for (double g : t.grads()) norm2 += g * g;
        const double norm = std::sqrt(norm2);
        if (norm > cfg.grad_clip) {
          const double scale = cfg.grad_clip / norm;
          for (auto& [name, t] : (finetune ? model.params() : model.generator_params()).all()) {
            t.grads();  // ensure allocated
            for (double& g : t.impl()->grad) g *= scale;
          }
        }
      }
      opt.step();
      stats.kl += loss.parts.kl;
      stats.recon_prior += loss.parts.recon_prior;
      stats.recon_post += loss.parts.recon_post;
      stats.col += loss.parts.col;
      stats.total += loss.parts.total;
    }
    const double inv = 1.0 / static_cast<double>(dataset.size());
    stats.kl *= inv;
    stats.recon_prior *= inv;
    stats.recon_post *= inv;
    stats.col *= inv;
    stats.total *= inv;
    result.curves.push_back(stats);
  }
  return result;
}

void write_curves_csv(const std::string& path, const std::vector<EpochStats>& curves) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_curves_csv: cannot open " + path);
  os << "epoch,kl,recon_prior,recon_post,col,total,lr,beta\n";
  for (const auto& s : curves)
    os << s.epoch << "," << s.kl << "," << s.recon_prior << "," << s.recon_post << ","
       << s.col << "," << s.total << "," << s.lr << "," << s.beta << "\n";
}

}  // namespace semnav::gen

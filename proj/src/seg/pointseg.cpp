#include "semnav/seg/pointseg.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "semnav/ad/optim.hpp"

namespace semnav::seg {

using ad::Tensor;

PointSegModel::PointSegModel(SegConfig cfg, uint64_t seed) : cfg_(cfg) {
  Rng rng(seed);
  l1_ = ad::Dense(params_, "seg.l1", 4, cfg_.point_feature, rng);
  l2_ = ad::Dense(params_, "seg.l2", cfg_.point_feature, cfg_.global_feature, rng);
  h1_ = ad::Dense(params_, "seg.h1", cfg_.point_feature + cfg_.global_feature,
                  cfg_.point_feature, rng);
  h2_ = ad::Dense(params_, "seg.h2", cfg_.point_feature, 2, rng);
}

Tensor PointSegModel::backbone(const Tensor& points) const {
  if (points.rank() != 2 || points.dim(1) != 4)
    throw std::invalid_argument("PointSegModel: points must be (n,4)");
  return ad::relu(l2_(ad::relu(l1_(points))));  // (n, global_feature)
}

Tensor PointSegModel::global_feature(const Tensor& points) const {
  return ad::maxpool_points(backbone(points));
}

Tensor PointSegModel::logits(const Tensor& points) const {
  Tensor per_point = ad::relu(l1_(points));              // (n, F)
  Tensor deep = ad::relu(l2_(per_point));                // (n, G)
  Tensor pooled = ad::maxpool_points(deep);              // (1, G)
  // tile the global feature onto every point via a ones column
  Tensor ones = Tensor::full({points.dim(0), 1}, 1.0);
  Tensor tiled = ad::matmul(ones, pooled);               // (n, G)
  Tensor joint = ad::concat({per_point, tiled}, 1);      // (n, F+G)
  return h2_(ad::relu(h1_(joint)));                      // (n, 2)
}

Tensor cloud_to_tensor(const world::PointCloud& cloud) {
  return Tensor::from({static_cast<int64_t>(cloud.size()), 4}, cloud.xyzi);
}

world::PointCloud preprocess_cloud(const world::PointCloud& cloud, const SegConfig& cfg) {
  const double cutoff = 1.5 * cfg.robot_height - cfg.sensor_height;  // sensor-frame z
  std::map<std::tuple<int64_t, int64_t, int64_t>, std::array<double, 5>> voxels;
  std::vector<std::tuple<int64_t, int64_t, int64_t>> order;
  for (size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.z(i) > cutoff) continue;
    const auto key = std::make_tuple(
        static_cast<int64_t>(std::floor(cloud.x(i) / cfg.voxel_size)),
        static_cast<int64_t>(std::floor(cloud.y(i) / cfg.voxel_size)),
        static_cast<int64_t>(std::floor(cloud.z(i) / cfg.voxel_size)));
    auto [it, fresh] = voxels.try_emplace(key, std::array<double, 5>{0, 0, 0, 0, 0});
    if (fresh) order.push_back(key);
    auto& acc = it->second;
    acc[0] += cloud.x(i);
    acc[1] += cloud.y(i);
    acc[2] += cloud.z(i);
    acc[3] += cloud.intensity(i);
    acc[4] += 1.0;
  }
  world::PointCloud out;
  out.xyzi.reserve(order.size() * 4);
  for (const auto& key : order) {
    const auto& acc = voxels.at(key);
    out.xyzi.insert(out.xyzi.end(), {acc[0] / acc[4], acc[1] / acc[4], acc[2] / acc[4],
                                     acc[3] / acc[4]});
  }
  return out;
}

void label_points(const world::PointCloud& cloud, const world::WorldModel& world,
                  const world::RobotState& pose, const SegConfig& cfg,
                  std::vector<int>& labels, std::vector<char>& in_loss) {
  labels.assign(cloud.size(), 0);
  in_loss.assign(cloud.size(), 1);
  const double cutoff = 1.5 * cfg.robot_height - cfg.sensor_height;
  for (size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.z(i) > cutoff) in_loss[i] = 0;
    double wx, wy;
    world::robot_to_world(pose, cloud.x(i), cloud.y(i), wx, wy);
    if (!world.in_bounds(wx, wy)) {
      labels[i] = 0;  // conservative
      continue;
    }
    labels[i] = world.registry.def(world.class_at(wx, wy)).strict ? 0 : 1;
  }
}

Tensor weighted_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                              const std::vector<char>& in_loss, double w_traversable,
                              double w_blocked) {
  const int64_t n = logits.dim(0);
  if (static_cast<size_t>(n) != labels.size())
    throw std::invalid_argument("weighted_cross_entropy: label count mismatch");
  Tensor logp = ad::sub(logits, ad::logsumexp(logits, 1));
  std::vector<double> pick(static_cast<size_t>(n) * 2, 0.0);
  double total_w = 0;
  for (int64_t i = 0; i < n; ++i) {
    if (!in_loss.empty() && !in_loss[static_cast<size_t>(i)]) continue;
    const int lab = labels[static_cast<size_t>(i)];
    const double w = lab == 1 ? w_traversable : w_blocked;
    pick[static_cast<size_t>(i * 2 + (lab == 1 ? 0 : 1))] = w;
    total_w += w;
  }
  if (total_w <= 0) throw std::invalid_argument("weighted_cross_entropy: no points in loss");
  Tensor mask = Tensor::from({n, 2}, std::move(pick));
  return ad::mul_scalar(ad::neg(ad::sum(ad::mul(logp, mask))), 1.0 / total_w);
}

std::pair<double, double> inverse_frequency_weights(double n_traversable, double n_blocked) {
  const double total = n_traversable + n_blocked;
  return {total / n_traversable, total / n_blocked};
}

SegTrainReport train_segmenter(PointSegModel& model, const std::vector<SegSample>& dataset,
                               const SegTrainConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("train_segmenter: empty dataset");
  // inverse class frequency over points that participate in the loss
  double n_trav = 0, n_block = 0;
  for (const auto& s : dataset)
    for (size_t i = 0; i < s.labels.size(); ++i) {
      if (!s.in_loss.empty() && !s.in_loss[i]) continue;
      (s.labels[i] == 1 ? n_trav : n_block) += 1.0;
    }
  if (n_trav == 0 || n_block == 0)
    throw std::invalid_argument("train_segmenter: dataset holds a single class");
  const auto [w_trav, w_block] = inverse_frequency_weights(n_trav, n_block);

  ad::AdamWConfig ocfg;
  ocfg.lr = cfg.lr;
  ad::AdamW opt(model.params(), ocfg);
  Rng shuffle_rng(cfg.seed);
  std::vector<size_t> idx(dataset.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  double last_loss = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[shuffle_rng.uniform_int(i)]);
    last_loss = 0;
    for (size_t k : idx) {
      const auto& s = dataset[k];
      opt.zero_grad();
      ad::Tape tape;
      Tensor loss = weighted_cross_entropy(model.logits(cloud_to_tensor(s.cloud)), s.labels,
                                           s.in_loss, w_trav, w_block);
      tape.backward(loss);
      opt.step();
      last_loss += loss.item();
    }
    last_loss /= static_cast<double>(dataset.size());
  }

  SegTrainReport rep;
  rep.loss = last_loss;
  double ok_t = 0, tot_t = 0, ok_b = 0, tot_b = 0;
  {
    ad::NoGrad ng;
    for (const auto& s : dataset) {
      Tensor lg = model.logits(cloud_to_tensor(s.cloud));
      for (size_t i = 0; i < s.labels.size(); ++i) {
        if (!s.in_loss.empty() && !s.in_loss[i]) continue;
        const int pred = lg.at(static_cast<int64_t>(i), 0) > lg.at(static_cast<int64_t>(i), 1)
                             ? 1
                             : 0;
        if (s.labels[i] == 1) {
          tot_t += 1;
          ok_t += pred == 1;
        } else {
          tot_b += 1;
          ok_b += pred == 0;
        }
      }
    }
  }
  rep.accuracy_traversable = tot_t > 0 ? ok_t / tot_t : 0;
  rep.accuracy_blocked = tot_b > 0 ? ok_b / tot_b : 0;
  return rep;
}

}  // namespace semnav::seg

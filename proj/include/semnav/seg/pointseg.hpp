#pragma once
// Point-cloud binary segmentation (traversable vs non-traversable): a shared
// per-point MLP, a permutation-invariant max-pooled global feature, and a
// per-point classification head. Trained with inverse-frequency weighted
// cross entropy against labels projected from the world's class grid.

#include <string>
#include <vector>

#include "semnav/ad/nn.hpp"
#include "semnav/ad/tensor.hpp"
#include "semnav/world/sensors.hpp"
#include "semnav/world/world.hpp"

namespace semnav::seg {

struct SegConfig {
  int64_t point_feature = 32;
  int64_t global_feature = 64;
  double voxel_size = 0.1;
  double robot_height = 0.8;
  double sensor_height = 0.5;  // cloud frame sits at the sensor
};

class PointSegModel {
 public:
  PointSegModel(SegConfig cfg, uint64_t seed);

  // points (n,4) -> logits (n,2); column 0 traversable, column 1 not
  ad::Tensor logits(const ad::Tensor& points) const;
  // pooled backbone feature (1, global_feature)
  ad::Tensor global_feature(const ad::Tensor& points) const;

  ad::ParamSet& params() { return params_; }
  const ad::ParamSet& params() const { return params_; }
  const SegConfig& config() const { return cfg_; }

 private:
  ad::Tensor backbone(const ad::Tensor& points) const;  // (n, point_feature*? ) per-point
  SegConfig cfg_;
  ad::ParamSet params_;
  ad::Dense l1_, l2_, h1_, h2_;
};

ad::Tensor cloud_to_tensor(const world::PointCloud& cloud);

// Voxel downsample (one centroid per voxel) and drop points higher than
// 1.5x the robot height above ground.
world::PointCloud preprocess_cloud(const world::PointCloud& cloud, const SegConfig& cfg);

// Ground-truth labels by projecting (x, y) into the world class grid.
// labels[i]: 1 traversable (soft class), 0 non-traversable; out-of-world
// points are non-traversable. in_loss[i] false above the height cutoff.
void label_points(const world::PointCloud& cloud, const world::WorldModel& world,
                  const world::RobotState& pose, const SegConfig& cfg,
                  std::vector<int>& labels, std::vector<char>& in_loss);

struct SegSample {
  world::PointCloud cloud;
  std::vector<int> labels;
  std::vector<char> in_loss;
};

struct SegTrainConfig {
  int epochs = 60;
  double lr = 1e-3;
  uint64_t seed = 0;
};

struct SegTrainReport {
  double loss = 0;
  double accuracy_traversable = 0;
  double accuracy_blocked = 0;
};

// Inverse-class-frequency weighted CE; rejects single-class datasets.
SegTrainReport train_segmenter(PointSegModel& model, const std::vector<SegSample>& dataset,
                               const SegTrainConfig& cfg);

// {w_traversable, w_blocked} = 1 / class frequency
std::pair<double, double> inverse_frequency_weights(double n_traversable, double n_blocked);

// Weighted cross entropy of logits (n,2) vs labels with per-class weights.
ad::Tensor weighted_cross_entropy(const ad::Tensor& logits, const std::vector<int>& labels,
                                  const std::vector<char>& in_loss, double w_traversable,
                                  double w_blocked);

}  // namespace semnav::seg

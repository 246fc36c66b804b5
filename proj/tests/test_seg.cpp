#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "semnav/seg/heatmap.hpp"
#include "semnav/seg/pointseg.hpp"
#include "semnav/world/worldgen.hpp"

using namespace semnav;
using ad::Tensor;
using test::grad_check;
using test::random_tensor;

namespace {
world::WorldModel small_world() {
  world::WorldGenSpec spec;
  spec.extent_m = 20;
  spec.grass_fraction = 0;
  spec.obstacle_density = 0;
  return world::generate_world(spec, 1);
}
}  // namespace

TEST_CASE("label_points: pavement traversable, wall blocked, canopy excluded") {
  world::WorldModel w = small_world();
  const uint8_t wall = *w.registry.find("wall");
  w.class_grid[w.cell_index(12.0, 10.0)] = wall;
  w.elevation[w.cell_index(12.0, 10.0)] = 1.5;

  world::RobotState pose;
  pose.x = 10;
  pose.y = 10;
  seg::SegConfig cfg;
  world::PointCloud cloud;
  // pavement point 1 m ahead at ground, wall point at (2, 0), canopy point
  // at z = 2 * robot height, and a point far outside the world
  cloud.xyzi = {1, 0, -cfg.sensor_height, 0.5,
                2.05, 0, 0.5, 0.5,
                1, 1, 2 * cfg.robot_height - cfg.sensor_height, 0.5,
                100, 100, -cfg.sensor_height, 0.5};
  std::vector<int> labels;
  std::vector<char> in_loss;
  seg::label_points(cloud, w, pose, cfg, labels, in_loss);
  CHECK(labels[0] == 1);
  CHECK(in_loss[0] == 1);
  CHECK(labels[1] == 0);
  CHECK(in_loss[2] == 0);  // above 1.5x robot height
  CHECK(labels[3] == 0);   // out of bounds -> conservative
}

TEST_CASE("preprocess_cloud voxelizes and drops canopy points") {
  seg::SegConfig cfg;
  world::PointCloud cloud;
  // two points in the same 0.1 m voxel plus one overhead point
  cloud.xyzi = {1.01, 0.02, -0.48, 0.4,
                1.03, 0.04, -0.46, 0.6,
                2.0, 0.0, 5.0, 0.5};
  world::PointCloud out = seg::preprocess_cloud(cloud, cfg);
  REQUIRE(out.size() == 1);
  CHECK(out.x(0) == doctest::Approx(1.02));
  CHECK(out.intensity(0) == doctest::Approx(0.5));
}

TEST_CASE("inverse frequency weights for a 90/10 imbalance") {
  auto [wt, wb] = seg::inverse_frequency_weights(90, 10);
  CHECK(wt == doctest::Approx(1.0 / 0.9));
  CHECK(wb == doctest::Approx(1.0 / 0.1));
}

TEST_CASE("weighted CE on perfect predictions is near zero") {
  Tensor logits = Tensor::from({2, 2}, {30, -30, -30, 30});
  std::vector<int> labels = {1, 0};
  Tensor loss = seg::weighted_cross_entropy(logits, labels, {}, 1.0, 1.0);
  CHECK(loss.item() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("segmenter reaches 99% on a linearly separable toy cloud") {
  // ground-plane points (traversable) vs elevated wall points (blocked)
  Rng rng(7);
  std::vector<seg::SegSample> dataset;
  for (int s = 0; s < 4; ++s) {
    seg::SegSample sample;
    for (int i = 0; i < 60; ++i) {
      const bool wall = i % 3 == 0;  // 1/3 blocked
      const double x = rng.uniform(0.5, 8.0), y = rng.uniform(-4.0, 4.0);
      const double z = wall ? rng.uniform(0.0, 1.0) : -0.5;
      sample.cloud.xyzi.insert(sample.cloud.xyzi.end(), {x, y, z, wall ? 0.6 : 0.45});
      sample.labels.push_back(wall ? 0 : 1);
      sample.in_loss.push_back(1);
    }
    dataset.push_back(std::move(sample));
  }
  seg::PointSegModel model({.point_feature = 16, .global_feature = 32}, 3);
  seg::SegTrainConfig tc;
  tc.epochs = 200;
  auto rep = seg::train_segmenter(model, dataset, tc);
  CHECK(rep.accuracy_traversable >= 0.99);
  CHECK(rep.accuracy_blocked >= 0.99);
}

TEST_CASE("train_segmenter rejects a single-class dataset") {
  seg::SegSample s;
  s.cloud.xyzi = {1, 0, -0.5, 0.5, 2, 0, -0.5, 0.5};
  s.labels = {1, 1};
  s.in_loss = {1, 1};
  seg::PointSegModel model({.point_feature = 8, .global_feature = 8}, 1);
  CHECK_THROWS_AS(seg::train_segmenter(model, {s}, {}), std::invalid_argument);
}

TEST_CASE("heatmap: empty cloud gives the neutral field of ones") {
  world::PointCloud empty;
  Tensor logits = Tensor::zeros({0, 2});
  seg::TraversabilityHeatmap hm = seg::rasterize_heatmap(empty, logits);
  for (double v : hm.grid) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("heatmap: single occupied cell reads 3 pre-smoothing, 1 elsewhere") {
  world::PointCloud cloud;
  cloud.xyzi = {0.05, 0.05, -0.5, 0.5};  // one point in the center cell
  Tensor logits = Tensor::from({1, 2}, {2.0, 0.0});
  seg::HeatmapConfig cfg;
  cfg.sigma_px = 1e-9;  // effectively no smoothing
  cfg.cells = 9;
  cfg.res = 2.0;  // big cells; point lands in the center one
  seg::TraversabilityHeatmap hm = seg::rasterize_heatmap(cloud, logits, cfg);
  for (int64_t iy = 0; iy < 9; ++iy)
    for (int64_t ix = 0; ix < 9; ++ix) {
      const double expect = (ix == 4 && iy == 4) ? 3.0 : 1.0;
      CHECK(hm.grid[static_cast<size_t>(iy * 9 + ix)] == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("heatmap: duplicating every point in a cell leaves the value unchanged") {
  world::PointCloud cloud;
  cloud.xyzi = {0.35, 0.15, -0.5, 0.5, 0.30, 0.10, -0.5, 0.5};
  Tensor logits = Tensor::from({2, 2}, {1.5, -0.5, 0.5, 0.5});
  seg::TraversabilityHeatmap a = seg::rasterize_heatmap(cloud, logits);

  world::PointCloud doubled;
  doubled.xyzi = cloud.xyzi;
  doubled.xyzi.insert(doubled.xyzi.end(), cloud.xyzi.begin(), cloud.xyzi.end());
  Tensor logits2 = Tensor::from({4, 2}, {1.5, -0.5, 0.5, 0.5, 1.5, -0.5, 0.5, 0.5});
  seg::TraversabilityHeatmap b = seg::rasterize_heatmap(doubled, logits2);
  for (size_t i = 0; i < a.grid.size(); ++i)
    CHECK(a.grid[i] == doctest::Approx(b.grid[i]).epsilon(1e-12));
}

TEST_CASE("heatmap matches brute-force mean-logit binning + explicit convolution") {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const int64_t cells = 8;
    const double res = 0.5;
    const double sigma = 1.2;
    const int n_pts = 1 + static_cast<int>(rng.uniform_int(50));
    world::PointCloud cloud;
    std::vector<double> lg;
    for (int i = 0; i < n_pts; ++i) {
      cloud.xyzi.insert(cloud.xyzi.end(),
                        {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), -0.5, 0.5});
      lg.push_back(rng.uniform(-2, 2));
      lg.push_back(rng.uniform(-2, 2));
    }
    Tensor logits = Tensor::from({n_pts, 2}, lg);
    seg::HeatmapConfig cfg;
    cfg.cells = cells;
    cfg.res = res;
    cfg.sigma_px = sigma;
    seg::TraversabilityHeatmap hm = seg::rasterize_heatmap(cloud, logits, cfg);

    // oracle: nested loops, then explicit 2D gaussian with reflect border
    std::vector<double> pos(64, 0), neg(64, 0), cnt(64, 0), field(64, 1.0);
    for (int i = 0; i < n_pts; ++i) {
      const double x = cloud.x(static_cast<size_t>(i)), y = cloud.y(static_cast<size_t>(i));
      if (x < -2 || y < -2 || x >= 2 || y >= 2) continue;
      const int64_t ix = static_cast<int64_t>((x + 2) / res);
      const int64_t iy = static_cast<int64_t>((y + 2) / res);
      pos[static_cast<size_t>(iy * 8 + ix)] += lg[static_cast<size_t>(2 * i)];
      neg[static_cast<size_t>(iy * 8 + ix)] += lg[static_cast<size_t>(2 * i + 1)];
      cnt[static_cast<size_t>(iy * 8 + ix)] += 1;
    }
    for (size_t i = 0; i < 64; ++i)
      if (cnt[i] > 0) field[i] = pos[i] / cnt[i] - neg[i] / cnt[i] + 1.0;
    const auto k1 = ad::gaussian_kernel_1d(sigma, 3.0);
    const int64_t radius = (static_cast<int64_t>(k1.size()) - 1) / 2;
    auto reflect = [](int64_t i, int64_t n) {
      while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
      }
      return i;
    };
    for (int64_t r = 0; r < 8; ++r)
      for (int64_t c = 0; c < 8; ++c) {
        double acc = 0;
        for (int64_t dr = -radius; dr <= radius; ++dr)
          for (int64_t dc = -radius; dc <= radius; ++dc)
            acc += k1[static_cast<size_t>(dr + radius)] *
                   k1[static_cast<size_t>(dc + radius)] *
                   field[static_cast<size_t>(reflect(r + dr, 8) * 8 + reflect(c + dc, 8))];
        CHECK(std::fabs(hm.grid[static_cast<size_t>(r * 8 + c)] - acc) <= 1e-9);
      }
  }
}

TEST_CASE("permutation invariance of pooled feature, logits, heatmap") {
  Rng rng(23);
  const int n = 40;
  world::PointCloud cloud;
  for (int i = 0; i < n; ++i)
    cloud.xyzi.insert(cloud.xyzi.end(), {rng.uniform(-5, 5), rng.uniform(-5, 5),
                                         rng.uniform(-0.5, 1.0), rng.uniform(0, 1)});
  seg::PointSegModel model({.point_feature = 8, .global_feature = 16}, 5);
  Tensor pts = seg::cloud_to_tensor(cloud);
  Tensor pooled = model.global_feature(pts);
  Tensor logits = model.logits(pts);
  seg::TraversabilityHeatmap hm = seg::rasterize_heatmap(cloud, logits);

  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[static_cast<size_t>(i)], perm[rng.uniform_int(static_cast<uint64_t>(i + 1))]);
  world::PointCloud shuffled;
  for (int i = 0; i < n; ++i) {
    const size_t s = static_cast<size_t>(perm[static_cast<size_t>(i)]);
    shuffled.xyzi.insert(shuffled.xyzi.end(), {cloud.x(s), cloud.y(s), cloud.z(s),
                                               cloud.intensity(s)});
  }
  Tensor pts2 = seg::cloud_to_tensor(shuffled);
  Tensor pooled2 = model.global_feature(pts2);
  CHECK(pooled.values() == pooled2.values());
  Tensor logits2 = model.logits(pts2);
  for (int i = 0; i < n; ++i) {
    const int64_t s = perm[static_cast<size_t>(i)];
    CHECK(logits.at(s, 0) == logits2.at(i, 0));
    CHECK(logits.at(s, 1) == logits2.at(i, 1));
  }
  seg::TraversabilityHeatmap hm2 = seg::rasterize_heatmap(shuffled, logits2);
  for (size_t i = 0; i < hm.grid.size(); ++i) CHECK(hm.grid[i] == doctest::Approx(hm2.grid[i]));
}

TEST_CASE("heatmap encoder: shape contract, determinism, gradient through conv stack") {
  Rng rng(29);
  ad::ParamSet ps;
  seg::HeatmapEncoder enc(20, 12, ps, "hm", rng);
  Tensor grid = random_tensor({20, 20}, rng, 0, 2, false);
  Tensor f1 = enc(grid);
  CHECK(f1.shape() == ad::Shape{1, 12});
  Tensor f2 = enc(grid);
  CHECK(f1.values() == f2.values());

  // gradient through the stack w.r.t. first conv weights and fc
  auto res = grad_check(
      [&](const std::vector<Tensor>& in) {
        (void)in;  // parameters are checked in place
        return ad::sum(ad::square(enc(grid)));
      },
      {ps.at("hm.c1.w"), ps.at("hm.c2.w"), ps.at("hm.fc.w")});
  CHECK(res.max_rel_err <= 1e-4);
}

#include "semnav/seg/heatmap.hpp"

#include <stdexcept>

namespace semnav::seg {

using ad::Tensor;

TraversabilityHeatmap rasterize_heatmap(const world::PointCloud& cloud,
                                        const ad::Tensor& logits, const HeatmapConfig& cfg) {
  if (logits.rank() != 2 || logits.dim(1) != 2 ||
      logits.dim(0) != static_cast<int64_t>(cloud.size()))
    throw std::invalid_argument("rasterize_heatmap: logits must be (n,2) aligned with cloud");
  TraversabilityHeatmap hm;
  hm.cells = cfg.cells;
  hm.res = cfg.res;
  const int64_t n = cfg.cells;
  const double half = hm.extent() / 2.0;
  std::vector<double> pos_sum(static_cast<size_t>(n * n), 0.0);
  std::vector<double> neg_sum(static_cast<size_t>(n * n), 0.0);
  std::vector<double> count(static_cast<size_t>(n * n), 0.0);
  for (size_t i = 0; i < cloud.size(); ++i) {
    const double x = cloud.x(i), y = cloud.y(i);
    if (x < -half || y < -half || x >= half || y >= half) continue;
    const int64_t ix = static_cast<int64_t>((x + half) / cfg.res);
    const int64_t iy = static_cast<int64_t>((y + half) / cfg.res);
    const size_t idx = static_cast<size_t>(iy * n + ix);
    pos_sum[idx] += logits.at(static_cast<int64_t>(i), 0);
    neg_sum[idx] += logits.at(static_cast<int64_t>(i), 1);
    count[idx] += 1.0;
  }
  hm.grid.assign(static_cast<size_t>(n * n), 1.0);  // M+ - M- + 1 with both zero
  for (size_t i = 0; i < hm.grid.size(); ++i)
    if (count[i] > 0) hm.grid[i] = pos_sum[i] / count[i] - neg_sum[i] / count[i] + 1.0;
  world::smooth_field(hm.grid, n, n, cfg.sigma_px);
  return hm;
}

HeatmapEncoder::HeatmapEncoder(int64_t grid_cells, int64_t out_features, ad::ParamSet& ps,
                               const std::string& prefix, Rng& rng)
    : grid_cells_(grid_cells), out_features_(out_features) {
  w1_ = ps.add(prefix + ".c1.w", ad::glorot({8, 1, 3, 3}, rng));
  b1_ = ps.add(prefix + ".c1.b", Tensor::zeros({8}));
  w2_ = ps.add(prefix + ".c2.w", ad::glorot({16, 8, 3, 3}, rng));
  b2_ = ps.add(prefix + ".c2.b", Tensor::zeros({16}));
  w3_ = ps.add(prefix + ".c3.w", ad::glorot({16, 16, 3, 3}, rng));
  b3_ = ps.add(prefix + ".c3.b", Tensor::zeros({16}));
  auto conv_out = [](int64_t in) { return (in - 3) / 2 + 1; };
  const int64_t s = conv_out(conv_out(conv_out(grid_cells)));
  flat_ = 16 * s * s;
  fc_ = ad::Dense(ps, prefix + ".fc", flat_, out_features, rng);
}

Tensor HeatmapEncoder::operator()(const ad::Tensor& heatmap_grid) const {
  if (heatmap_grid.rank() != 2 || heatmap_grid.dim(0) != grid_cells_)
    throw std::invalid_argument("HeatmapEncoder: grid shape mismatch");
  Tensor x = ad::reshape(heatmap_grid, {1, grid_cells_, grid_cells_});
  x = ad::relu(ad::conv2d(x, w1_, b1_, 2));
  x = ad::relu(ad::conv2d(x, w2_, b2_, 2));
  x = ad::relu(ad::conv2d(x, w3_, b3_, 2));
  return fc_(ad::reshape(x, {1, flat_}));
}

}  // namespace semnav::seg

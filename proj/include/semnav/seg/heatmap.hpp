#pragma once
// Traversability heatmap: per-cell mean segmentation logits rasterized on a
// robot-centered grid, offset by one and Gaussian-smoothed so empty cells
// read as neutral (1.0). Plus the strided CNN that turns the heatmap into
// the decoder's spatial feature vector.

#include "semnav/ad/nn.hpp"
#include "semnav/ad/tensor.hpp"
#include "semnav/world/sensors.hpp"

namespace semnav::seg {

struct HeatmapConfig {
  int64_t cells = 90;     // per side
  double res = 0.2;       // m per cell -> 18 m extent
  double sigma_px = 5.0;  // smoothing
};

struct TraversabilityHeatmap {
  int64_t cells = 90;
  double res = 0.2;
  std::vector<double> grid;  // row iy (y), col ix (x); x,y in [-extent/2, extent/2)

  double extent() const { return static_cast<double>(cells) * res; }
  bool contains(double x, double y) const {
    const double half = extent() / 2.0;
    return x >= -half && y >= -half && x < half && y < half;
  }
  // nearest-cell lookup in the robot frame; out-of-grid reads neutral 1.0
  double value_at(double x, double y) const {
    if (!contains(x, y)) return 1.0;
    const double half = extent() / 2.0;
    const int64_t ix = static_cast<int64_t>((x + half) / res);
    const int64_t iy = static_cast<int64_t>((y + half) / res);
    return grid[static_cast<size_t>(iy * cells + ix)];
  }
  ad::Tensor as_tensor() const {
    return ad::Tensor::from({cells, cells}, grid);
  }
};

// I_seg = gaussian(sigma) * (M+ - M- + 1) with M+/M- the per-cell means of
// the traversable / non-traversable logits. logits may be any (n,2) values
// aligned with the cloud; evaluation is value-level.
TraversabilityHeatmap rasterize_heatmap(const world::PointCloud& cloud,
                                        const ad::Tensor& logits,
                                        const HeatmapConfig& cfg = {});

// 3-layer stride-2 conv stack + FC producing the flattened spatial feature.
class HeatmapEncoder {
 public:
  HeatmapEncoder(int64_t grid_cells, int64_t out_features, ad::ParamSet& ps,
                 const std::string& prefix, Rng& rng);
  ad::Tensor operator()(const ad::Tensor& heatmap_grid) const;  // (cells,cells) -> (1,out)
  int64_t out_features() const { return out_features_; }

 private:
  int64_t grid_cells_, out_features_, flat_;
  ad::Tensor w1_, b1_, w2_, b2_, w3_, b3_;
  ad::Dense fc_;
};

}  // namespace semnav::seg

#pragma once
// Synthetic sensors over the 2D elevation world: a stratified-ray lidar, a
// per-pixel ray-cast semantic camera standing in for the VLM segmenter, and
// the robot-frame elevation crop. All pure given (world, state, seed).

#include <string>
#include <vector>

#include "semnav/ad/random.hpp"
#include "semnav/world/world.hpp"

namespace semnav::world {

// ---------------------------------------------------------------------------
// Ray casting
// ---------------------------------------------------------------------------

struct RayHit {
  bool hit = false;
  double t = 0;                  // meters along the (unit) direction
  double x = 0, y = 0, z = 0;    // world frame
  uint8_t cls = 0;
};

// Origin/direction in world frame, direction need not be normalized.
RayHit cast_ray(const WorldModel& world, double ox, double oy, double oz, double dx,
                double dy, double dz, double max_range);

// ---------------------------------------------------------------------------
// Lidar
// ---------------------------------------------------------------------------

// Points are expressed in the robot body frame with the origin at the sensor
// (so flat ground reads z = -sensor_height). Layout: n x 4 (x, y, z, intensity).
struct PointCloud {
  std::vector<double> xyzi;
  size_t size() const { return xyzi.size() / 4; }
  double x(size_t i) const { return xyzi[4 * i]; }
  double y(size_t i) const { return xyzi[4 * i + 1]; }
  double z(size_t i) const { return xyzi[4 * i + 2]; }
  double intensity(size_t i) const { return xyzi[4 * i + 3]; }
};

struct LidarConfig {
  double sensor_height = 0.5;
  double max_range = 20.0;
  int azimuth_steps = 32;
  int elevation_steps = 16;
  double elevation_min_deg = -40.0;
  double elevation_max_deg = 20.0;
  double intensity_noise = 0.02;
};

PointCloud sample_pointcloud(const WorldModel& world, const RobotState& state,
                             int n_points, uint64_t seed, const LidarConfig& cfg = {});

// ---------------------------------------------------------------------------
// Semantic camera (synthetic open-vocabulary segmenter)
// ---------------------------------------------------------------------------

struct ClassProbMaps {
  int width = 0, height = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> maps;  // one width*height image per name
  double timestamp = 0;

  double at(size_t map_idx, int u, int v) const {
    return maps[map_idx][static_cast<size_t>(v) * static_cast<size_t>(width) +
                         static_cast<size_t>(u)];
  }
};

struct RenderNoise {
  double blur_sigma_px = 2.0;
  double noise_std = 0.05;
  uint64_t seed = 0;
};

// One probability map per query; unknown query names yield all-zero maps.
// Rays that escape the world or point above every surface read as 'sky'.
ClassProbMaps render_semantics(const WorldModel& world, const RobotState& state,
                               const CameraModel& cam,
                               const std::vector<std::string>& queries,
                               const RenderNoise& noise = {});

// ---------------------------------------------------------------------------
// Local elevation crop
// ---------------------------------------------------------------------------

// Robot-frame grid; cell (ix, iy) covers x in [min_x + ix*res, ...), y likewise.
struct LocalGrid {
  int64_t nx = 0, ny = 0;
  double res = 0.1;
  double min_x = 0, min_y = 0;
  std::vector<double> cells;

  bool contains(double x, double y) const {
    return x >= min_x && y >= min_y && x < min_x + static_cast<double>(nx) * res &&
           y < min_y + static_cast<double>(ny) * res;
  }
  double& at(int64_t ix, int64_t iy) { return cells[static_cast<size_t>(iy * nx + ix)]; }
  double at(int64_t ix, int64_t iy) const { return cells[static_cast<size_t>(iy * nx + ix)]; }
  double value_at(double x, double y) const {
    const int64_t ix = static_cast<int64_t>((x - min_x) / res);
    const int64_t iy = static_cast<int64_t>((y - min_y) / res);
    return at(ix, iy);
  }
};

struct ElevationCropConfig {
  double extent = 18.0;
  double res = 0.1;
  double unknown_elevation = 5.0;  // outside-world fill, treated as impassable
};

// Forward-facing window: x in [0, extent], y in [-extent/2, extent/2].
LocalGrid crop_elevation(const WorldModel& world, const RobotState& state,
                         const ElevationCropConfig& cfg = {});

// Plain (non-differentiable) separable Gaussian blur with reflective border;
// shared by the renderer and map tooling.
void smooth_field(std::vector<double>& field, int64_t h, int64_t w, double sigma,
                  double trunc = 3.0);

}  // namespace semnav::world

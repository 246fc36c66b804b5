#include "semnav/world/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace semnav::world {

namespace {

struct CellHit {
  bool hit = false;
  double t = 0;
  uint8_t cls = 0;
};

// Nearest surface intersection inside one cell over the ray interval
// [t_in, t_out]: vertical face at entry, ground plane, canopy slab.
CellHit cell_hit(const WorldModel& w, int64_t cx, int64_t cy, double oz, double dz,
                 double t_in, double t_out, uint8_t canopy_cls) {
  CellHit best;
  const size_t idx = static_cast<size_t>(cy * w.nx + cx);
  const double e = w.elevation[idx];
  const double z_in = oz + dz * t_in;
  if (t_in > 0 && z_in < e) {
    return {true, t_in, w.class_grid[idx]};
  }
  if (dz < 0) {
    const double tg = (e - oz) / dz;
    if (tg >= t_in && tg <= t_out && tg > 0) best = {true, tg, w.class_grid[idx]};
  }
  const double cb = w.canopy_base[idx];
  if (cb > 0) {
    const double ct = cb + w.canopy_thickness;
    double s = -1;
    if (dz != 0) {
      const double ta = (cb - oz) / dz, tb = (ct - oz) / dz;
      const double lo = std::min(ta, tb), hi = std::max(ta, tb);
      const double ss = std::max(lo, t_in), ee = std::min(hi, t_out);
      if (ss <= ee && ss > 0) s = ss;
    } else if (oz >= cb && oz <= ct && t_in > 0) {
      s = t_in;
    }
    if (s > 0 && (!best.hit || s < best.t)) best = {true, s, canopy_cls};
  }
  return best;
}

}  // namespace

RayHit cast_ray(const WorldModel& world, double ox, double oy, double oz, double dx,
                double dy, double dz, double max_range) {
  const double len = std::sqrt(dx * dx + dy * dy + dz * dz);
  if (!(len > 0)) throw std::invalid_argument("cast_ray: zero direction");
  dx /= len;
  dy /= len;
  dz /= len;
  const double cs = world.cell_size;
  const uint8_t canopy_cls = world.registry.find("tree").value_or(0);

  // vertical ray: single-cell test
  if (dx == 0 && dy == 0) {
    const int64_t cx = static_cast<int64_t>(std::floor(ox / cs));
    const int64_t cy = static_cast<int64_t>(std::floor(oy / cs));
    if (cx < 0 || cy < 0 || cx >= world.nx || cy >= world.ny) return {};
    CellHit h = cell_hit(world, cx, cy, oz, dz, 1e-12, max_range, canopy_cls);
    if (!h.hit) return {};
    return {true, h.t, ox, oy, oz + dz * h.t, h.cls};
  }

  int64_t cx = static_cast<int64_t>(std::floor(ox / cs));
  int64_t cy = static_cast<int64_t>(std::floor(oy / cs));
  const int64_t step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int64_t step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  const double t_delta_x = step_x != 0 ? cs / std::fabs(dx) : 1e300;
  const double t_delta_y = step_y != 0 ? cs / std::fabs(dy) : 1e300;
  double t_max_x = 1e300, t_max_y = 1e300;
  if (step_x > 0)
    t_max_x = ((static_cast<double>(cx) + 1.0) * cs - ox) / dx;
  else if (step_x < 0)
    t_max_x = (static_cast<double>(cx) * cs - ox) / dx;
  if (step_y > 0)
    t_max_y = ((static_cast<double>(cy) + 1.0) * cs - oy) / dy;
  else if (step_y < 0)
    t_max_y = (static_cast<double>(cy) * cs - oy) / dy;

  double t = 0;
  while (t < max_range) {
    const double t_exit = std::min({t_max_x, t_max_y, max_range});
    if (cx >= 0 && cy >= 0 && cx < world.nx && cy < world.ny) {
      CellHit h = cell_hit(world, cx, cy, oz, dz, t, t_exit, canopy_cls);
      if (h.hit)
        return {true, h.t, ox + dx * h.t, oy + dy * h.t, oz + dz * h.t, h.cls};
    }
    if (t_exit >= max_range) break;
    if (t_max_x < t_max_y) {
      t = t_max_x;
      t_max_x += t_delta_x;
      cx += step_x;
    } else {
      t = t_max_y;
      t_max_y += t_delta_y;
      cy += step_y;
    }
  }
  return {};
}

PointCloud sample_pointcloud(const WorldModel& world, const RobotState& state,
                             int n_points, uint64_t seed, const LidarConfig& cfg) {
  if (n_points <= 0) throw std::invalid_argument("sample_pointcloud: n_points must be > 0");
  Rng rng(seed);
  PointCloud cloud;
  cloud.xyzi.reserve(static_cast<size_t>(n_points) * 4);

  const double base_z = world.in_bounds(state.x, state.y) ? world.elev_at(state.x, state.y) : 0.0;
  const double oz = base_z + cfg.sensor_height;
  const double ch = std::cos(state.heading), sh = std::sin(state.heading);
  const double el_lo = cfg.elevation_min_deg * M_PI / 180.0;
  const double el_hi = cfg.elevation_max_deg * M_PI / 180.0;

  // full stratified batches, so the kept points always span the whole
  // azimuth/elevation fan; extra hits are strided away afterwards
  std::vector<double> hits;
  for (int batch = 0; batch < 16 && static_cast<int>(hits.size() / 4) < n_points; ++batch) {
    for (int j = 0; j < cfg.elevation_steps; ++j) {
      for (int i = 0; i < cfg.azimuth_steps; ++i) {
        const double az = (static_cast<double>(i) + rng.uniform()) * 2.0 * M_PI /
                          static_cast<double>(cfg.azimuth_steps);
        const double el =
            el_lo + (static_cast<double>(j) + rng.uniform()) * (el_hi - el_lo) /
                        static_cast<double>(cfg.elevation_steps);
        // robot-frame direction, then world
        const double rx = std::cos(el) * std::cos(az);
        const double ry = std::cos(el) * std::sin(az);
        const double rz = std::sin(el);
        const double wx = ch * rx - sh * ry, wy = sh * rx + ch * ry;
        RayHit h = cast_ray(world, state.x, state.y, oz, wx, wy, rz, cfg.max_range);
        if (!h.hit) continue;
        // back to the sensor-origin body frame
        const double px = h.x - state.x, py = h.y - state.y;
        const double bx = ch * px + sh * py, by = -sh * px + ch * py;
        const double bz = h.z - oz;
        const double inten = std::clamp(
            world.registry.def(h.cls).intensity + rng.normal(0.0, cfg.intensity_noise), 0.0,
            1.0);
        hits.insert(hits.end(), {bx, by, bz, inten});
      }
    }
  }
  int collected = static_cast<int>(hits.size() / 4);
  if (collected == 0) {
    hits = {0, 0, -cfg.sensor_height, 0};
    collected = 1;
  }
  if (collected <= n_points) {
    cloud.xyzi = hits;
    // degenerate worlds may starve the sampler; cycle what we have
    while (static_cast<int>(cloud.xyzi.size() / 4) < n_points) {
      const size_t src =
          (cloud.xyzi.size() / 4 % static_cast<size_t>(collected)) * 4;
      for (int i = 0; i < 4; ++i) cloud.xyzi.push_back(hits[src + static_cast<size_t>(i)]);
    }
  } else {
    // uniform stride keeps the angular coverage
    for (int k = 0; k < n_points; ++k) {
      const size_t src = static_cast<size_t>(
          static_cast<int64_t>(k) * collected / n_points) * 4;
      for (int i = 0; i < 4; ++i) cloud.xyzi.push_back(hits[src + static_cast<size_t>(i)]);
    }
  }
  return cloud;
}

ClassProbMaps render_semantics(const WorldModel& world, const RobotState& state,
                               const CameraModel& cam,
                               const std::vector<std::string>& queries,
                               const RenderNoise& noise) {
  cam.validate();
  ClassProbMaps out;
  out.width = cam.width;
  out.height = cam.height;
  out.names = queries;
  out.timestamp = state.t;
  const size_t npix = static_cast<size_t>(cam.width) * static_cast<size_t>(cam.height);
  out.maps.assign(queries.size(), std::vector<double>(npix, 0.0));

  // map query names to registry ids (or sky); unknown names stay all-zero
  const int kUnknown = -2, kSky = -1;
  std::vector<int> qid(queries.size(), kUnknown);
  for (size_t q = 0; q < queries.size(); ++q) {
    if (queries[q] == kSkyClass)
      qid[q] = kSky;
    else if (auto id = world.registry.find(queries[q]))
      qid[q] = static_cast<int>(*id);
  }

  // camera center & axes in the world frame
  const double base_z = world.in_bounds(state.x, state.y) ? world.elev_at(state.x, state.y) : 0.0;
  // c_r = -R^T t
  double c_r[3];
  for (int i = 0; i < 3; ++i)
    c_r[i] = -(cam.r[0 + i] * cam.t[0] + cam.r[3 + i] * cam.t[1] + cam.r[6 + i] * cam.t[2]);
  const double ch = std::cos(state.heading), sh = std::sin(state.heading);
  const double ox = state.x + ch * c_r[0] - sh * c_r[1];
  const double oy = state.y + sh * c_r[0] + ch * c_r[1];
  const double oz = base_z + c_r[2];

  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const double dc[3] = {(static_cast<double>(u) + 0.5 - cam.cx) / cam.fx,
                            (static_cast<double>(v) + 0.5 - cam.cy) / cam.fy, 1.0};
      // robot frame: d_r = R^T d_cam, then rotate by heading
      double dr[3];
      for (int i = 0; i < 3; ++i)
        dr[i] = cam.r[0 + i] * dc[0] + cam.r[3 + i] * dc[1] + cam.r[6 + i] * dc[2];
      const double dwx = ch * dr[0] - sh * dr[1];
      const double dwy = sh * dr[0] + ch * dr[1];
      RayHit h = cast_ray(world, ox, oy, oz, dwx, dwy, dr[2], 100.0);
      const int cls = h.hit ? static_cast<int>(h.cls) : kSky;
      for (size_t q = 0; q < queries.size(); ++q)
        if (qid[q] == cls)
          out.maps[q][static_cast<size_t>(v) * static_cast<size_t>(cam.width) +
                      static_cast<size_t>(u)] = 1.0;
    }
  }

  if (noise.blur_sigma_px > 0)
    for (auto& m : out.maps) smooth_field(m, cam.height, cam.width, noise.blur_sigma_px);
  if (noise.noise_std > 0) {
    Rng rng(noise.seed);
    for (auto& m : out.maps)
      for (double& p : m) {
        const double n = std::clamp(rng.normal(0.0, noise.noise_std), -3.0 * noise.noise_std,
                                    3.0 * noise.noise_std);
        p = std::clamp(p + n, 0.0, 1.0);
      }
  }
  return out;
}

LocalGrid crop_elevation(const WorldModel& world, const RobotState& state,
                         const ElevationCropConfig& cfg) {
  LocalGrid g;
  g.res = cfg.res;
  g.nx = static_cast<int64_t>(std::llround(cfg.extent / cfg.res));
  g.ny = g.nx;
  g.min_x = 0.0;
  g.min_y = -cfg.extent / 2.0;
  g.cells.assign(static_cast<size_t>(g.nx * g.ny), cfg.unknown_elevation);
  for (int64_t iy = 0; iy < g.ny; ++iy)
    for (int64_t ix = 0; ix < g.nx; ++ix) {
      const double rx = g.min_x + (static_cast<double>(ix) + 0.5) * g.res;
      const double ry = g.min_y + (static_cast<double>(iy) + 0.5) * g.res;
      double wx, wy;
      robot_to_world(state, rx, ry, wx, wy);
      if (world.in_bounds(wx, wy)) g.at(ix, iy) = world.elev_at(wx, wy);
    }
  return g;
}

void smooth_field(std::vector<double>& field, int64_t h, int64_t w, double sigma,
                  double trunc) {
  if (!(sigma > 0)) return;
  const int64_t radius = static_cast<int64_t>(std::ceil(trunc * sigma));
  std::vector<double> k(static_cast<size_t>(2 * radius + 1));
  double s = 0;
  for (int64_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<size_t>(i + radius)] = v;
    s += v;
  }
  for (double& v : k) v /= s;
  auto reflect = [](int64_t i, int64_t n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
  };
  std::vector<double> tmp(field.size());
  for (int64_t r = 0; r < h; ++r)
    for (int64_t c = 0; c < w; ++c) {
      double acc = 0;
      for (int64_t t = -radius; t <= radius; ++t)
        acc += k[static_cast<size_t>(t + radius)] *
               field[static_cast<size_t>(r * w + reflect(c + t, w))];
      tmp[static_cast<size_t>(r * w + c)] = acc;
    }
  for (int64_t r = 0; r < h; ++r)
    for (int64_t c = 0; c < w; ++c) {
      double acc = 0;
      for (int64_t t = -radius; t <= radius; ++t)
        acc += k[static_cast<size_t>(t + radius)] *
               tmp[static_cast<size_t>(reflect(r + t, h) * w + c)];
      field[static_cast<size_t>(r * w + c)] = acc;
    }
}

}  // namespace semnav::world

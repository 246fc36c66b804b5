#include "semnav/data/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "semnav/seg/pointseg.hpp"

namespace semnav::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
// corner-cutting smoothing of the cell-resolution polyline; grid paths
// zig-zag at 45 degrees and would otherwise impose infeasible accelerations
// on the resampled velocity targets
std::vector<Vec2> chaikin_smooth(const std::vector<Vec2>& path, int iterations) {
  std::vector<Vec2> cur = path;
  for (int it = 0; it < iterations; ++it) {
    if (cur.size() < 3) break;
    std::vector<Vec2> next;
    next.reserve(cur.size() * 2);
    next.push_back(cur.front());
    for (size_t i = 0; i + 1 < cur.size(); ++i) {
      const Vec2& a = cur[i];
      const Vec2& b = cur[i + 1];
      next.push_back({0.75 * a.x + 0.25 * b.x, 0.75 * a.y + 0.25 * b.y});
      next.push_back({0.25 * a.x + 0.75 * b.x, 0.25 * a.y + 0.75 * b.y});
    }
    next.push_back(cur.back());
    cur = std::move(next);
  }
  return cur;
}
}  // namespace

std::vector<Trajectory> plan_ground_truth(const world::WorldModel& w,
                                          const world::RobotState& pose,
                                          const DatasetConfig& cfg) {
  const std::vector<double> costs = reachability_costs(w, {pose.x, pose.y}, cfg.planner);
  const int n_buckets = 360 / cfg.frontier_bearing_deg;
  // one frontier per bearing bucket: the reachable cell whose euclidean
  // distance is largest within [0.9, 1.0] * r_max
  std::vector<int64_t> pick(static_cast<size_t>(n_buckets), -1);
  std::vector<double> pick_dist(static_cast<size_t>(n_buckets), -1.0);
  for (int64_t idx = 0; idx < w.nx * w.ny; ++idx) {
    if (!std::isfinite(costs[static_cast<size_t>(idx)])) continue;
    const double cx = (static_cast<double>(idx % w.nx) + 0.5) * w.cell_size;
    const double cy = (static_cast<double>(idx / w.nx) + 0.5) * w.cell_size;
    const double d = std::hypot(cx - pose.x, cy - pose.y);
    if (d < 0.9 * cfg.r_max || d > cfg.r_max) continue;
    const double bearing = std::atan2(cy - pose.y, cx - pose.x);
    int bucket = static_cast<int>(std::floor((bearing + M_PI) / (2 * M_PI) *
                                             static_cast<double>(n_buckets)));
    bucket = std::clamp(bucket, 0, n_buckets - 1);
    if (d > pick_dist[static_cast<size_t>(bucket)]) {
      pick_dist[static_cast<size_t>(bucket)] = d;
      pick[static_cast<size_t>(bucket)] = idx;
    }
  }
  std::vector<Trajectory> out;
  for (int b = 0; b < n_buckets; ++b) {
    const int64_t idx = pick[static_cast<size_t>(b)];
    if (idx < 0) continue;
    const Vec2 frontier{(static_cast<double>(idx % w.nx) + 0.5) * w.cell_size,
                        (static_cast<double>(idx / w.nx) + 0.5) * w.cell_size};
    const auto raw_path = plan_path(w, {pose.x, pose.y}, frontier, cfg.planner);
    if (!raw_path || raw_path->size() < 2) continue;
    const std::vector<Vec2> smooth = chaikin_smooth(*raw_path, 3);
    // dense arc-length samples
    const double ds = 0.1;
    std::vector<Vec2> dense;
    dense.push_back(smooth.front());
    double carry = 0;
    for (size_t i = 1; i < smooth.size(); ++i) {
      const double seg = dist(smooth[i - 1], smooth[i]);
      if (seg <= 0) continue;
      double s = ds - carry;
      while (s <= seg) {
        const double f = s / seg;
        dense.push_back({smooth[i - 1].x + f * (smooth[i].x - smooth[i - 1].x),
                         smooth[i - 1].y + f * (smooth[i].y - smooth[i - 1].y)});
        s += ds;
      }
      carry = seg - (s - ds);
    }
    if (dense.size() < 3) continue;
    // curvature-aware speed profile: slow into turns, stop at the path end,
    // accelerate within the longitudinal limit (stands in for recorded
    // driving timing, which a constant-speed resampling would not)
    // lateral and longitudinal each get a_lim / sqrt(2) so the vector sum
    // stays inside the limit at corners
    const double a_comp = cfg.model.accel_limit / M_SQRT2;
    const size_t n = dense.size();
    std::vector<double> v(n, cfg.cruise);
    for (size_t i = 1; i + 1 < n; ++i) {
      const double h0 = std::atan2(dense[i].y - dense[i - 1].y, dense[i].x - dense[i - 1].x);
      const double h1 = std::atan2(dense[i + 1].y - dense[i].y, dense[i + 1].x - dense[i].x);
      const double kappa = std::fabs(world::wrap_angle(h1 - h0)) / ds;
      if (kappa > 1e-6) v[i] = std::min(v[i], std::sqrt(a_comp / kappa));
    }
    v[n - 1] = 0.0;
    for (size_t i = n - 1; i-- > 0;)
      v[i] = std::min(v[i], std::sqrt(v[i + 1] * v[i + 1] + 2 * a_comp * ds));
    v[0] = std::min(v[0], std::fabs(pose.v));  // launch from the current speed
    for (size_t i = 1; i < n; ++i)
      v[i] = std::min(v[i], std::sqrt(v[i - 1] * v[i - 1] + 2 * a_comp * ds));
    // walk the profile emitting a waypoint every dt
    Trajectory t;
    t.dt = cfg.model.dt;
    Vec2 prev{0, 0};
    size_t walk = 0;
    double clock = 0, next_emit = cfg.model.dt;
    Vec2 cur_w = dense[0];
    while (static_cast<int64_t>(t.waypoints.size()) < cfg.model.n_waypoints) {
      if (walk + 1 < n) {
        const double v_avg = std::max(0.05, 0.5 * (v[walk] + v[walk + 1]));
        clock += ds / v_avg;
        ++walk;
        cur_w = dense[walk];
      } else {
        clock = next_emit;  // stopped at the end: hold position
      }
      while (clock >= next_emit &&
             static_cast<int64_t>(t.waypoints.size()) < cfg.model.n_waypoints) {
        double rx, ry;
        world::world_to_robot(pose, cur_w.x, cur_w.y, rx, ry);
        t.waypoints.push_back({rx, ry});
        t.velocities.push_back({(rx - prev.x) / t.dt, (ry - prev.y) / t.dt});
        prev = {rx, ry};
        next_emit += cfg.model.dt;
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Trajectory> diversity_filter(const std::vector<Trajectory>& paths,
                                         double fde_min) {
  std::vector<size_t> order(paths.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto length_of = [&](size_t i) {
    double len = 0;
    Vec2 prev{0, 0};
    for (const Vec2& p : paths[i].waypoints) {
      len += dist(prev, p);
      prev = p;
    }
    return len;
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return length_of(a) < length_of(b); });
  std::vector<Trajectory> kept;
  for (size_t i : order) {
    bool ok = true;
    for (const auto& k : kept)
      if (fde(paths[i], k) <= fde_min) {
        ok = false;
        break;
      }
    if (ok) kept.push_back(paths[i]);
  }
  return kept;
}

std::vector<double> strict_obstacle_map(const world::WorldModel& w,
                                        const world::RobotState& pose, int64_t cells,
                                        double res) {
  std::vector<double> grid(static_cast<size_t>(cells * cells), 0.0);
  const double half = static_cast<double>(cells) * res / 2.0;
  for (int64_t iy = 0; iy < cells; ++iy)
    for (int64_t ix = 0; ix < cells; ++ix) {
      const double rx = -half + (static_cast<double>(ix) + 0.5) * res;
      const double ry = -half + (static_cast<double>(iy) + 0.5) * res;
      double wx, wy;
      world::robot_to_world(pose, rx, ry, wx, wy);
      if (!w.in_bounds(wx, wy)) continue;
      if (w.registry.def(w.class_at(wx, wy)).strict)
        grid[static_cast<size_t>(iy * cells + ix)] = 1.0;
    }
  return grid;
}

std::vector<gen::TrainingSample> slice_run(const world::WorldModel& w,
                                           const exec::PathTrace& trace, Vec2 run_goal,
                                           const DatasetConfig& cfg, uint64_t seed) {
  std::vector<gen::TrainingSample> out;
  if (trace.states.empty()) return out;
  Rng rng(seed);
  const double dt_sim = cfg.episode.dt_sim;
  const auto& states = trace.states;
  auto state_at = [&](double t) {
    const size_t idx = std::min(states.size() - 1,
                                static_cast<size_t>(std::llround(t / dt_sim)));
    return states[idx];
  };
  const double t_end = states.back().t;
  // capture clouds on the slice grid so history lookups are exact
  std::map<int64_t, world::PointCloud> clouds;
  auto cloud_at = [&](int64_t slice_idx) -> const world::PointCloud& {
    auto it = clouds.find(slice_idx);
    if (it == clouds.end()) {
      const world::RobotState s = state_at(static_cast<double>(slice_idx) *
                                           cfg.slice_interval);
      world::PointCloud raw = world::sample_pointcloud(
          w, s, cfg.model.n_points,
          seed ^ (0x9e3779b9u + static_cast<uint64_t>(slice_idx) * 0x10001), cfg.lidar);
      it = clouds.emplace(slice_idx, seg::preprocess_cloud(raw, cfg.model.seg)).first;
    }
    return it->second;
  };

  const int64_t first_slice =
      static_cast<int64_t>(std::ceil(cfg.warmup / cfg.slice_interval));
  const int64_t last_slice = static_cast<int64_t>(std::floor(t_end / cfg.slice_interval));
  for (int64_t k = first_slice; k <= last_slice; ++k) {
    const double t = static_cast<double>(k) * cfg.slice_interval;
    const world::RobotState pose = state_at(t);
    gen::TrainingSample s;
    for (int c = cfg.model.n_lidar - 1; c >= 0; --c)
      s.obs.lidar.push_back(cloud_at(std::max<int64_t>(0, k - c)));
    for (int h = cfg.model.n_history - 1; h >= 0; --h) {
      const world::RobotState snap = state_at(
          std::max(0.0, t - static_cast<double>(h) * cfg.slice_interval));
      double rx, ry;
      world::world_to_robot(pose, snap.x, snap.y, rx, ry);
      const double vwx = snap.v * std::cos(snap.heading);
      const double vwy = snap.v * std::sin(snap.heading);
      const double c = std::cos(pose.heading), sn = std::sin(pose.heading);
      s.obs.history.push_back({rx, ry, (c * vwx + sn * vwy) / cfg.model.v_max,
                               (-sn * vwx + c * vwy) / cfg.model.v_max});
    }
    const double dxg = run_goal.x - pose.x, dyg = run_goal.y - pose.y;
    s.obs.goal_rho = std::hypot(dxg, dyg);
    s.obs.goal_theta = world::wrap_angle(std::atan2(dyg, dxg) - pose.heading);

    std::vector<Trajectory> fan = plan_ground_truth(w, pose, cfg);
    std::vector<Trajectory> kept = diversity_filter(fan, cfg.fde_min);
    if (kept.empty()) continue;  // no reachable frontier: skip the slice
    if (static_cast<int>(kept.size()) > cfg.m_max) {
      // deterministic spread over the kept list
      std::vector<Trajectory> spread;
      const double stride =
          static_cast<double>(kept.size()) / static_cast<double>(cfg.m_max);
      for (int i = 0; i < cfg.m_max; ++i)
        spread.push_back(kept[static_cast<size_t>(std::floor(i * stride))]);
      kept = std::move(spread);
    }
    s.gt = std::move(kept);
    s.map_cells = cfg.model.heatmap.cells;
    s.map_res = cfg.model.heatmap.res;
    s.obstacle_map = strict_obstacle_map(w, pose, s.map_cells, s.map_res);
    seg::label_points(s.obs.lidar.back(), w, pose, cfg.model.seg, s.seg_labels,
                      s.seg_in_loss);
    s.world_seed = w.seed;
    s.pose_x = pose.x;
    s.pose_y = pose.y;
    s.pose_heading = pose.heading;
    out.push_back(std::move(s));
  }
  (void)rng;
  return out;
}

std::vector<gen::TrainingSample> generate_dataset(const world::WorldModel& w, int n_runs,
                                                  const DatasetConfig& cfg, uint64_t seed) {
  std::vector<gen::TrainingSample> all;
  Rng rng(seed);
  for (int run = 0; run < n_runs; ++run) {
    Vec2 start{w.start_x, w.start_y}, goal{w.goal_x, w.goal_y};
    if (run > 0) {
      // random pavement-connected pair
      for (int attempt = 0; attempt < 200; ++attempt) {
        const Vec2 cs{rng.uniform(1.0, static_cast<double>(w.nx) * w.cell_size - 1.0),
                      rng.uniform(1.0, static_cast<double>(w.ny) * w.cell_size - 1.0)};
        const Vec2 cg{rng.uniform(1.0, static_cast<double>(w.nx) * w.cell_size - 1.0),
                      rng.uniform(1.0, static_cast<double>(w.ny) * w.cell_size - 1.0)};
        if (w.strict_at(cs.x, cs.y) || w.strict_at(cg.x, cg.y)) continue;
        if (dist(cs, cg) < 6.0) continue;
        if (!plan_path(w, cs, cg, cfg.planner)) continue;
        start = cs;
        goal = cg;
        break;
      }
    }
    const auto path = plan_path(w, start, goal, cfg.planner);
    if (!path) continue;
    exec::PathTrace trace = exec::trace_path(w, *path, goal, cfg.episode);
    auto samples = slice_run(w, trace, goal, cfg, seed + static_cast<uint64_t>(run) * 977);
    all.insert(all.end(), samples.begin(), samples.end());
  }
  return all;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'N', 'D', 'S'};

uint64_t fnv1a(const std::string& text) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

json config_json(const DatasetConfig& cfg) {
  return json{{"r_max", cfg.r_max},
              {"fde_min", cfg.fde_min},
              {"slice_interval", cfg.slice_interval},
              {"warmup", cfg.warmup},
              {"cruise", cfg.cruise},
              {"m_max", cfg.m_max},
              {"frontier_bearing_deg", cfg.frontier_bearing_deg},
              {"n_waypoints", cfg.model.n_waypoints},
              {"n_lidar", cfg.model.n_lidar},
              {"n_history", cfg.model.n_history},
              {"n_points", cfg.model.n_points},
              {"heatmap_cells", cfg.model.heatmap.cells},
              {"heatmap_res", cfg.model.heatmap.res},
              {"soft_mult", cfg.planner.soft_mult}};
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * 8));
}

std::vector<double> read_doubles(std::istream& is, size_t n) {
  std::vector<double> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 8));
  if (!is) throw std::runtime_error("dataset: truncated payload");
  return v;
}

json trajectory_json(const Trajectory& t) {
  json jw = json::array(), jv = json::array();
  for (const Vec2& p : t.waypoints) jw.push_back({p.x, p.y});
  for (const Vec2& v : t.velocities) jv.push_back({v.x, v.y});
  return json{{"dt", t.dt}, {"waypoints", jw}, {"velocities", jv}};
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.dt = j.at("dt").get<double>();
  for (const auto& p : j.at("waypoints")) t.waypoints.push_back({p[0], p[1]});
  for (const auto& v : j.at("velocities")) t.velocities.push_back({v[0], v[1]});
  return t;
}

}  // namespace

uint64_t dataset_config_hash(const DatasetConfig& cfg) { return fnv1a(config_json(cfg).dump()); }

void write_dataset(const std::string& dir, const std::vector<gen::TrainingSample>& samples,
                   const DatasetConfig& cfg) {
  fs::create_directories(dir);
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    json header;
    header["history"] = json::array();
    for (const auto& row : s.obs.history)
      header["history"].push_back({row[0], row[1], row[2], row[3]});
    header["goal"] = {s.obs.goal_rho, s.obs.goal_theta};
    header["gt"] = json::array();
    for (const auto& t : s.gt) header["gt"].push_back(trajectory_json(t));
    header["map_cells"] = s.map_cells;
    header["map_res"] = s.map_res;
    header["world_seed"] = s.world_seed;
    header["pose"] = {s.pose_x, s.pose_y, s.pose_heading};
    header["cloud_sizes"] = json::array();
    for (const auto& c : s.obs.lidar) header["cloud_sizes"].push_back(c.size());
    header["seg_points"] = s.seg_labels.size();

    char name[32];
    std::snprintf(name, sizeof(name), "sample_%06zu.bin", i);
    std::ofstream os(fs::path(dir) / name, std::ios::binary);
    if (!os) throw std::runtime_error("write_dataset: cannot open sample file");
    const std::string hs = header.dump();
    const uint32_t hlen = static_cast<uint32_t>(hs.size());
    os.write(kMagic, 4);
    os.write(reinterpret_cast<const char*>(&hlen), 4);
    os.write(hs.data(), hlen);
    for (const auto& c : s.obs.lidar) write_doubles(os, c.xyzi);
    write_doubles(os, s.obstacle_map);
    for (size_t k = 0; k < s.seg_labels.size(); ++k) {
      const unsigned char lab = static_cast<unsigned char>(s.seg_labels[k]);
      const unsigned char in = s.seg_in_loss.empty() ? 1 : s.seg_in_loss[k];
      os.put(static_cast<char>(lab));
      os.put(static_cast<char>(in));
    }
  }
  json manifest;
  manifest["count"] = samples.size();
  manifest["config"] = config_json(cfg);
  manifest["config_hash"] = dataset_config_hash(cfg);
  json mdist = json::array();
  for (const auto& s : samples) mdist.push_back(s.gt.size());
  manifest["m_per_sample"] = mdist;
  std::ofstream os(fs::path(dir) / "manifest.json");
  os << manifest.dump(2) << "\n";
}

std::vector<gen::TrainingSample> read_dataset(const std::string& dir) {
  std::ifstream ms(fs::path(dir) / "manifest.json");
  if (!ms) throw std::runtime_error("read_dataset: missing manifest in " + dir);
  json manifest;
  ms >> manifest;
  const size_t count = manifest.at("count").get<size_t>();
  std::vector<gen::TrainingSample> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%06zu.bin", i);
    std::ifstream is(fs::path(dir) / name, std::ios::binary);
    if (!is) throw std::runtime_error("read_dataset: manifest/file count mismatch at " +
                                      std::string(name));
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
      throw std::runtime_error("read_dataset: bad magic in " + std::string(name));
    uint32_t hlen = 0;
    is.read(reinterpret_cast<char*>(&hlen), 4);
    std::string hs(hlen, '\0');
    is.read(hs.data(), hlen);
    json header = json::parse(hs);
    gen::TrainingSample s;
    for (const auto& row : header.at("history"))
      s.obs.history.push_back({row[0], row[1], row[2], row[3]});
    s.obs.goal_rho = header.at("goal")[0].get<double>();
    s.obs.goal_theta = header.at("goal")[1].get<double>();
    for (const auto& t : header.at("gt")) s.gt.push_back(trajectory_from_json(t));
    s.map_cells = header.at("map_cells").get<int64_t>();
    s.map_res = header.at("map_res").get<double>();
    s.world_seed = header.at("world_seed").get<uint64_t>();
    s.pose_x = header.at("pose")[0].get<double>();
    s.pose_y = header.at("pose")[1].get<double>();
    s.pose_heading = header.at("pose")[2].get<double>();
    for (const auto& sz : header.at("cloud_sizes")) {
      world::PointCloud c;
      c.xyzi = read_doubles(is, sz.get<size_t>() * 4);
      s.obs.lidar.push_back(std::move(c));
    }
    s.obstacle_map = read_doubles(is, static_cast<size_t>(s.map_cells * s.map_cells));
    const size_t seg_points = header.value("seg_points", size_t{0});
    s.seg_labels.resize(seg_points);
    s.seg_in_loss.resize(seg_points);
    for (size_t k = 0; k < seg_points; ++k) {
      s.seg_labels[k] = is.get();
      s.seg_in_loss[k] = static_cast<char>(is.get());
    }
    if (!is) throw std::runtime_error("read_dataset: truncated label payload");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace semnav::data

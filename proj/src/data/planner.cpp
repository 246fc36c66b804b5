#include "semnav/data/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace semnav::data {

namespace {

struct Node {
  double f;
  double g;
  int64_t idx;
  bool operator>(const Node& o) const {
    if (f != o.f) return f > o.f;
    return idx > o.idx;  // deterministic ordering on ties
  }
};

double terrain_mult(const world::WorldModel& w, int64_t idx, double soft_mult) {
  const auto& def = w.registry.def(w.class_grid[static_cast<size_t>(idx)]);
  if (def.name == "pavement") return 1.0;
  return soft_mult;  // grass, sand and any other soft class
}


}  // namespace

std::vector<uint8_t> inflated_blocked_mask(const world::WorldModel& w, double inflate) {
  const int64_t nx = w.nx, ny = w.ny;
  std::vector<uint8_t> strict(static_cast<size_t>(nx * ny), 0);
  for (int64_t i = 0; i < nx * ny; ++i)
    strict[static_cast<size_t>(i)] = w.registry.def(w.class_grid[static_cast<size_t>(i)]).strict;
  const int64_t r = static_cast<int64_t>(std::ceil(inflate / w.cell_size));
  if (r <= 0) return strict;
  std::vector<uint8_t> out(static_cast<size_t>(nx * ny), 0);
  for (int64_t cy = 0; cy < ny; ++cy)
    for (int64_t cx = 0; cx < nx; ++cx) {
      bool hit = false;
      for (int64_t dy = -r; dy <= r && !hit; ++dy)
        for (int64_t dx = -r; dx <= r && !hit; ++dx) {
          const int64_t px = cx + dx, py = cy + dy;
          if (px < 0 || py < 0 || px >= nx || py >= ny) continue;
          hit = strict[static_cast<size_t>(py * nx + px)];
        }
      out[static_cast<size_t>(cy * nx + cx)] = hit;
    }
  return out;
}

std::optional<std::vector<Vec2>> plan_path(const world::WorldModel& w, Vec2 start, Vec2 goal,
                                           const PlannerConfig& cfg) {
  if (!w.in_bounds(start.x, start.y) || !w.in_bounds(goal.x, goal.y)) return std::nullopt;
  const int64_t nx = w.nx, ny = w.ny;
  auto cell_of = [&](const Vec2& p) {
    return static_cast<int64_t>(p.y / w.cell_size) * nx +
           static_cast<int64_t>(p.x / w.cell_size);
  };
  const std::vector<uint8_t> mask = inflated_blocked_mask(w, cfg.inflate);
  auto blocked = [&](int64_t idx) { return mask[static_cast<size_t>(idx)] != 0; };
  const int64_t s = cell_of(start), g = cell_of(goal);
  if (blocked(s) || blocked(g)) return std::nullopt;

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<size_t>(nx * ny), inf);
  std::vector<int64_t> parent(static_cast<size_t>(nx * ny), -1);
  auto heur = [&](int64_t idx) {
    const double cx = (static_cast<double>(idx % nx) + 0.5) * w.cell_size;
    const double cy = (static_cast<double>(idx / nx) + 0.5) * w.cell_size;
    const double gx = (static_cast<double>(g % nx) + 0.5) * w.cell_size;
    const double gy = (static_cast<double>(g / nx) + 0.5) * w.cell_size;
    return std::hypot(cx - gx, cy - gy);
  };
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;
  dist[static_cast<size_t>(s)] = 0;
  open.push({heur(s), 0, s});
  while (!open.empty()) {
    Node n = open.top();
    open.pop();
    if (n.g > dist[static_cast<size_t>(n.idx)]) continue;
    if (n.idx == g) break;
    const int64_t cx = n.idx % nx, cy = n.idx / nx;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int64_t px = cx + dx, py = cy + dy;
        if (px < 0 || py < 0 || px >= nx || py >= ny) continue;
        const int64_t pidx = py * nx + px;
        if (blocked(pidx)) continue;
        const double step = w.cell_size * (dx != 0 && dy != 0 ? M_SQRT2 : 1.0);
        const double nd = n.g + step * terrain_mult(w, pidx, cfg.soft_mult);
        if (nd < dist[static_cast<size_t>(pidx)]) {
          dist[static_cast<size_t>(pidx)] = nd;
          parent[static_cast<size_t>(pidx)] = n.idx;
          open.push({nd + heur(pidx), nd, pidx});
        }
      }
  }
  if (dist[static_cast<size_t>(g)] == inf) return std::nullopt;
  std::vector<Vec2> path;
  for (int64_t cur = g; cur != -1; cur = parent[static_cast<size_t>(cur)])
    path.push_back({(static_cast<double>(cur % nx) + 0.5) * w.cell_size,
                    (static_cast<double>(cur / nx) + 0.5) * w.cell_size});
  std::reverse(path.begin(), path.end());
  return path;
}

double path_length(const std::vector<Vec2>& path) {
  double len = 0;
  for (size_t i = 1; i < path.size(); ++i) len += dist(path[i - 1], path[i]);
  return len;
}

std::vector<double> reachability_costs(const world::WorldModel& w, Vec2 start,
                                       const PlannerConfig& cfg) {
  const int64_t nx = w.nx, ny = w.ny;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<size_t>(nx * ny), inf);
  if (!w.in_bounds(start.x, start.y)) return dist;
  const std::vector<uint8_t> mask = inflated_blocked_mask(w, cfg.inflate);
  auto blocked = [&](int64_t idx) { return mask[static_cast<size_t>(idx)] != 0; };
  const int64_t s = static_cast<int64_t>(start.y / w.cell_size) * nx +
                    static_cast<int64_t>(start.x / w.cell_size);
  if (blocked(s)) return dist;
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;
  dist[static_cast<size_t>(s)] = 0;
  open.push({0, 0, s});
  while (!open.empty()) {
    Node n = open.top();
    open.pop();
    if (n.g > dist[static_cast<size_t>(n.idx)]) continue;
    const int64_t cx = n.idx % nx, cy = n.idx / nx;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int64_t px = cx + dx, py = cy + dy;
        if (px < 0 || py < 0 || px >= nx || py >= ny) continue;
        const int64_t pidx = py * nx + px;
        if (blocked(pidx)) continue;
        const double step = w.cell_size * (dx != 0 && dy != 0 ? M_SQRT2 : 1.0);
        const double nd = n.g + step * terrain_mult(w, pidx, cfg.soft_mult);
        if (nd < dist[static_cast<size_t>(pidx)]) {
          dist[static_cast<size_t>(pidx)] = nd;
          open.push({nd, nd, pidx});
        }
      }
  }
  return dist;
}

}  // namespace semnav::data

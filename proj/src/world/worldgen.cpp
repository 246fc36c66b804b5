#include "semnav/world/worldgen.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace semnav::world {

namespace {

void fill_rect(WorldModel& w, double x0, double y0, double x1, double y1, uint8_t cls,
               double elev) {
  const int64_t cx0 = std::max<int64_t>(0, static_cast<int64_t>(x0 / w.cell_size));
  const int64_t cy0 = std::max<int64_t>(0, static_cast<int64_t>(y0 / w.cell_size));
  const int64_t cx1 = std::min(w.nx - 1, static_cast<int64_t>(x1 / w.cell_size));
  const int64_t cy1 = std::min(w.ny - 1, static_cast<int64_t>(y1 / w.cell_size));
  for (int64_t cy = cy0; cy <= cy1; ++cy)
    for (int64_t cx = cx0; cx <= cx1; ++cx) {
      w.class_grid[static_cast<size_t>(cy * w.nx + cx)] = cls;
      w.elevation[static_cast<size_t>(cy * w.nx + cx)] = elev;
    }
}

void fill_disc(WorldModel& w, double x, double y, double radius, uint8_t cls, double elev) {
  const int64_t r_cells = static_cast<int64_t>(std::ceil(radius / w.cell_size));
  const int64_t cx = static_cast<int64_t>(x / w.cell_size);
  const int64_t cy = static_cast<int64_t>(y / w.cell_size);
  for (int64_t dy = -r_cells; dy <= r_cells; ++dy)
    for (int64_t dx = -r_cells; dx <= r_cells; ++dx) {
      const int64_t px = cx + dx, py = cy + dy;
      if (px < 0 || py < 0 || px >= w.nx || py >= w.ny) continue;
      const double ccx = (static_cast<double>(px) + 0.5) * w.cell_size;
      const double ccy = (static_cast<double>(py) + 0.5) * w.cell_size;
      if ((ccx - x) * (ccx - x) + (ccy - y) * (ccy - y) <= radius * radius) {
        w.class_grid[static_cast<size_t>(py * w.nx + px)] = cls;
        w.elevation[static_cast<size_t>(py * w.nx + px)] = elev;
      }
    }
}

void canopy_disc(WorldModel& w, double x, double y, double radius, double base) {
  const int64_t r_cells = static_cast<int64_t>(std::ceil(radius / w.cell_size));
  const int64_t cx = static_cast<int64_t>(x / w.cell_size);
  const int64_t cy = static_cast<int64_t>(y / w.cell_size);
  for (int64_t dy = -r_cells; dy <= r_cells; ++dy)
    for (int64_t dx = -r_cells; dx <= r_cells; ++dx) {
      const int64_t px = cx + dx, py = cy + dy;
      if (px < 0 || py < 0 || px >= w.nx || py >= w.ny) continue;
      const double ccx = (static_cast<double>(px) + 0.5) * w.cell_size;
      const double ccy = (static_cast<double>(py) + 0.5) * w.cell_size;
      if ((ccx - x) * (ccx - x) + (ccy - y) * (ccy - y) <= radius * radius)
        w.canopy_base[static_cast<size_t>(py * w.nx + px)] = base;
    }
}

}  // namespace

bool route_exists(const WorldModel& w, double clearance) {
  const int64_t sx = static_cast<int64_t>(w.start_x / w.cell_size);
  const int64_t sy = static_cast<int64_t>(w.start_y / w.cell_size);
  const int64_t gx = static_cast<int64_t>(w.goal_x / w.cell_size);
  const int64_t gy = static_cast<int64_t>(w.goal_y / w.cell_size);
  const int64_t margin = static_cast<int64_t>(std::ceil(clearance / w.cell_size));
  std::vector<uint8_t> seen(static_cast<size_t>(w.nx * w.ny), 0);
  std::deque<std::pair<int64_t, int64_t>> queue;
  auto strict_cell = [&](int64_t x, int64_t y) {
    return w.registry.def(w.class_grid[static_cast<size_t>(y * w.nx + x)]).strict;
  };
  auto passable = [&](int64_t x, int64_t y) {
    if (x < 0 || y < 0 || x >= w.nx || y >= w.ny) return false;
    for (int64_t dy = -margin; dy <= margin; ++dy)
      for (int64_t dx = -margin; dx <= margin; ++dx) {
        const int64_t px = x + dx, py = y + dy;
        if (px < 0 || py < 0 || px >= w.nx || py >= w.ny) continue;
        if (strict_cell(px, py)) return false;
      }
    return true;
  };
  if (!passable(sx, sy) || !passable(gx, gy)) return false;
  queue.emplace_back(sx, sy);
  seen[static_cast<size_t>(sy * w.nx + sx)] = 1;
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    if (x == gx && y == gy) return true;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int64_t px = x + dx, py = y + dy;
        if (!passable(px, py)) continue;
        if (seen[static_cast<size_t>(py * w.nx + px)]) continue;
        seen[static_cast<size_t>(py * w.nx + px)] = 1;
        queue.emplace_back(px, py);
      }
  }
  return false;
}

WorldModel generate_world(const WorldGenSpec& spec, uint64_t seed) {
  if (spec.grass_fraction + spec.sand_fraction >= 1.0)
    throw std::invalid_argument("generate_world: pavement fraction must be > 0");
  if (spec.extent_m <= 2.0 || spec.cell_size <= 0)
    throw std::invalid_argument("generate_world: bad extent or cell size");

  Rng rng(seed);
  WorldModel w;
  w.cell_size = spec.cell_size;
  w.nx = static_cast<int64_t>(std::llround(spec.extent_m / spec.cell_size));
  w.ny = w.nx;
  w.seed = seed;
  w.registry = default_registry();
  const size_t n_cells = static_cast<size_t>(w.nx * w.ny);
  const uint8_t pavement = *w.registry.find("pavement");
  const uint8_t grass = *w.registry.find("grass");
  const uint8_t sand = *w.registry.find("sand");
  const uint8_t tree = *w.registry.find("tree");
  const uint8_t wall = *w.registry.find("wall");
  const uint8_t hole = *w.registry.find("hole");
  w.class_grid.assign(n_cells, pavement);
  w.elevation.assign(n_cells, 0.0);
  w.canopy_base.assign(n_cells, 0.0);

  const double ext = spec.extent_m;
  w.start_x = 0.12 * ext;
  w.start_y = 0.12 * ext;
  w.goal_x = 0.88 * ext;
  w.goal_y = 0.88 * ext;

  // soft terrain patches
  auto place_patches = [&](uint8_t cls, double elev, double fraction) {
    double placed = 0;
    const double target = fraction * static_cast<double>(n_cells);
    int guard = 0;
    while (placed < target && guard++ < 1000) {
      const double pw = rng.uniform(1.5, 6.0), ph = rng.uniform(1.5, 6.0);
      const double px = rng.uniform(0, ext - pw), py = rng.uniform(0, ext - ph);
      fill_rect(w, px, py, px + pw, py + ph, cls, elev);
      placed += (pw / spec.cell_size) * (ph / spec.cell_size);
    }
  };
  if (spec.grass_fraction > 0) place_patches(grass, 0.05, spec.grass_fraction);
  if (spec.sand_fraction > 0) place_patches(sand, 0.02, spec.sand_fraction);

  // obstacles
  const int n_obstacles =
      static_cast<int>(spec.obstacle_density * static_cast<double>(n_cells));
  for (int i = 0; i < n_obstacles; ++i) {
    const double pick = rng.uniform();
    const double x = rng.uniform(0.05 * ext, 0.95 * ext);
    const double y = rng.uniform(0.05 * ext, 0.95 * ext);
    if (pick < spec.wall_fraction) {
      const double len = rng.uniform(2.0, 6.0);
      const bool horizontal = rng.uniform() < 0.5;
      if (horizontal)
        fill_rect(w, x, y, x + len, y + spec.cell_size, wall, spec.wall_height);
      else
        fill_rect(w, x, y, x + spec.cell_size, y + len, wall, spec.wall_height);
    } else if (pick < spec.wall_fraction + spec.hole_fraction) {
      const double sz = rng.uniform(0.8, 2.0);
      fill_rect(w, x, y, x + sz, y + sz, hole, -1.0);
    } else {
      fill_disc(w, x, y, 0.3, tree, spec.tree_height);
      if (spec.canopy) canopy_disc(w, x, y, spec.canopy_radius, spec.canopy_base);
    }
  }

  // clear the anchors, then carve a corridor if the obstacles sealed the
  // route (clearance covers the robot footprint plus planner inflation)
  const double clearance = 0.7;
  fill_rect(w, w.start_x - 1.2, w.start_y - 1.2, w.start_x + 1.2, w.start_y + 1.2, pavement,
            0.0);
  fill_rect(w, w.goal_x - 1.2, w.goal_y - 1.2, w.goal_x + 1.2, w.goal_y + 1.2, pavement, 0.0);
  if (!route_exists(w, clearance)) {
    const double steps = std::ceil(ext / spec.cell_size) * 2.0;
    for (double s = 0; s <= steps; ++s) {
      const double f = s / steps;
      const double x = w.start_x + f * (w.goal_x - w.start_x);
      const double y = w.start_y + f * (w.goal_y - w.start_y);
      fill_rect(w, x - 1.3, y - 1.3, x + 1.3, y + 1.3, pavement, 0.0);
    }
  }
  if (!route_exists(w, clearance))
    throw std::runtime_error("generate_world: carving failed to connect start and goal");
  w.validate(spec.step_height);
  return w;
}

}  // namespace semnav::world

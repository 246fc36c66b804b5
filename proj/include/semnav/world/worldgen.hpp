#pragma once
// Procedural world generation: pavement base, grass/sand patches, walls,
// trees with canopy, holes. A pavement-connected route between the start and
// goal anchors is guaranteed (carved if needed, then verified by grid search).

#include "semnav/ad/random.hpp"
#include "semnav/world/world.hpp"

namespace semnav::world {

struct WorldGenSpec {
  double extent_m = 24.0;
  double cell_size = 0.2;
  double grass_fraction = 0.15;
  double sand_fraction = 0.0;
  double obstacle_density = 0.01;  // obstacle seeds per cell
  double wall_fraction = 0.35;     // of obstacle seeds
  double hole_fraction = 0.1;
  bool canopy = true;
  double wall_height = 1.5;
  double tree_height = 2.0;
  double canopy_base = 2.2;
  double canopy_radius = 1.5;
  double step_height = 0.2;
};

WorldModel generate_world(const WorldGenSpec& spec, uint64_t seed);

// true when every-cell BFS over non-strict cells connects start to goal;
// clearance > 0 additionally requires that margin (box metric) to the
// nearest strict cell along the route
bool route_exists(const WorldModel& world, double clearance = 0.0);

}  // namespace semnav::world

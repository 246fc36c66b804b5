#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "semnav/ad/random.hpp"
#include "semnav/select/selector.hpp"

using namespace semnav;
using select::ClassCostTable;
using select::SelectorConfig;
using select::SemanticCostMap;
using world::ClassProbMaps;

namespace {
ClassProbMaps uniform_maps(const std::vector<std::string>& names, int w, int h) {
  ClassProbMaps m;
  m.width = w;
  m.height = h;
  m.names = names;
  m.maps.assign(names.size(), std::vector<double>(static_cast<size_t>(w * h), 0.0));
  return m;
}

world::CameraModel simple_cam() {
  // identity rotation, camera 2 m behind the ground plane along +z
  world::CameraModel cam;
  cam.fx = 100;
  cam.fy = 100;
  cam.cx = 320;
  cam.cy = 240;
  cam.width = 640;
  cam.height = 480;
  cam.t[2] = 1.0;
  return cam;
}
}  // namespace

TEST_CASE("costmap: argmax cost, lowest-index ties, uniform sky") {
  ClassCostTable table = ClassCostTable::defaults();
  ClassProbMaps m = uniform_maps(table.names(), 2, 1);
  // pixel 0: pavement 0.7 vs tree 0.3 -> cost 0
  m.maps[0][0] = 0.7;
  m.maps[1][0] = 0.3;
  // pixel 1: exact tie pavement/grass 0.5 -> pavement (lowest index), cost 0
  m.maps[0][1] = 0.5;
  m.maps[2][1] = 0.5;
  SemanticCostMap cm = select::build_costmap(m, table);
  CHECK(cm.at(0, 0) == 0.0);
  CHECK(cm.at(1, 0) == 0.0);

  ClassProbMaps sky = uniform_maps(table.names(), 3, 3);
  for (double& p : sky.maps[7]) p = 1.0;
  SemanticCostMap cs = select::build_costmap(sky, table);
  for (double c : cs.cost) CHECK(c == 4.0);

  ClassProbMaps none;
  CHECK_THROWS_AS(select::build_costmap(none, ClassCostTable{}), std::invalid_argument);
}

TEST_CASE("costmap is invariant to scaling every probability map") {
  Rng rng(5);
  ClassCostTable table = ClassCostTable::defaults();
  ClassProbMaps m = uniform_maps(table.names(), 8, 8);
  for (auto& mp : m.maps)
    for (double& p : mp) p = rng.uniform();
  SemanticCostMap a = select::build_costmap(m, table);
  for (auto& mp : m.maps)
    for (double& p : mp) p *= 0.37;
  SemanticCostMap b = select::build_costmap(m, table);
  CHECK(a.cost == b.cost);
}

TEST_CASE("projection: principal point, pinhole arithmetic, behind-camera flag") {
  world::CameraModel cam = simple_cam();
  Trajectory t;
  t.waypoints = {{0.0, 0.0}, {1.0, 0.0}, {0.0, -5.0}};
  // with identity rotation and t=(0,0,1): robot (x,y,0) -> cam (x,y,1)
  auto proj = select::project_trajectory(t, cam);
  CHECK(proj[0].visible);
  CHECK(proj[0].u == doctest::Approx(320.0));  // principal point
  CHECK(proj[0].v == doctest::Approx(240.0));
  CHECK(proj[1].visible);
  CHECK(proj[1].u == doctest::Approx(420.0));  // fx * 1/1 + cx
  CHECK(proj[1].v == doctest::Approx(240.0));
  CHECK(!proj[2].visible);  // outside the image bounds

  world::CameraModel fwd = world::forward_camera(64, 48, 90.0, 0.6);
  Trajectory behind;
  behind.waypoints = {{-2.0, 0.0}};
  CHECK(!select::project_trajectory(behind, fwd)[0].visible);
}

TEST_CASE("semantic score closed forms") {
  SelectorConfig cfg;
  SemanticCostMap cm;
  cm.width = 4;
  cm.height = 4;

  // three waypoints on pavement(0)
  cm.cost.assign(16, 0.0);
  std::vector<select::ProjectedWaypoint> proj(3);
  for (auto& p : proj) {
    p.visible = true;
    p.u = 1;
    p.v = 1;
  }
  CHECK(select::score_semantic(proj, cm, cfg).total == 0.0);

  // one waypoint on grass(2): 0.8 * 2 = 1.6
  cm.cost.assign(16, 2.0);
  auto s1 = select::score_semantic({proj[0]}, cm, cfg);
  CHECK(s1.total == doctest::Approx(1.6));
  CHECK(!s1.waypoints[0].masked);

  // one waypoint on wall(3) > T_occ: masked to gamma * C_u = 1.6
  cm.cost.assign(16, 3.0);
  auto s2 = select::score_semantic({proj[0]}, cm, cfg);
  CHECK(s2.total == doctest::Approx(1.6));
  CHECK(s2.waypoints[0].masked);

  // not visible contributes C_u with its own discount
  select::ProjectedWaypoint invis;
  auto s3 = select::score_semantic({invis}, cm, cfg);
  CHECK(s3.total == doctest::Approx(0.8 * 2.0));
}

TEST_CASE("mask consistency: nothing at or below T_occ masked, masked = gamma^j C_u") {
  Rng rng(11);
  SelectorConfig cfg;
  SemanticCostMap cm;
  cm.width = 16;
  cm.height = 16;
  cm.cost.resize(256);
  const double costs[] = {0, 2, 3, 4};
  for (double& c : cm.cost) c = costs[rng.uniform_int(4)];
  std::vector<select::ProjectedWaypoint> proj;
  for (int i = 0; i < 10; ++i) {
    select::ProjectedWaypoint p;
    p.visible = rng.uniform() < 0.8;
    p.u = rng.uniform(0, 16);
    p.v = rng.uniform(0, 16);
    proj.push_back(p);
  }
  auto s = select::score_semantic(proj, cm, cfg);
  for (const auto& w : s.waypoints) {
    if (w.visible && w.pixel_cost <= cfg.t_occ) CHECK(!w.masked);
    if (w.masked || !w.visible)
      CHECK(w.contribution ==
            doctest::Approx(std::pow(cfg.gamma, w.exponent) * cfg.c_u).epsilon(1e-12));
  }
}

TEST_CASE("discount monotonicity: later index never costs more") {
  SelectorConfig cfg;
  for (double cost : {1.0, 2.0}) {
    double prev = 1e9;
    for (int j = 1; j <= 12; ++j) {
      const double c = select::waypoint_contribution(true, cost, j, cfg);
      CHECK(c <= prev + 1e-15);
      prev = c;
    }
  }
}

TEST_CASE("goal cost closed forms") {
  SelectorConfig cfg;
  CHECK(select::goal_cost(0.0, 0.0, cfg) == 0.0);
  CHECK(select::goal_cost(std::exp(1.0) - 1.0, 0.0, cfg) == doctest::Approx(2.0));
  CHECK(select::goal_cost(0.0, M_PI, cfg) == doctest::Approx(0.2));

  Trajectory t;
  t.waypoints = {{1.0, 0.0}, {2.0, 0.0}};
  CHECK(select::score_goal(t, {2.0, 0.0}, cfg) == 0.0);  // at goal, aligned
  // goal straight ahead of the final segment -> aligned
  CHECK(select::score_goal(t, {3.0, 0.0}, cfg) ==
        doctest::Approx(cfg.alpha1 * std::log(2.0)));
}

TEST_CASE("select_best basics and brute-force argmin over 200 random candidates") {
  SelectorConfig cfg;
  world::CameraModel cam = simple_cam();
  ClassCostTable table = ClassCostTable::defaults();

  // single candidate returned regardless of cost
  SemanticCostMap cm;
  cm.width = 640;
  cm.height = 480;
  cm.cost.assign(640 * 480, 4.0);
  Trajectory only;
  only.waypoints = {{0.5, 0.5}};
  auto sel = select::select_best({only}, cm, cam, {5, 5}, cfg);
  REQUIRE(sel.has_value());
  CHECK(sel->index == 0);

  // two candidates differing in one grass-vs-pavement waypoint
  SemanticCostMap half;
  half.width = 640;
  half.height = 480;
  half.cost.assign(640 * 480, 0.0);
  for (int v = 0; v < 480; ++v)
    for (int u = 320; u < 640; ++u) half.cost[static_cast<size_t>(v * 640 + u)] = 2.0;
  Trajectory pav, grs;
  pav.waypoints = {{-0.5, 0.0}, {-0.5, 1.0}};  // projects left of cx: pavement
  grs.waypoints = {{0.5, 0.0}, {0.5, 1.0}};    // right: grass
  auto sel2 = select::select_best({grs, pav}, half, cam, {0.0, 2.0}, cfg);
  REQUIRE(sel2.has_value());
  CHECK(sel2->index == 1);

  // empty set signals no candidate
  CHECK(!select::select_best({}, half, cam, {0, 0}, cfg).has_value());

  // randomized argmin equivalence
  Rng rng(13);
  SemanticCostMap rnd;
  rnd.width = 64;
  rnd.height = 48;
  rnd.cost.resize(64 * 48);
  const double costs[] = {0, 2, 3, 4};
  for (double& c : rnd.cost) c = costs[rng.uniform_int(4)];
  world::CameraModel fwd = world::forward_camera(64, 48, 90.0, 0.6);
  std::vector<Trajectory> cands;
  for (int k = 0; k < 200; ++k) {
    Trajectory t;
    double x = 0, y = 0;
    for (int i = 0; i < 6; ++i) {
      x += rng.uniform(0.0, 1.5);
      y += rng.uniform(-0.8, 0.8);
      t.waypoints.push_back({x, y});
    }
    cands.push_back(t);
  }
  const Vec2 goal{8.0, 1.0};
  auto sel3 = select::select_best(cands, rnd, fwd, goal, cfg);
  REQUIRE(sel3.has_value());
  int best = -1;
  double best_cost = 0;
  for (size_t i = 0; i < cands.size(); ++i) {
    const double j = test::joint_cost_oracle(cands[i], rnd, fwd, goal, cfg);
    CHECK(j == doctest::Approx(sel3->joint_costs[i]).epsilon(1e-12));
    if (best < 0 || j < best_cost) {
      best = static_cast<int>(i);
      best_cost = j;
    }
  }
  CHECK(sel3->index == best);
}

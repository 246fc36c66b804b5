#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "semnav/ad/random.hpp"
#include "semnav/slope/filter.hpp"

using namespace semnav;
using slope::Discard;
using slope::FilterConfig;
using world::LocalGrid;

namespace {
LocalGrid make_grid(int64_t n, double res, double value = 0.0) {
  LocalGrid g;
  g.nx = n;
  g.ny = n;
  g.res = res;
  g.min_x = 0;
  g.min_y = -static_cast<double>(n) * res / 2.0;
  g.cells.assign(static_cast<size_t>(n * n), value);
  return g;
}

Trajectory straight_line(int n_points, double spacing) {
  Trajectory t;
  for (int i = 1; i <= n_points; ++i)
    t.waypoints.push_back({spacing * static_cast<double>(i), 0.0});
  return t;
}
}  // namespace

TEST_CASE("flat grid: everything feasible with zero inclines") {
  LocalGrid g = make_grid(180, 0.1);
  std::vector<Trajectory> set = {straight_line(10, 1.0), straight_line(5, 2.0)};
  auto res = slope::filter_collisions(set, g, {});
  CHECK(res.feasible.size() == 2);
  for (const auto& v : res.verdicts) {
    CHECK(v.feasible);
    CHECK(v.worst_theta == 0.0);
  }
}

TEST_CASE("1 m rise over 1 m planar is 45 degrees: discarded at 30") {
  LocalGrid g = make_grid(180, 0.1);
  // raise everything from x = 1.5 on by 1 m; waypoints at 1.0 and 2.0
  for (int64_t iy = 0; iy < g.ny; ++iy)
    for (int64_t ix = 0; ix < g.nx; ++ix)
      if (g.min_x + (static_cast<double>(ix) + 0.5) * g.res > 1.5) g.at(ix, iy) = 1.0;
  Trajectory t = straight_line(2, 1.0);
  auto v = slope::check_trajectory(t, g, {});
  CHECK(!v.feasible);
  CHECK(v.reason == Discard::kSlope);
  CHECK(v.worst_theta == doctest::Approx(M_PI / 4).epsilon(1e-9));
}

TEST_CASE("0.5 m step across 0.2 m planar gap: arctan(2.5) discarded") {
  // two waypoints 0.2 m apart with footprints seeing 0 and 0.5
  LocalGrid g = make_grid(300, 0.1);
  for (int64_t iy = 0; iy < g.ny; ++iy)
    for (int64_t ix = 0; ix < g.nx; ++ix)
      if (g.min_x + (static_cast<double>(ix) + 0.5) * g.res > 10.0 + 0.5) g.at(ix, iy) = 0.5;
  Trajectory t;
  t.waypoints = {{10.0, 0.0}, {10.2, 0.0}};
  FilterConfig cfg;
  cfg.d_foot = 0.8;
  auto v = slope::check_trajectory(t, g, cfg);
  CHECK(!v.feasible);
  CHECK(v.worst_theta == doctest::Approx(std::atan(2.5)).epsilon(1e-9));
  CHECK(v.worst_theta > 68.0 * M_PI / 180.0);
}

TEST_CASE("zero planar displacement counts as vertical and discards") {
  LocalGrid g = make_grid(100, 0.1);
  Trajectory t;
  t.waypoints = {{1.0, 0.0}, {1.0, 0.0}};
  auto v = slope::check_trajectory(t, g, {});
  CHECK(!v.feasible);
  CHECK(v.worst_theta == doctest::Approx(M_PI / 2));
}

TEST_CASE("waypoints leaving the window discard conservatively") {
  LocalGrid g = make_grid(100, 0.1);  // covers x in [0,10], y in [-5,5]
  Trajectory t;
  t.waypoints = {{2.0, 0.0}, {2.0, 6.0}};
  auto v = slope::check_trajectory(t, g, {});
  CHECK(!v.feasible);
  CHECK(v.reason == Discard::kOutOfWindow);
  Trajectory back;
  back.waypoints = {{-0.5, 0.0}};
  CHECK(!slope::check_trajectory(back, g, {}).feasible);
}

TEST_CASE("oracle equivalence over 1000 random trajectory/grid pairs") {
  Rng rng(101);
  FilterConfig cfg;
  for (int trial = 0; trial < 1000; ++trial) {
    LocalGrid g = make_grid(24, 0.25);  // 6 m window, fast oracle
    for (double& c : g.cells)
      c = rng.uniform() < 0.8 ? 0.0 : rng.uniform(0.0, 1.0);
    Trajectory t;
    double x = rng.uniform(0.3, 2.0), y = rng.uniform(-1.0, 1.0);
    const int n = 2 + static_cast<int>(rng.uniform_int(6));
    for (int i = 0; i < n; ++i) {
      t.waypoints.push_back({x, y});
      x += rng.uniform(-0.2, 1.0);
      y += rng.uniform(-0.8, 0.8);
    }
    const bool expect = test::slope_feasible_oracle(t, g, cfg.theta_max, cfg.d_foot);
    const bool got = slope::check_trajectory(t, g, cfg).feasible;
    CHECK(got == expect);
  }
}

TEST_CASE("raising theta_max never shrinks the feasible set") {
  Rng rng(103);
  for (int trial = 0; trial < 50; ++trial) {
    LocalGrid g = make_grid(40, 0.25);
    for (double& c : g.cells) c = rng.uniform() < 0.7 ? 0.0 : rng.uniform(0.0, 0.8);
    std::vector<Trajectory> set;
    for (int k = 0; k < 10; ++k) {
      Trajectory t;
      double x = 0.5, y = 0;
      for (int i = 0; i < 5; ++i) {
        x += rng.uniform(0.1, 1.2);
        y += rng.uniform(-0.5, 0.5);
        t.waypoints.push_back({x, y});
      }
      set.push_back(t);
    }
    FilterConfig lo, hi;
    lo.theta_max = 20.0 * M_PI / 180.0;
    hi.theta_max = 50.0 * M_PI / 180.0;
    auto rlo = slope::filter_collisions(set, g, lo);
    auto rhi = slope::filter_collisions(set, g, hi);
    for (int idx : rlo.feasible)
      CHECK(std::find(rhi.feasible.begin(), rhi.feasible.end(), idx) != rhi.feasible.end());
  }
}

TEST_CASE("footprint max is nondecreasing in d_foot") {
  Rng rng(107);
  LocalGrid g = make_grid(40, 0.25);
  for (double& c : g.cells) c = rng.uniform(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double x = rng.uniform(1.0, 8.0), y = rng.uniform(-4.0, 4.0);
    double prev = -1e300;
    for (double d = 0.2; d <= 2.0; d += 0.3) {
      auto z = slope::footprint_max(g, x, y, d);
      REQUIRE(z.has_value());
      CHECK(*z >= prev - 1e-12);
      prev = *z;
    }
  }
}

TEST_CASE("recovery: free goal bearing returns the goal bearing") {
  LocalGrid g = make_grid(180, 0.1);
  world::RobotState s;
  s.heading = 0.3;
  auto h = slope::recovery_direction(s, 0.5, g, {});
  REQUIRE(h.has_value());
  CHECK(*h == doctest::Approx(0.5));
}

TEST_CASE("recovery: blocked ahead, free at +30 and -90, nearest offset wins") {
  LocalGrid g = make_grid(180, 0.1);
  world::RobotState s;  // heading 0; goal bearing 0
  // wall sectors: straight ahead (-15..15), and most of the right side,
  // leaving a free lane around -90; +30 and -90 probes are both clear
  for (int64_t iy = 0; iy < g.ny; ++iy)
    for (int64_t ix = 0; ix < g.nx; ++ix) {
      const double x = g.min_x + (static_cast<double>(ix) + 0.5) * g.res;
      const double y = g.min_y + (static_cast<double>(iy) + 0.5) * g.res;
      const double r = std::hypot(x, y);
      if (r < 0.5 || r > 6.0) continue;
      const double ang = std::atan2(y, x) * 180.0 / M_PI;
      if ((ang > -15 && ang < 15) || (ang > -170 && ang <= -105) ||
          (ang > -75 && ang <= -15))
        g.at(ix, iy) = 2.0;
    }
  slope::FilterConfig cfg;
  cfg.d_foot = 0.2;  // tight footprint keeps the probes out of sector bleed
  auto h = slope::recovery_direction(s, 0.0, g, cfg);
  REQUIRE(h.has_value());
  CHECK(*h == doctest::Approx(30.0 * M_PI / 180.0).epsilon(1e-9));
}

TEST_CASE("recovery: fully walled in returns none") {
  LocalGrid g = make_grid(180, 0.1, 0.0);
  for (int64_t iy = 0; iy < g.ny; ++iy)
    for (int64_t ix = 0; ix < g.nx; ++ix) {
      const double x = g.min_x + (static_cast<double>(ix) + 0.5) * g.res;
      const double y = g.min_y + (static_cast<double>(iy) + 0.5) * g.res;
      const double r = std::hypot(x, y);
      if (r > 0.7 && r < 6.0) g.at(ix, iy) = 2.0;
    }
  world::RobotState s;
  CHECK(!slope::recovery_direction(s, 0.0, g, {}).has_value());
}

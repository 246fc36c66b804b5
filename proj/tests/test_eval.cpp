#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "semnav/ad/checkpoint.hpp"
#include "semnav/eval/suite.hpp"
#include "semnav/world/world_io.hpp"
#include "semnav/world/worldgen.hpp"
#include "toy_scenarios.hpp"

using namespace semnav;
namespace fs = std::filesystem;

namespace {
exec::EpisodeResult fake_episode(bool success, double p, double d) {
  exec::EpisodeResult e;
  e.success = success;
  e.path_length = p;
  e.ref_length = d;
  e.nav_time = p;
  e.ref_time = d;
  return e;
}
}  // namespace

TEST_CASE("SPL contributions and brute-force equivalence") {
  world::WorldGenSpec spec;
  spec.extent_m = 12;
  spec.grass_fraction = 0;
  spec.obstacle_density = 0;
  world::WorldModel w = world::generate_world(spec, 1);
  auto table = select::ClassCostTable::defaults();

  auto m_eq = eval::evaluate_episode(fake_episode(true, 10, 10), w, table);
  CHECK(m_eq.spl_contribution == doctest::Approx(1.0));
  auto m_half = eval::evaluate_episode(fake_episode(true, 20, 10), w, table);
  CHECK(m_half.spl_contribution == doctest::Approx(0.5));
  auto m_fail = eval::evaluate_episode(fake_episode(false, 10, 10), w, table);
  CHECK(m_fail.spl_contribution == 0.0);

  CHECK_THROWS_AS(eval::compute_spl({}), std::invalid_argument);

  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<eval::EpisodeMetrics> ms;
    std::vector<int> success;
    std::vector<double> p, d;
    const int n = 1 + static_cast<int>(rng.uniform_int(8));
    for (int i = 0; i < n; ++i) {
      const bool s = rng.uniform() < 0.7;
      const double pi = rng.uniform(1, 30), di = rng.uniform(1, 30);
      auto m = eval::evaluate_episode(fake_episode(s, pi, di), w, table);
      ms.push_back(m);
      success.push_back(s ? 1 : 0);
      p.push_back(pi);
      d.push_back(di);
    }
    CHECK(eval::compute_spl(ms) ==
          doctest::Approx(test::spl_oracle(success, p, d)).epsilon(1e-12));
  }
}

TEST_CASE("EPT: pavement runs at 100, half-grass run at 50 strict / 100 soft") {
  world::WorldGenSpec spec;
  spec.extent_m = 20;
  spec.grass_fraction = 0;
  spec.obstacle_density = 0;
  world::WorldModel w = world::generate_world(spec, 2);
  const uint8_t grass = *w.registry.find("grass");
  // grass over x >= 10
  for (int64_t cy = 0; cy < w.ny; ++cy)
    for (int64_t cx = w.nx / 2; cx < w.nx; ++cx) {
      w.class_grid[static_cast<size_t>(cy * w.nx + cx)] = grass;
      w.elevation[static_cast<size_t>(cy * w.nx + cx)] = 0.05;
    }
  auto table = select::ClassCostTable::defaults();

  std::vector<world::RobotState> pav_states, half_states;
  for (int i = 0; i < 20; ++i) {
    world::RobotState s;
    s.x = 0.5 + 0.4 * i;  // stays below x = 10
    s.y = 5;
    pav_states.push_back(s);
    world::RobotState h;
    h.x = 0.5 + 0.95 * i;  // crosses into grass halfway
    h.y = 5;
    half_states.push_back(h);
  }
  auto pav = eval::compute_ept(pav_states, w, table);
  CHECK(pav.strict_pct == 100.0);
  CHECK(pav.soft_pct == 100.0);
  auto half = eval::compute_ept(half_states, w, table);
  CHECK(half.strict_pct == doctest::Approx(50.0));
  CHECK(half.soft_pct == 100.0);  // grass cost 2 <= T_occ
}

TEST_CASE("NTR ratios") {
  world::WorldGenSpec spec;
  spec.extent_m = 20;
  spec.grass_fraction = 0;
  spec.obstacle_density = 0;
  world::WorldModel w = world::generate_world(spec, 3);
  auto table = select::ClassCostTable::defaults();
  std::vector<std::vector<Vec2>> all_pav = {{{1, 1}, {2, 2}, {3, 3}}};
  CHECK(eval::compute_ntr(all_pav, w, table) == 0.0);

  const uint8_t grass = *w.registry.find("grass");
  w.class_grid[static_cast<size_t>(w.cell_index(5.0, 5.0))] = grass;
  std::vector<std::vector<Vec2>> mixed = {
      {{5.05, 5.05}, {1, 1}, {2, 1}}, {{3, 1}, {4, 1}, {5.1, 5.1},
       {5.15, 5.15}, {7, 1}, {8, 1}, {9, 1}, {10, 1}, {11, 1}}};
  CHECK(eval::compute_ntr(mixed, w, table) == doctest::Approx(25.0));
  CHECK_THROWS_AS(eval::compute_ntr({}, w, table), std::invalid_argument);
}

TEST_CASE("run_suite: 30 episodes for 5 worlds x 6 repeats, reruns byte-identical") {
  // five small worlds on disk
  fs::create_directories("suite_worlds");
  std::vector<std::string> world_files;
  for (uint64_t i = 0; i < 5; ++i) {
    world::WorldGenSpec spec;
    spec.extent_m = 16;
    spec.grass_fraction = 0.1;
    spec.obstacle_density = 0.006;
    world::WorldModel w = world::generate_world(spec, 100 + i);
    const std::string f = "suite_worlds/w" + std::to_string(i) + ".json";
    world::save_world(f, w);
    world_files.push_back(f);
  }
  // random-weight checkpoint (determinism is the subject here, not skill)
  gen::ModelConfig mcfg = test::tiny_model_config();
  mcfg.n_points = 64;
  gen::TrajectoryCvae model(mcfg, 5);
  ad::save_checkpoint("suite_ckpt.bin", model.params());

  eval::SuiteConfig cfg;
  cfg.model = mcfg;
  cfg.checkpoints["full"] = "suite_ckpt.bin";
  cfg.variants = {"full", "fixf"};
  cfg.repeats = 6;
  cfg.episode.k_samples = 8;
  cfg.episode.camera_width = 24;
  cfg.episode.camera_height = 18;
  cfg.episode.min_timeout = 6.0;
  cfg.episode.timeout_factor = 0.01;
  cfg.episode.lidar.azimuth_steps = 16;
  cfg.episode.lidar.elevation_steps = 8;

  auto res1 = eval::run_suite(world_files, cfg, "suite_out_a");
  CHECK(res1.aggregates.size() == 2);
  CHECK(res1.aggregates[0].n == 30);
  CHECK(res1.aggregates[1].n == 30);
  CHECK(res1.episode_rows.size() == 60);

  auto res2 = eval::run_suite(world_files, cfg, "suite_out_b");
  auto slurp = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };
  CHECK(slurp("suite_out_a/episodes.csv") == slurp("suite_out_b/episodes.csv"));
  CHECK(slurp("suite_out_a/aggregate.csv") == slurp("suite_out_b/aggregate.csv"));
  CHECK(!slurp("suite_out_a/episodes.csv").empty());
  // logs byte-identical too
  CHECK(slurp("suite_out_a/logs/full_w00_r00.jsonl") ==
        slurp("suite_out_b/logs/full_w00_r00.jsonl"));
  CHECK(!slurp("suite_out_a/logs/full_w00_r00.jsonl").empty());

  // missing checkpoint for a requested variant is rejected up front
  eval::SuiteConfig bad = cfg;
  bad.variants = {"full", "nocol"};
  CHECK_THROWS_AS(eval::run_suite(world_files, bad, "suite_out_c"), std::invalid_argument);

  fs::remove_all("suite_worlds");
  fs::remove_all("suite_out_a");
  fs::remove_all("suite_out_b");
  fs::remove("suite_ckpt.bin");
}

TEST_CASE("episode SVG coordinates mirror the logged states") {
  world::WorldGenSpec spec;
  spec.extent_m = 12;
  spec.grass_fraction = 0;
  spec.obstacle_density = 0;
  world::WorldModel w = world::generate_world(spec, 9);
  exec::EpisodeResult ep;
  world::RobotState s1;
  s1.x = 1.25;
  s1.y = 2.5;
  world::RobotState s2;
  s2.x = 3.5;
  s2.y = 4.0;
  ep.states = {s1, s2};
  ep.recovery_positions.push_back({5.0, 5.0});
  eval::write_episode_svg("overlay.svg", w, ep);
  std::ifstream f("overlay.svg");
  std::string svg((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  // 12 px/m, y flipped against the 144 px canvas
  CHECK(svg.find("15,114 42,96") != std::string::npos);
  CHECK(svg.find("<circle") != std::string::npos);
  fs::remove("overlay.svg");
}

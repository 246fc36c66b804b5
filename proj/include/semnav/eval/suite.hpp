#pragma once
// Multi-episode experiment runner: named variants over world sets with
// repeated seeds, per-episode CSV rows and SVG overlays, per-variant
// aggregates, and a summary carrying every mandatory-report parameter.
// Reruns with identical inputs produce byte-identical outputs.

#include <map>
#include <string>
#include <vector>

#include "semnav/eval/metrics.hpp"
#include "semnav/gen/model.hpp"

namespace semnav::eval {

inline const std::vector<std::string> kKnownVariants = {"full", "basel", "nocol", "fixf"};

struct SuiteConfig {
  std::vector<std::string> variants = {"full"};
  // variant -> checkpoint path; fixf falls back to the full checkpoint
  std::map<std::string, std::string> checkpoints;
  int repeats = 6;
  uint64_t seed = 7;
  exec::EpisodeConfig episode;
  gen::ModelConfig model;
  bool write_svg = true;
  bool write_logs = true;
};

struct VariantAggregate {
  std::string name;
  int n = 0;
  double sr = 0, spl = 0, ept_strict = 0, ept_soft = 0, ntr = 0, t_ratio = 0;
  double recoveries = 0, switches = 0;
};

struct SuiteResult {
  std::vector<VariantAggregate> aggregates;
  // one row per (variant, world, repeat), in run order
  std::vector<std::string> episode_rows;
};

// Worlds are loaded from files so the on-disk artifacts pin the inputs.
SuiteResult run_suite(const std::vector<std::string>& world_files, const SuiteConfig& cfg,
                      const std::string& out_dir);

void write_episode_svg(const std::string& path, const world::WorldModel& world,
                       const exec::EpisodeResult& episode);

std::string csv_header();
uint64_t suite_config_hash(const SuiteConfig& cfg);

}  // namespace semnav::eval

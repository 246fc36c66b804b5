#include "semnav/eval/suite.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "semnav/ad/checkpoint.hpp"
#include "semnav/world/world_io.hpp"

namespace semnav::eval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

uint64_t fnv1a(const std::string& text) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

json episode_config_json(const exec::EpisodeConfig& e) {
  return json{{"f_gen", e.exec.f_gen},
              {"f_clip", e.exec.f_clip},
              {"epsilon", e.exec.epsilon},
              {"recovery_after", e.exec.recovery_after},
              {"goal_tolerance", e.exec.goal_tolerance},
              {"theta_max", e.exec.slope.theta_max},
              {"d_foot", e.exec.slope.d_foot},
              {"gamma", e.exec.selector.gamma},
              {"alpha1", e.exec.selector.alpha1},
              {"alpha2", e.exec.selector.alpha2},
              {"c_u", e.exec.selector.c_u},
              {"t_occ", e.exec.selector.t_occ},
              {"k_samples", e.k_samples},
              {"dt_sim", e.dt_sim},
              {"camera", {e.camera_width, e.camera_height, e.camera_hfov}},
              {"timeout_factor", e.timeout_factor}};
}

const char* class_color(const std::string& name) {
  if (name == "pavement") return "#d9d4cc";
  if (name == "grass") return "#7fb069";
  if (name == "sand") return "#e8d39a";
  if (name == "tree") return "#2d5a27";
  if (name == "wall") return "#555555";
  if (name == "stairs") return "#8a7a66";
  if (name == "person") return "#c0392b";
  if (name == "hole") return "#1b1b2f";
  return "#cccccc";
}

}  // namespace

std::string csv_header() {
  return "variant,world,repeat,seed,success,collision,timeout,path_length,ref_length,spl,"
         "ept_strict,ept_soft,ntr,t_nav,t_ref,t_ratio,recoveries,switches,generation_ticks,"
         "perception_ticks";
}

uint64_t suite_config_hash(const SuiteConfig& cfg) {
  json j = episode_config_json(cfg.episode);
  j["repeats"] = cfg.repeats;
  j["seed"] = cfg.seed;
  j["variants"] = cfg.variants;
  j["latent"] = cfg.model.latent_size;
  j["feature"] = cfg.model.feature_size;
  j["n_points"] = cfg.model.n_points;
  return fnv1a(j.dump());
}

void write_episode_svg(const std::string& path, const world::WorldModel& w,
                       const exec::EpisodeResult& ep) {
  const double scale = 12.0;  // px per meter
  const double h_px = static_cast<double>(w.ny) * w.cell_size * scale;
  auto sx = [&](double x) { return fmt(x * scale); };
  auto sy = [&](double y) { return fmt(h_px - y * scale); };  // y up
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_episode_svg: cannot open " + path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
     << fmt(static_cast<double>(w.nx) * w.cell_size * scale) << "\" height=\"" << fmt(h_px)
     << "\">\n";
  // terrain cells, skipping the dominant pavement background
  os << "<rect width=\"100%\" height=\"100%\" fill=\"" << class_color("pavement") << "\"/>\n";
  for (int64_t cy = 0; cy < w.ny; ++cy)
    for (int64_t cx = 0; cx < w.nx; ++cx) {
      const auto& def = w.registry.def(w.class_grid[static_cast<size_t>(cy * w.nx + cx)]);
      if (def.name == "pavement") continue;
      os << "<rect x=\"" << fmt(static_cast<double>(cx) * w.cell_size * scale) << "\" y=\""
         << fmt(h_px - static_cast<double>(cy + 1) * w.cell_size * scale) << "\" width=\""
         << fmt(w.cell_size * scale) << "\" height=\"" << fmt(w.cell_size * scale)
         << "\" fill=\"" << class_color(def.name) << "\"/>\n";
    }
  // adopted plans
  for (const auto& plan : ep.adopted_plans) {
    os << "<polyline fill=\"none\" stroke=\"#f39c12\" stroke-width=\"1\" points=\"";
    for (const Vec2& p : plan) os << sx(p.x) << "," << sy(p.y) << " ";
    os << "\"/>\n";
  }
  // executed path
  os << "<polyline fill=\"none\" stroke=\"#2980b9\" stroke-width=\"2\" points=\"";
  for (const auto& s : ep.states) os << sx(s.x) << "," << sy(s.y) << " ";
  os << "\"/>\n";
  // recovery markers
  for (const Vec2& r : ep.recovery_positions)
    os << "<circle cx=\"" << sx(r.x) << "\" cy=\"" << sy(r.y)
       << "\" r=\"5\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\"/>\n";
  if (!ep.states.empty()) {
    os << "<circle cx=\"" << sx(ep.states.front().x) << "\" cy=\"" << sy(ep.states.front().y)
       << "\" r=\"4\" fill=\"#27ae60\"/>\n";
  }
  os << "</svg>\n";
}

SuiteResult run_suite(const std::vector<std::string>& world_files, const SuiteConfig& cfg,
                      const std::string& out_dir) {
  if (world_files.empty()) throw std::invalid_argument("run_suite: no worlds");
  for (const auto& v : cfg.variants) {
    bool known = false;
    for (const auto& k : kKnownVariants) known |= (k == v);
    if (!known) throw std::invalid_argument("run_suite: unknown variant " + v);
    const std::string key = (v == "fixf") ? "full" : v;
    if (!cfg.checkpoints.count(key))
      throw std::invalid_argument("run_suite: missing checkpoint for variant " + v);
  }
  // resolve and validate every checkpoint before any episode runs
  std::map<std::string, gen::TrajectoryCvae> models;
  for (const auto& v : cfg.variants) {
    const std::string key = (v == "fixf") ? "full" : v;
    if (models.count(key)) continue;
    models.emplace(key, gen::TrajectoryCvae(cfg.model, 0));
    ad::load_checkpoint(cfg.checkpoints.at(key), models.at(key).params());
  }
  std::vector<world::WorldModel> worlds;
  for (const auto& f : world_files) worlds.push_back(world::load_world(f));

  fs::create_directories(out_dir);
  if (cfg.write_logs) fs::create_directories(fs::path(out_dir) / "logs");
  if (cfg.write_svg) fs::create_directories(fs::path(out_dir) / "svg");

  SuiteResult result;
  std::vector<std::vector<EpisodeMetrics>> per_variant(cfg.variants.size());

  for (size_t vi = 0; vi < cfg.variants.size(); ++vi) {
    const std::string& variant = cfg.variants[vi];
    const std::string key = (variant == "fixf") ? "full" : variant;
    const gen::TrajectoryCvae& model = models.at(key);
    exec::EpisodeConfig ecfg = cfg.episode;
    if (variant == "fixf") {
      ecfg.exec.switch_every_tick = true;
    }
    for (size_t wi = 0; wi < worlds.size(); ++wi) {
      for (int rep = 0; rep < cfg.repeats; ++rep) {
        const uint64_t seed =
            cfg.seed ^ (wi * 7919 + static_cast<uint64_t>(rep) * 104729 + 13);
        char stem[128];
        std::snprintf(stem, sizeof(stem), "%s_w%02zu_r%02d", variant.c_str(), wi, rep);
        std::ofstream log_file;
        exec::LogSink sink;
        const exec::LogSink* sink_ptr = nullptr;
        if (cfg.write_logs) {
          log_file.open(fs::path(out_dir) / "logs" / (std::string(stem) + ".jsonl"));
          sink = [&log_file](const std::string& line) { log_file << line << "\n"; };
          sink_ptr = &sink;
        }
        const exec::EpisodeResult ep = exec::run_episode(worlds[wi], model, ecfg, seed,
                                                         sink_ptr);
        const EpisodeMetrics m = evaluate_episode(ep, worlds[wi], ecfg.cost_table,
                                                  ecfg.exec.selector.t_occ);
        per_variant[vi].push_back(m);
        if (cfg.write_svg)
          write_episode_svg((fs::path(out_dir) / "svg" / (std::string(stem) + ".svg")).string(),
                            worlds[wi], ep);
        std::string row = variant + "," + std::to_string(wi) + "," + std::to_string(rep) +
                          "," + std::to_string(seed) + "," + (m.success ? "1" : "0") + "," +
                          (m.collision ? "1" : "0") + "," + (m.timeout ? "1" : "0") + "," +
                          fmt(m.path_length) + "," + fmt(m.ref_length) + "," +
                          fmt(m.spl_contribution) + "," + fmt(m.ept_strict) + "," +
                          fmt(m.ept_soft) + "," + fmt(m.ntr) + "," + fmt(m.t_nav) + "," +
                          fmt(m.t_ref) + "," + fmt(m.t_ratio) + "," +
                          std::to_string(m.recoveries) + "," + std::to_string(m.switches) +
                          "," + std::to_string(ep.generation_ticks) + "," +
                          std::to_string(ep.perception_ticks);
        result.episode_rows.push_back(std::move(row));
      }
    }
  }

  // aggregates
  for (size_t vi = 0; vi < cfg.variants.size(); ++vi) {
    const auto& ms = per_variant[vi];
    VariantAggregate agg;
    agg.name = cfg.variants[vi];
    agg.n = static_cast<int>(ms.size());
    int64_t wp_total = 0, wp_bad = 0;
    double t_ratio_acc = 0;
    int t_ratio_n = 0;
    for (const auto& m : ms) {
      agg.sr += m.success ? 1.0 : 0.0;
      agg.ept_strict += m.ept_strict;
      agg.ept_soft += m.ept_soft;
      agg.recoveries += m.recoveries;
      agg.switches += m.switches;
      wp_total += m.generated_waypoints;
      wp_bad += m.nonpreferred_waypoints;
      if (m.success && m.t_ratio > 0) {
        t_ratio_acc += m.t_ratio;
        ++t_ratio_n;
      }
    }
    const double n = std::max(1.0, static_cast<double>(agg.n));
    agg.sr /= n;
    agg.spl = compute_spl(ms);
    agg.ept_strict /= n;
    agg.ept_soft /= n;
    agg.ntr = wp_total > 0 ? 100.0 * static_cast<double>(wp_bad) /
                                 static_cast<double>(wp_total)
                           : 0.0;
    agg.t_ratio = t_ratio_n > 0 ? t_ratio_acc / t_ratio_n : 0.0;
    agg.recoveries /= n;
    agg.switches /= n;
    result.aggregates.push_back(agg);
  }

  // episodes.csv + aggregate.csv + summary.json
  {
    std::ofstream os(fs::path(out_dir) / "episodes.csv");
    os << csv_header() << "\n";
    for (const auto& row : result.episode_rows) os << row << "\n";
  }
  {
    std::ofstream os(fs::path(out_dir) / "aggregate.csv");
    os << "variant,n,sr,spl,ept_strict,ept_soft,ntr,t_ratio,recoveries,switches\n";
    for (const auto& a : result.aggregates)
      os << a.name << "," << a.n << "," << fmt(a.sr) << "," << fmt(a.spl) << ","
         << fmt(a.ept_strict) << "," << fmt(a.ept_soft) << "," << fmt(a.ntr) << ","
         << fmt(a.t_ratio) << "," << fmt(a.recoveries) << "," << fmt(a.switches) << "\n";
  }
  {
    json summary;
    summary["config_hash"] = suite_config_hash(cfg);
    summary["config"] = episode_config_json(cfg.episode);
    summary["mandatory"] = {{"theta_max", cfg.episode.exec.slope.theta_max},
                            {"epsilon", cfg.episode.exec.epsilon},
                            {"d_foot", cfg.episode.exec.slope.d_foot}};
    summary["worlds"] = world_files;
    summary["repeats"] = cfg.repeats;
    summary["seed"] = cfg.seed;
    json va = json::array();
    for (const auto& a : result.aggregates)
      va.push_back({{"variant", a.name},
                    {"n", a.n},
                    {"sr", a.sr},
                    {"spl", a.spl},
                    {"ept_strict", a.ept_strict},
                    {"ept_soft", a.ept_soft},
                    {"ntr", a.ntr},
                    {"t_ratio", a.t_ratio},
                    {"recoveries", a.recoveries},
                    {"switches", a.switches}});
    summary["variants"] = va;
    std::ofstream os(fs::path(out_dir) / "summary.json");
    os << summary.dump(2) << "\n";
  }
  return result;
}

}  // namespace semnav::eval

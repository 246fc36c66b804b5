// semnav command line: world generation, dataset generation, segmenter and
// generator training, candidate sampling, closed-loop episodes, and the
// evaluation suite.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "semnav/ad/checkpoint.hpp"
#include "semnav/data/pipeline.hpp"
#include "semnav/eval/suite.hpp"
#include "semnav/gen/train.hpp"
#include "semnav/world/world_io.hpp"

using namespace semnav;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  json j;
  is >> j;
  return j;
}

gen::ModelConfig model_config_from_json(const json& j) {
  gen::ModelConfig m;
  if (j.contains("feature_size")) m.feature_size = j["feature_size"];
  if (j.contains("latent_size")) m.latent_size = j["latent_size"];
  if (j.contains("n_waypoints")) m.n_waypoints = j["n_waypoints"];
  if (j.contains("n_lidar")) m.n_lidar = j["n_lidar"];
  if (j.contains("n_history")) m.n_history = j["n_history"];
  if (j.contains("n_points")) m.n_points = j["n_points"];
  if (j.contains("gru_hidden")) m.gru_hidden = j["gru_hidden"];
  if (j.contains("map_feature")) m.map_feature = j["map_feature"];
  if (j.contains("traj_hidden")) m.traj_hidden = j["traj_hidden"];
  if (j.contains("goal_hidden")) m.goal_hidden = j["goal_hidden"];
  if (j.contains("posterior_hidden")) m.posterior_hidden = j["posterior_hidden"];
  if (j.contains("point_feature")) m.seg.point_feature = j["point_feature"];
  if (j.contains("global_feature")) m.seg.global_feature = j["global_feature"];
  if (j.contains("iseg_threshold")) m.iseg_threshold = j["iseg_threshold"];
  if (j.contains("finetune_backbone")) m.finetune_backbone = j["finetune_backbone"];
  return m;
}

json model_config_to_json(const gen::ModelConfig& m) {
  return json{{"feature_size", m.feature_size},
              {"latent_size", m.latent_size},
              {"n_waypoints", m.n_waypoints},
              {"n_lidar", m.n_lidar},
              {"n_history", m.n_history},
              {"n_points", m.n_points},
              {"gru_hidden", m.gru_hidden},
              {"map_feature", m.map_feature},
              {"traj_hidden", m.traj_hidden},
              {"goal_hidden", m.goal_hidden},
              {"posterior_hidden", m.posterior_hidden},
              {"point_feature", m.seg.point_feature},
              {"global_feature", m.seg.global_feature},
              {"iseg_threshold", m.iseg_threshold},
              {"finetune_backbone", m.finetune_backbone}};
}

gen::ModelConfig model_config_for_checkpoint(const std::string& ckpt,
                                             const std::string& config_path) {
  if (!config_path.empty()) return model_config_from_json(load_json(config_path));
  const std::string sidecar = ckpt + ".json";
  if (fs::exists(sidecar)) return model_config_from_json(load_json(sidecar));
  return {};
}

void apply_episode_json(const json& j, exec::EpisodeConfig& e) {
  if (j.contains("f_gen")) e.exec.f_gen = j["f_gen"];
  if (j.contains("f_clip")) e.exec.f_clip = j["f_clip"];
  if (j.contains("epsilon")) e.exec.epsilon = j["epsilon"];
  if (j.contains("recovery_after")) e.exec.recovery_after = j["recovery_after"];
  if (j.contains("goal_tolerance")) e.exec.goal_tolerance = j["goal_tolerance"];
  if (j.contains("theta_max_deg"))
    e.exec.slope.theta_max = j["theta_max_deg"].get<double>() * M_PI / 180.0;
  if (j.contains("d_foot")) e.exec.slope.d_foot = j["d_foot"];
  if (j.contains("k_samples")) e.k_samples = j["k_samples"];
  if (j.contains("dt_sim")) e.dt_sim = j["dt_sim"];
  if (j.contains("camera_width")) e.camera_width = j["camera_width"];
  if (j.contains("camera_height")) e.camera_height = j["camera_height"];
  if (j.contains("timeout_factor")) e.timeout_factor = j["timeout_factor"];
  if (j.contains("min_timeout")) e.min_timeout = j["min_timeout"];
  if (j.contains("switch_every_tick")) e.exec.switch_every_tick = j["switch_every_tick"];
  if (j.contains("blur_sigma_px")) e.noise.blur_sigma_px = j["blur_sigma_px"];
  if (j.contains("noise_std")) e.noise.noise_std = j["noise_std"];
  if (j.contains("cost_table")) {
    select::ClassCostTable table;
    for (const auto& entry : j["cost_table"])
      table.entries.push_back({entry[0].get<std::string>(), entry[1].get<double>()});
    table.validate();
    e.cost_table = table;
  }
}

int cmd_gen_world(const std::string& spec_path, uint64_t seed, const std::string& out) {
  world::WorldGenSpec spec;
  if (!spec_path.empty()) spec = world::load_gen_spec(spec_path);
  world::WorldModel w = world::generate_world(spec, seed);
  world::save_world(out, w);
  std::cout << "world " << w.nx << "x" << w.ny << " cells -> " << out << "\n";
  return 0;
}

int cmd_gen_dataset(const std::string& world_file, int runs, uint64_t seed,
                    const std::string& out, const std::string& config_path) {
  world::WorldModel w = world::load_world(world_file);
  data::DatasetConfig cfg;
  if (!config_path.empty()) {
    const json j = load_json(config_path);
    cfg.model = model_config_from_json(j);
    if (j.contains("r_max")) cfg.r_max = j["r_max"];
    if (j.contains("m_max")) cfg.m_max = j["m_max"];
    if (j.contains("slice_interval")) cfg.slice_interval = j["slice_interval"];
    if (j.contains("warmup")) cfg.warmup = j["warmup"];
  }
  auto samples = data::generate_dataset(w, runs, cfg, seed);
  data::write_dataset(out, samples, cfg);
  std::cout << samples.size() << " samples -> " << out << "\n";
  return 0;
}

int cmd_train_seg(const std::string& dataset_dir, const std::string& out, int epochs,
                  uint64_t seed, const std::string& config_path) {
  auto samples = data::read_dataset(dataset_dir);
  if (samples.empty()) throw std::runtime_error("train-seg: empty dataset");
  std::vector<seg::SegSample> seg_samples;
  for (const auto& s : samples) {
    if (s.seg_labels.empty()) continue;
    seg_samples.push_back({s.obs.lidar.back(), s.seg_labels, s.seg_in_loss});
  }
  if (seg_samples.empty()) throw std::runtime_error("train-seg: dataset has no labels");
  seg::SegConfig scfg =
      config_path.empty() ? seg::SegConfig{}
                          : model_config_from_json(load_json(config_path)).seg;
  seg::PointSegModel model(scfg, seed);
  seg::SegTrainConfig cfg;
  cfg.epochs = epochs;
  cfg.seed = seed;
  auto rep = seg::train_segmenter(model, seg_samples, cfg);
  ad::save_checkpoint(out, model.params());
  std::cout << "loss " << rep.loss << " acc(traversable) " << rep.accuracy_traversable
            << " acc(blocked) " << rep.accuracy_blocked << " -> " << out << "\n";
  return 0;
}

int cmd_train_navae(const std::string& dataset_dir, const std::string& config_path,
                    const std::string& out, const std::string& seg_ckpt, uint64_t seed) {
  auto samples = data::read_dataset(dataset_dir);
  if (samples.empty()) throw std::runtime_error("train-navae: empty dataset");
  json j = config_path.empty() ? json::object() : load_json(config_path);
  gen::ModelConfig mcfg = model_config_from_json(j);
  gen::TrainConfig tcfg;
  if (j.contains("epochs")) tcfg.epochs = j["epochs"];
  if (j.contains("lr")) tcfg.lr = j["lr"];
  if (j.contains("lambda_col")) tcfg.lambda_col = j["lambda_col"];
  if (j.contains("beta_max")) tcfg.beta_max = j["beta_max"];
  if (j.contains("warmup_frac")) tcfg.warmup_frac = j["warmup_frac"];
  if (j.contains("summed_recon")) tcfg.summed_recon = j["summed_recon"];
  if (j.contains("kl_qp")) tcfg.kl_qp = j["kl_qp"];
  if (j.contains("lr_decay")) tcfg.lr_decay = j["lr_decay"];
  tcfg.seed = seed;

  gen::TrajectoryCvae model(mcfg, seed);
  if (!seg_ckpt.empty()) ad::load_checkpoint(seg_ckpt, model.segmenter().params());
  auto result = gen::train_cvae(model, samples, tcfg);
  ad::save_checkpoint(out, model.params());
  {
    std::ofstream os(out + ".json");
    os << model_config_to_json(mcfg).dump(2) << "\n";
  }
  gen::write_curves_csv(out + ".curves.csv", result.curves);
  std::cout << "epochs " << result.curves.size() << " final total "
            << result.curves.back().total << " -> " << out << "\n";
  return 0;
}

int cmd_sample(const std::string& ckpt, const std::string& obs_file, int k, uint64_t seed,
               const std::string& out, const std::string& config_path) {
  gen::ModelConfig mcfg = model_config_for_checkpoint(ckpt, config_path);
  gen::TrajectoryCvae model(mcfg, 0);
  ad::load_checkpoint(ckpt, model.params());
  // the observation file is a dataset sample container
  const fs::path obs_path(obs_file);
  auto samples = data::read_dataset(obs_path.parent_path().string());
  const std::string stem = obs_path.filename().string();
  size_t index = 0;
  if (stem.size() >= 17) index = std::stoul(stem.substr(7, 6));
  if (index >= samples.size()) throw std::runtime_error("sample: observation index out of range");
  auto set = model.sample_trajectories(samples[index].obs, k, seed);
  json arr = json::array();
  for (const auto& t : set) {
    json wp = json::array();
    for (const auto& p : t.waypoints) wp.push_back({p.x, p.y});
    arr.push_back(wp);
  }
  std::ofstream os(out);
  os << arr.dump(2) << "\n";
  std::cout << set.size() << " trajectories -> " << out << "\n";
  return 0;
}

int cmd_run_episode(const std::string& world_file, const std::string& ckpt,
                    const std::string& config_path, uint64_t seed, const std::string& out) {
  world::WorldModel w = world::load_world(world_file);
  gen::ModelConfig mcfg = model_config_for_checkpoint(ckpt, config_path);
  gen::TrajectoryCvae model(mcfg, 0);
  ad::load_checkpoint(ckpt, model.params());
  exec::EpisodeConfig cfg;
  if (!config_path.empty()) apply_episode_json(load_json(config_path), cfg);
  std::ofstream log(out);
  if (!log) throw std::runtime_error("run-episode: cannot open " + out);
  exec::LogSink sink = [&log](const std::string& line) { log << line << "\n"; };
  auto res = exec::run_episode(w, model, cfg, seed, &sink);
  std::cout << (res.success ? "success" : (res.collision ? "collision" : "timeout"))
            << " path " << res.path_length << " m in " << res.nav_time << " s, "
            << res.recoveries << " recoveries, " << res.switches << " switches -> " << out
            << "\n";
  return res.success ? 0 : 2;
}

int cmd_eval_suite(const std::string& worlds_dir, const std::string& ckpt,
                   const std::string& ckpt_basel, const std::string& ckpt_nocol,
                   const std::string& variants_csv, int repeats, uint64_t seed,
                   const std::string& out, const std::string& config_path) {
  eval::SuiteConfig cfg;
  cfg.repeats = repeats;
  cfg.seed = seed;
  cfg.variants.clear();
  std::stringstream ss(variants_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) cfg.variants.push_back(tok);
  if (!ckpt.empty()) cfg.checkpoints["full"] = ckpt;
  if (!ckpt_basel.empty()) cfg.checkpoints["basel"] = ckpt_basel;
  if (!ckpt_nocol.empty()) cfg.checkpoints["nocol"] = ckpt_nocol;
  cfg.model = model_config_for_checkpoint(ckpt, config_path);
  if (!config_path.empty()) apply_episode_json(load_json(config_path), cfg.episode);

  std::vector<std::string> world_files;
  for (const auto& entry : fs::directory_iterator(worlds_dir))
    if (entry.path().extension() == ".json") world_files.push_back(entry.path().string());
  std::sort(world_files.begin(), world_files.end());

  auto res = eval::run_suite(world_files, cfg, out);
  for (const auto& a : res.aggregates)
    std::cout << a.name << ": SR " << a.sr << " SPL " << a.spl << " EPT " << a.ept_strict
              << "/" << a.ept_soft << " NTR " << a.ntr << " Tratio " << a.t_ratio << " RB "
              << a.recoveries << "\n";
  std::cout << "reports -> " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semnav: generate-and-select mapless navigation at desk scale"};
  app.require_subcommand(1);

  std::string spec_path, out, world_file, config_path, dataset_dir, ckpt, obs_file;
  std::string ckpt_basel, ckpt_nocol, variants = "full", worlds_dir, seg_ckpt;
  uint64_t seed = 1;
  int runs = 1, k = 50, repeats = 6, epochs = 60;

  auto* gw = app.add_subcommand("gen-world", "generate a procedural world file");
  gw->add_option("--spec", spec_path, "world spec JSON");
  gw->add_option("--seed", seed);
  gw->add_option("--out", out)->required();

  auto* gd = app.add_subcommand("gen-dataset", "slice oracle runs into training samples");
  gd->add_option("--world", world_file)->required();
  gd->add_option("--runs", runs);
  gd->add_option("--seed", seed);
  gd->add_option("--out", out)->required();
  gd->add_option("--config", config_path);

  auto* ts = app.add_subcommand("train-seg", "train the point segmenter");
  ts->add_option("--dataset", dataset_dir)->required();
  ts->add_option("--out", out)->required();
  ts->add_option("--epochs", epochs);
  ts->add_option("--seed", seed);
  ts->add_option("--config", config_path);

  auto* tn = app.add_subcommand("train-navae", "train the trajectory generator");
  tn->add_option("--dataset", dataset_dir)->required();
  tn->add_option("--config", config_path);
  tn->add_option("--out", out)->required();
  tn->add_option("--seg-ckpt", seg_ckpt, "pretrained segmenter checkpoint");
  tn->add_option("--seed", seed);

  auto* sm = app.add_subcommand("sample", "draw candidate trajectories for an observation");
  sm->add_option("--ckpt", ckpt)->required();
  sm->add_option("--obs", obs_file)->required();
  sm->add_option("--k", k);
  sm->add_option("--seed", seed);
  sm->add_option("--out", out)->required();
  sm->add_option("--config", config_path);

  auto* re = app.add_subcommand("run-episode", "closed-loop navigation episode");
  re->add_option("--world", world_file)->required();
  re->add_option("--ckpt", ckpt)->required();
  re->add_option("--config", config_path);
  re->add_option("--seed", seed);
  re->add_option("--out", out)->required();

  auto* ev = app.add_subcommand("eval-suite", "multi-episode evaluation with variants");
  ev->add_option("--worlds", worlds_dir)->required();
  ev->add_option("--ckpt", ckpt)->required();
  ev->add_option("--ckpt-basel", ckpt_basel);
  ev->add_option("--ckpt-nocol", ckpt_nocol);
  ev->add_option("--variants", variants);
  ev->add_option("--repeats", repeats);
  ev->add_option("--seed", seed);
  ev->add_option("--out", out)->required();
  ev->add_option("--config", config_path);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gw->parsed()) return cmd_gen_world(spec_path, seed, out);
    if (gd->parsed()) return cmd_gen_dataset(world_file, runs, seed, out, config_path);
    if (ts->parsed()) return cmd_train_seg(dataset_dir, out, epochs, seed, config_path);
    if (tn->parsed()) return cmd_train_navae(dataset_dir, config_path, out, seg_ckpt, seed);
    if (sm->parsed()) return cmd_sample(ckpt, obs_file, k, seed, out, config_path);
    if (re->parsed()) return cmd_run_episode(world_file, ckpt, config_path, seed, out);
    if (ev->parsed())
      return cmd_eval_suite(worlds_dir, ckpt, ckpt_basel, ckpt_nocol, variants, repeats, seed,
                            out, config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

// Command-line front end: scenario/demo generation, training, evaluation,
// the 16-row ablation matrix, raster inspection, and file schema checks.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "waydrive/io.hpp"

namespace fs = std::filesystem;
using namespace waydrive;

namespace {

struct GlobalArgs {
  uint64_t seed = 7;
  std::string config_path;
  std::string out_dir = "out";
};

RunConfig resolve_config(const GlobalArgs& g, bool seed_given) {
  RunConfig cfg;
  if (!g.config_path.empty()) cfg = load_config(g.config_path);
  if (seed_given || g.config_path.empty()) cfg.seed = g.seed;
  return cfg;
}

void ensure_out(const std::string& dir) { fs::create_directories(dir); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::vector<AblationRow> rows_from(const std::vector<std::pair<std::string, AblationArtifacts>>& runs) {
  std::vector<AblationRow> rows;
  double full_sr = 0.0;
  bool have_full = false;
  for (const auto& [id, art] : runs)
    if (id == "Full") {
      full_sr = art.metrics.sr;
      have_full = true;
    }
  for (const auto& [id, art] : runs) {
    AblationRow row;
    row.id = id;
    row.metrics = art.metrics;
    row.seed = art.cfg.seed;
    row.config_hash = config_hash(art.cfg);
    if (id != "Full" && have_full) {
      row.has_delta = true;
      row.delta_sr = art.metrics.sr - full_sr;
    }
    rows.push_back(row);
  }
  sort_rows_canonical(rows);
  return rows;
}

int check_episode_invariants(const std::vector<EpisodeResult>& results) {
  for (const EpisodeResult& r : results) {
    if (auto err = check_result_invariants(r)) {
      std::fprintf(stderr, "invariant violation: %s\n", err->c_str());
      return 1;
    }
  }
  return 0;
}

void write_episode_logs(const std::string& path, const std::vector<EpisodeResult>& results) {
  std::ofstream out(path);
  for (const EpisodeResult& r : results) out << episode_to_json(r, nullptr).dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"waydrive: goal-token driving policy testbed"};
  app.require_subcommand(1);

  GlobalArgs g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--out", g.out_dir, "Output directory");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate scenarios and demonstration dumps");
  int gen_count = 10;
  std::string gen_difficulty = "straight";
  bool gen_demos = false;
  gen->add_option("--count", gen_count, "Number of scenarios");
  gen->add_option("--difficulty", gen_difficulty, "straight | turn | ambiguous_intersection");
  gen->add_flag("--demos", gen_demos, "Also roll the expert and dump demonstrations");

  // train
  auto* tr = app.add_subcommand("train", "Train a policy by behavior cloning");
  std::string tr_demos_path;
  tr->add_option("--demos", tr_demos_path, "Demo dump to train from (default: generate)");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a fixed suite");
  std::string ev_ckpt;
  std::string ev_suite = "straight_turn";
  int ev_count = 0;
  bool ev_no_monitor = false;
  bool ev_log_steps = false;
  ev->add_option("--checkpoint", ev_ckpt, "Model checkpoint")->required();
  ev->add_option("--suite", ev_suite, "straight_turn | ambiguous | lane_precision | mixed");
  ev->add_option("--episodes", ev_count, "Episode count (default: config eval_episodes)");
  ev->add_flag("--no-monitor", ev_no_monitor, "Disable the safety monitor");
  ev->add_flag("--log-steps", ev_log_steps, "Per-step explanation records in episode logs");

  // ablate
  auto* ab = app.add_subcommand("ablate", "Train and evaluate ablation rows");
  std::string ab_ids = "Full";
  ab->add_option("--ids", ab_ids, "Comma-separated row ids (Full,A1,...,G2)");

  // rasterize
  auto* ra = app.add_subcommand("rasterize", "Rasterize a map crop to PGM images");
  std::string ra_map;
  double ra_x = 0, ra_y = 0, ra_yaw = 0;
  ra->add_option("--map", ra_map, "Map or scenario file")->required();
  ra->add_option("--x", ra_x, "Ego x (east, m)");
  ra->add_option("--y", ra_y, "Ego y (north, m)");
  ra->add_option("--yaw", ra_yaw, "Ego yaw (rad)");

  // schema-check
  auto* sch = app.add_subcommand("schema-check", "Validate a map or scenario file");
  std::vector<std::string> sch_files;
  sch->add_option("files", sch_files, "Files to validate")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = resolve_config(g, seed_opt->count() > 0);

    if (*gen) {
      ensure_out(g.out_dir);
      const Difficulty diff = difficulty_from(gen_difficulty);
      std::vector<Demonstration> demos;
      for (int i = 0; i < gen_count; ++i) {
        const uint64_t seed = train_scenario_seed(cfg.seed, i);
        Scenario sc = generate_scenario(seed, diff);
        const std::string path = g.out_dir + "/scenario_" + gen_difficulty + "_" +
                                 std::to_string(i) + ".json";
        save_scenario(path, sc);
        if (gen_demos) {
          Rng noise(seed * 31 + 1);
          ExpertRollout roll = run_expert(sc, sc.budget_s, &noise, cfg.demo_noise);
          if (!(roll.completed && !roll.collided && !roll.infraction))
            roll = run_expert(sc, sc.budget_s);
          demos.push_back(make_demonstration(sc, roll));
        }
      }
      if (gen_demos) {
        const std::string dump = g.out_dir + "/demos_" + gen_difficulty + ".bin";
        save_demonstrations(dump, demos, cfg);
        std::printf("wrote %d scenarios and %zu demonstrations to %s\n", gen_count, demos.size(),
                    g.out_dir.c_str());
      } else {
        std::printf("wrote %d scenarios to %s\n", gen_count, g.out_dir.c_str());
      }
      return 0;
    }

    if (*tr) {
      ensure_out(g.out_dir);
      PolicyModel model;
      model.init(cfg);
      std::vector<Demonstration> demos;
      if (!tr_demos_path.empty()) demos = load_demonstrations(tr_demos_path);
      else demos = collect_demonstrations(cfg);
      std::printf("training on %zu demonstrations (%s)\n", demos.size(),
                  canonical_config_string(cfg).c_str());
      TrainResult res = train(model, demos, cfg);
      for (const EpochLog& e : res.curve)
        std::printf("epoch %3d  action %.5f  smooth %.5f  coll %.5f  total %.5f\n", e.epoch,
                    e.loss.action_term, e.loss.smooth_term, e.loss.coll_term, e.loss.total);
      if (res.diverged) std::fprintf(stderr, "training diverged; last finite weights kept\n");
      save_checkpoint(model, g.out_dir + "/model.ckpt");
      write_loss_curve_csv(res, g.out_dir + "/loss_curve.csv");
      write_json_file(g.out_dir + "/config.json", config_to_json(cfg));
      std::printf("checkpoint: %s/model.ckpt\n", g.out_dir.c_str());
      return res.diverged ? 1 : 0;
    }

    if (*ev) {
      ensure_out(g.out_dir);
      PolicyModel model;
      model.init(cfg);
      load_checkpoint(model, ev_ckpt);
      const int count = ev_count > 0 ? ev_count : cfg.eval_episodes;
      SuiteKind kind;
      if (ev_suite == "straight_turn") kind = SuiteKind::straight_turn;
      else if (ev_suite == "ambiguous") kind = SuiteKind::ambiguous;
      else if (ev_suite == "lane_precision") kind = SuiteKind::lane_precision;
      else if (ev_suite == "mixed") kind = SuiteKind::mixed;
      else throw std::invalid_argument("unknown suite: " + ev_suite);
      const auto suite = make_suite(kind, count);
      EpisodeOptions opt{!ev_no_monitor, ev_log_steps, true};
      std::vector<EpisodeResult> results;
      if (ev_log_steps) {
        // per-step logging runs serially so the log stream stays ordered
        std::ofstream log(g.out_dir + "/episodes.jsonl");
        for (const Scenario& sc : suite) {
          std::vector<StepLog> steps;
          EpisodeResult r = run_episode(model, sc, opt, &steps);
          log << episode_to_json(r, &steps).dump() << "\n";
          results.push_back(r);
        }
      } else {
        results = evaluate(model, suite, opt, cfg.threads);
        write_episode_logs(g.out_dir + "/episodes.jsonl", results);
      }
      const MetricsSummary m = compute_metrics(results);
      AblationRow row;
      row.id = cfg.ablation;
      row.metrics = m;
      row.seed = cfg.seed;
      row.config_hash = config_hash(cfg);
      write_text(g.out_dir + "/metrics.csv", format_metrics_csv({row}));
      std::printf("suite %s: SR %.3f  SPL %.3f  collision_rate %.3f over %d episodes\n",
                  ev_suite.c_str(), m.sr, m.spl, m.collision_rate, m.episodes);
      return check_episode_invariants(results);
    }

    if (*ab) {
      ensure_out(g.out_dir);
      std::vector<std::string> ids;
      std::string cur;
      for (char c : ab_ids + ",") {
        if (c == ',') {
          if (!cur.empty()) ids.push_back(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
      const auto suite = make_suite(SuiteKind::mixed, cfg.eval_episodes);
      std::vector<std::pair<std::string, AblationArtifacts>> runs;
      int invariant_rc = 0;
      for (const std::string& id : ids) {
        std::printf("=== ablation %s ===\n", id.c_str());
        AblationArtifacts art = run_ablation(cfg, id, suite);
        std::printf("%s: SR %.3f  SPL %.3f  collision_rate %.3f\n", id.c_str(), art.metrics.sr,
                    art.metrics.spl, art.metrics.collision_rate);
        invariant_rc |= check_episode_invariants(art.episodes);
        write_loss_curve_csv(art.training, g.out_dir + "/loss_" + id + ".csv");
        runs.emplace_back(id, std::move(art));
      }
      const auto rows = rows_from(runs);
      write_text(g.out_dir + "/metrics.csv", format_metrics_csv(rows));
      write_text(g.out_dir + "/report.md", format_metrics_markdown(rows));
      std::printf("report: %s/metrics.csv, %s/report.md\n", g.out_dir.c_str(), g.out_dir.c_str());
      return invariant_rc;
    }

    if (*ra) {
      ensure_out(g.out_dir);
      VectorMap map;
      const std::string kind = schema_check(ra_map);
      if (kind == "map") map = load_map(ra_map);
      else map = load_scenario(ra_map).map;
      const Pose pose{ra_x, ra_y, ra_yaw};
      const SemanticGrid grid = map_crop(map, pose, cfg.query_radius, cfg.grid_size(),
                                         cfg.grid_res);
      const char* names[4] = {"lanes", "crosswalks", "signs", "drivable"};
      for (int ch = 0; ch < SemanticGrid::kChannels; ++ch)
        write_grid_pgm(grid, ch, g.out_dir + "/crop_" + names[ch] + ".pgm");
      std::printf("wrote 4 channel images to %s (grid %dx%d at %.3f m/px)\n", g.out_dir.c_str(),
                  grid.size, grid.size, grid.resolution);
      return 0;
    }

    if (*sch) {
      int rc = 0;
      for (const std::string& f : sch_files) {
        try {
          const std::string kind = schema_check(f);
          std::printf("%s: valid %s file\n", f.c_str(), kind.c_str());
        } catch (const std::exception& e) {
          std::fprintf(stderr, "%s: INVALID: %s\n", f.c_str(), e.what());
          rc = 1;
        }
      }
      return rc;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

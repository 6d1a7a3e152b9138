#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "waydrive/io.hpp"

using namespace waydrive;
namespace fs = std::filesystem;

namespace {
std::string tmp_path(const char* name) { return (fs::temp_directory_path() / name).string(); }
}  // namespace

TEST_CASE("map files: round trip preserves every primitive") {
  const Scenario sc = generate_scenario(91, Difficulty::turn);
  const std::string path = tmp_path("waydrive_map.json");
  save_map(path, sc.map);
  const VectorMap loaded = load_map(path);
  REQUIRE(map_to_json(loaded).dump() == map_to_json(sc.map).dump());
  fs::remove(path);
}

TEST_CASE("map files: minimal map, normalization, and validation errors") {
  const std::string path = tmp_path("waydrive_map2.json");
  {
    std::ofstream out(path);
    out << R"({"format":"waydrive-map","version":1,
               "lanes":[{"class":"center","points":[[0,0],[10,0]]}]})";
  }
  const VectorMap minimal = load_map(path);
  REQUIRE(minimal.lanes.size() == 1);

  {
    std::ofstream out(path);
    out << R"({"format":"waydrive-map","version":1,
               "crosswalks":[{"points":[[0,0],[2,0],[2,2],[0,2],[0,0]]}]})";
  }
  const VectorMap dedup = load_map(path);
  REQUIRE(dedup.crosswalks[0].pts.size() == 4);  // repeated closing vertex dropped

  {
    std::ofstream out(path);
    out << R"({"format":"waydrive-map","lanes":[{"points":[[0,0]]}]})";
  }
  try {
    load_map(path);
    FAIL("expected validation error");
  } catch (const MapValidationError& e) {
    REQUIRE(std::string(e.what()).find("lanes[0]") != std::string::npos);
  }

  {
    std::ofstream out(path);
    out << R"({"format":"waydrive-map","signs":[{"pos":[1,2],"class":"zebra"}]})";
  }
  REQUIRE_THROWS_AS(load_map(path), ParseError);

  {
    std::ofstream out(path);
    out << "{ not json";
  }
  REQUIRE_THROWS_AS(load_map(path), ParseError);
  fs::remove(path);
}

TEST_CASE("scenario files: round trip and schema-check dispatch") {
  const Scenario sc = generate_scenario(92, Difficulty::ambiguous_intersection);
  const std::string path = tmp_path("waydrive_scn.json");
  save_scenario(path, sc);
  REQUIRE(schema_check(path) == "scenario");
  const Scenario loaded = load_scenario(path);
  REQUIRE(scenario_to_json(loaded).dump() == scenario_to_json(sc).dump());

  const std::string map_path = tmp_path("waydrive_scn_map.json");
  save_map(map_path, sc.map);
  REQUIRE(schema_check(map_path) == "map");

  const std::string bad = tmp_path("waydrive_bad.json");
  {
    std::ofstream out(bad);
    out << R"({"format":"something-else"})";
  }
  REQUIRE_THROWS_AS(schema_check(bad), ParseError);
  fs::remove(path);
  fs::remove(map_path);
  fs::remove(bad);
}

TEST_CASE("demo dumps: indexed container round-trips steps and observations") {
  RunConfig cfg;
  cfg.frame_size = 32;
  cfg.patch_vision = 8;
  cfg.map_window = 6.4;
  cfg.grid_res = 0.1;
  const Scenario sc = generate_scenario(93, Difficulty::straight);
  const ExpertRollout roll = run_expert(sc, sc.budget_s);
  std::vector<Demonstration> demos = {make_demonstration(sc, roll)};
  demos[0].steps.resize(std::min<size_t>(demos[0].steps.size(), 12));

  const std::string path = tmp_path("waydrive_demos.bin");
  save_demonstrations(path, demos, cfg);
  const auto loaded = load_demonstrations(path);
  REQUIRE(loaded.size() == 1);
  REQUIRE(loaded[0].scenario_id == demos[0].scenario_id);
  REQUIRE(loaded[0].difficulty == demos[0].difficulty);
  REQUIRE(loaded[0].obstacles.size() == demos[0].obstacles.size());
  REQUIRE(loaded[0].steps.size() == demos[0].steps.size());

  for (size_t i = 0; i < loaded[0].steps.size(); ++i) {
    const DemoStep& a = demos[0].steps[i];
    const DemoStep& b = loaded[0].steps[i];
    REQUIRE(b.state.pose.x == a.state.pose.x);
    REQUIRE(b.state.speed == a.state.speed);
    REQUIRE(b.expert.steering == a.expert.steering);
    REQUIRE(b.wp.east == a.wp.east);
    // stored observations must match a fresh materialization (frames via
    // float32, grids bit-exact)
    Frame fresh_frame;
    SemanticGrid fresh_grid;
    materialize_step(demos[0], a, cfg, fresh_frame, fresh_grid);
    REQUIRE(b.frame);
    REQUIRE(b.grid);
    REQUIRE(b.frame->height == fresh_frame.height);
    for (size_t k = 0; k < fresh_frame.data.size(); ++k)
      REQUIRE(b.frame->data[k] == Catch::Approx(fresh_frame.data[k]).margin(1e-6));
    REQUIRE(b.grid->cells == fresh_grid.cells);
  }
  fs::remove(path);
}

TEST_CASE("config files: JSON round trip and unknown values rejected") {
  RunConfig cfg;
  cfg.lr = 2.5e-3;
  cfg.fusion = FusionMode::late;
  cfg.grid_res = 0.2;
  const std::string path = tmp_path("waydrive_cfg.json");
  write_json_file(path, config_to_json(cfg));
  const RunConfig loaded = load_config(path);
  REQUIRE(canonical_config_string(loaded) == canonical_config_string(cfg));
  REQUIRE(config_hash(loaded) == config_hash(cfg));

  {
    std::ofstream out(path);
    out << R"({"fusion":"hyper"})";
  }
  REQUIRE_THROWS_AS(load_config(path), std::invalid_argument);
  fs::remove(path);
}

TEST_CASE("episode logs embed step records with explanations") {
  EpisodeResult r;
  r.scenario_id = "straight-1";
  r.success = true;
  r.l_opt = 30.0;
  r.l_agent = 31.0;
  r.steps = 60;
  std::vector<StepLog> steps(1);
  steps[0].step = 0;
  steps[0].proposed = {0.1, 0.5};
  steps[0].applied = {0.1, 0.0};
  steps[0].overridden = true;
  steps[0].explanation.present = true;
  steps[0].explanation.prompt = "<goal> east=1.0m, north=0.0m, yaw=0.0\xc2\xb0 </goal>";
  steps[0].explanation.vision_top = {{3, 0.4}, {1, 0.2}};
  steps[0].explanation.map_top = {{7, 0.1}};
  const nlohmann::json j = episode_to_json(r, &steps);
  REQUIRE(j["success"] == true);
  REQUIRE(j["step_records"].size() == 1);
  REQUIRE(j["step_records"][0]["override"] == true);
  REQUIRE(j["step_records"][0]["vision_top"][0][0] == 3);

  std::vector<StepLog> none(1);
  const nlohmann::json j2 = episode_to_json(r, &none);
  REQUIRE(j2["step_records"][0]["explanation"].is_null());
}

TEST_CASE("grid and frame images are written with correct headers") {
  SemanticGrid g(32, 0.5);
  g.set(0, 10, 12);
  const std::string gp = tmp_path("waydrive_grid.pgm");
  write_grid_pgm(g, 0, gp);
  std::ifstream in(gp, std::ios::binary);
  std::string magic;
  in >> magic;
  REQUIRE(magic == "P5");
  fs::remove(gp);

  Frame f(16, 16);
  const std::string fp = tmp_path("waydrive_frame.ppm");
  write_frame_ppm(f, fp);
  std::ifstream fin(fp, std::ios::binary);
  fin >> magic;
  REQUIRE(magic == "P6");
  fs::remove(fp);
}

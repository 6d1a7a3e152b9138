#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace waydrive {

enum class FusionMode : uint8_t { cross_attn, concat, late };
enum class VisionEncoderKind : uint8_t { patch, conv2 };

inline const char* fusion_name(FusionMode m) {
  switch (m) {
    case FusionMode::cross_attn: return "cross_attn";
    case FusionMode::concat: return "concat";
    default: return "late";
  }
}

inline FusionMode fusion_from_name(const std::string& s) {
  if (s == "cross_attn") return FusionMode::cross_attn;
  if (s == "concat") return FusionMode::concat;
  if (s == "late") return FusionMode::late;
  throw std::invalid_argument("unknown fusion mode: " + s);
}

/// Every knob of the stack. The config hash pins checkpoints and reports to
/// the exact settings that produced them.
struct RunConfig {
  uint64_t seed = 7;

  // model
  int d_model = 64;
  int frame_size = 64;
  int patch_vision = 8;
  VisionEncoderKind vision_encoder = VisionEncoderKind::patch;
  int patch_map = 16;
  int goal_tokens = 8;  // fixed by the token interface; present for documentation
  int mixer_layers = 3;
  int mixer_heads = 4;
  int backbone_layers = 4;
  int backbone_frozen = 2;  // lower layers excluded from gradient updates
  int backbone_heads = 4;
  int mlp_ratio = 4;
  FusionMode fusion = FusionMode::cross_attn;
  bool use_goal = true;
  bool use_map = true;

  // map crop
  double map_window = 25.6;  // meters; grid size derives from window/res
  double grid_res = 0.1;
  double query_radius = 25.0;

  // training
  int epochs = 24;
  double lr = 1e-3;
  int batch = 8;
  int chunk_len = 2;
  int epoch_chunks = 256;  // chunks visited per epoch (cycled without replacement)
  double data_fraction = 1.0;
  bool drop_smooth = false;
  bool drop_coll = false;
  double demo_noise = 0.05;

  // data / evaluation
  int demos_straight = 30;
  int demos_turn = 30;
  int demos_ambiguous = 50;
  int eval_episodes = 200;
  bool monitor = true;
  int threads = 2;

  std::string ablation = "Full";

  int grid_size() const {
    const int n = static_cast<int>(std::lround(map_window / grid_res));
    return (n % 2 == 0) ? n : n + 1;
  }
  int vision_tokens() const {
    const int n = frame_size / patch_vision;
    return n * n;
  }
  int map_tokens() const {
    const int n = grid_size() / patch_map;
    return n * n;
  }
};

namespace detail {
inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace detail

/// Canonical serialization: fixed key order, fixed formatting. Hashing this
/// string identifies a configuration exactly.
inline std::string canonical_config_string(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "seed=" << c.seed << ";d_model=" << c.d_model << ";frame_size=" << c.frame_size
     << ";patch_vision=" << c.patch_vision
     << ";vision_encoder=" << (c.vision_encoder == VisionEncoderKind::patch ? "patch" : "conv2")
     << ";patch_map=" << c.patch_map << ";goal_tokens=" << c.goal_tokens
     << ";mixer_layers=" << c.mixer_layers << ";mixer_heads=" << c.mixer_heads
     << ";backbone_layers=" << c.backbone_layers << ";backbone_frozen=" << c.backbone_frozen
     << ";backbone_heads=" << c.backbone_heads << ";mlp_ratio=" << c.mlp_ratio
     << ";fusion=" << fusion_name(c.fusion) << ";use_goal=" << c.use_goal
     << ";use_map=" << c.use_map << ";map_window=" << c.map_window << ";grid_res=" << c.grid_res
     << ";query_radius=" << c.query_radius << ";epochs=" << c.epochs << ";lr=" << c.lr
     << ";batch=" << c.batch << ";chunk_len=" << c.chunk_len << ";epoch_chunks=" << c.epoch_chunks
     << ";data_fraction=" << c.data_fraction << ";drop_smooth=" << c.drop_smooth
     << ";drop_coll=" << c.drop_coll << ";demo_noise=" << c.demo_noise
     << ";demos_straight=" << c.demos_straight << ";demos_turn=" << c.demos_turn
     << ";demos_ambiguous=" << c.demos_ambiguous << ";eval_episodes=" << c.eval_episodes
     << ";monitor=" << c.monitor << ";ablation=" << c.ablation;
  return os.str();
}

inline std::string config_hash(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(detail::fnv1a64(canonical_config_string(c))));
  return buf;
}

inline void apply_json(RunConfig& c, const nlohmann::json& j) {
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("seed", c.seed);
  get("d_model", c.d_model);
  get("frame_size", c.frame_size);
  get("patch_vision", c.patch_vision);
  if (j.contains("vision_encoder")) {
    const std::string v = j.at("vision_encoder").get<std::string>();
    if (v == "patch") c.vision_encoder = VisionEncoderKind::patch;
    else if (v == "conv2") c.vision_encoder = VisionEncoderKind::conv2;
    else throw std::invalid_argument("unknown vision_encoder: " + v);
  }
  get("patch_map", c.patch_map);
  get("goal_tokens", c.goal_tokens);
  get("mixer_layers", c.mixer_layers);
  get("mixer_heads", c.mixer_heads);
  get("backbone_layers", c.backbone_layers);
  get("backbone_frozen", c.backbone_frozen);
  get("backbone_heads", c.backbone_heads);
  get("mlp_ratio", c.mlp_ratio);
  if (j.contains("fusion")) c.fusion = fusion_from_name(j.at("fusion").get<std::string>());
  get("use_goal", c.use_goal);
  get("use_map", c.use_map);
  get("map_window", c.map_window);
  get("grid_res", c.grid_res);
  get("query_radius", c.query_radius);
  get("epochs", c.epochs);
  get("lr", c.lr);
  get("batch", c.batch);
  get("chunk_len", c.chunk_len);
  get("epoch_chunks", c.epoch_chunks);
  get("data_fraction", c.data_fraction);
  get("drop_smooth", c.drop_smooth);
  get("drop_coll", c.drop_coll);
  get("demo_noise", c.demo_noise);
  get("demos_straight", c.demos_straight);
  get("demos_turn", c.demos_turn);
  get("demos_ambiguous", c.demos_ambiguous);
  get("eval_episodes", c.eval_episodes);
  get("monitor", c.monitor);
  get("threads", c.threads);
  get("ablation", c.ablation);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config parse error in " + path + ": " + e.what());
  }
  RunConfig c;
  apply_json(c, j);
  return c;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["d_model"] = c.d_model;
  j["frame_size"] = c.frame_size;
  j["patch_vision"] = c.patch_vision;
  j["vision_encoder"] = c.vision_encoder == VisionEncoderKind::patch ? "patch" : "conv2";
  j["patch_map"] = c.patch_map;
  j["goal_tokens"] = c.goal_tokens;
  j["mixer_layers"] = c.mixer_layers;
  j["mixer_heads"] = c.mixer_heads;
  j["backbone_layers"] = c.backbone_layers;
  j["backbone_frozen"] = c.backbone_frozen;
  j["backbone_heads"] = c.backbone_heads;
  j["mlp_ratio"] = c.mlp_ratio;
  j["fusion"] = fusion_name(c.fusion);
  j["use_goal"] = c.use_goal;
  j["use_map"] = c.use_map;
  j["map_window"] = c.map_window;
  j["grid_res"] = c.grid_res;
  j["query_radius"] = c.query_radius;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["batch"] = c.batch;
  j["chunk_len"] = c.chunk_len;
  j["epoch_chunks"] = c.epoch_chunks;
  j["data_fraction"] = c.data_fraction;
  j["drop_smooth"] = c.drop_smooth;
  j["drop_coll"] = c.drop_coll;
  j["demo_noise"] = c.demo_noise;
  j["demos_straight"] = c.demos_straight;
  j["demos_turn"] = c.demos_turn;
  j["demos_ambiguous"] = c.demos_ambiguous;
  j["eval_episodes"] = c.eval_episodes;
  j["monitor"] = c.monitor;
  j["threads"] = c.threads;
  j["ablation"] = c.ablation;
  return j;
}

/// Table-row ablation deltas applied to a base configuration.
inline RunConfig apply_ablation(RunConfig base, const std::string& id) {
  base.ablation = id;
  if (id == "Full") return base;
  if (id == "A1") { base.use_goal = false; return base; }
  if (id == "A2") { base.use_map = false; return base; }
  if (id == "A3") { base.use_goal = false; base.use_map = false; return base; }
  if (id == "B1") { base.fusion = FusionMode::concat; return base; }
  if (id == "B2") { base.fusion = FusionMode::late; return base; }
  if (id == "C1") { base.patch_vision = 16; return base; }
  if (id == "C2") { base.vision_encoder = VisionEncoderKind::conv2; return base; }
  if (id == "D1") { base.backbone_frozen = base.backbone_layers; return base; }
  if (id == "D2") { base.mixer_layers = 1; return base; }
  if (id == "E1") { base.grid_res = 0.4; return base; }
  if (id == "E2") { base.grid_res = 0.05; return base; }
  if (id == "F1") { base.data_fraction = 0.5; return base; }
  if (id == "F2") { base.data_fraction = 0.25; return base; }
  if (id == "G1") { base.drop_smooth = true; return base; }
  if (id == "G2") { base.drop_coll = true; return base; }
  throw std::invalid_argument("unknown ablation id: " + id);
}

inline const char* const kAblationOrder[16] = {"Full", "A1", "A2", "A3", "B1", "B2", "C1", "C2",
                                               "D1", "D2", "E1", "E2", "F1", "F2", "G1", "G2"};

}  // namespace waydrive

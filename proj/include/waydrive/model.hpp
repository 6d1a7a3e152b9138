#pragma once

#include <algorithm>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "waydrive/encode.hpp"

namespace waydrive {

/// Structured stand-in for the free-text rationale: the final mixer layer's
/// attention mass over vision and map patches, plus the goal prompt.
struct Explanation {
  bool present = false;
  std::vector<std::pair<int, double>> vision_top;  // (token index, weight), descending
  std::vector<std::pair<int, double>> map_top;
  std::string prompt;
};

inline std::vector<std::pair<int, double>> top_k_weights(const Tensor2& row, int from, int to,
                                                         int k = 5) {
  std::vector<std::pair<int, double>> items;
  for (int i = from; i < to; ++i) items.emplace_back(i - from, row.at(0, i));
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;  // ties broken by ascending index
  });
  if (static_cast<int>(items.size()) > k) items.resize(k);
  return items;
}

/// Builds the per-step explanation from the final mixer attention
/// (query rows x [vision | map] keys), head-averaged.
inline Explanation explain(const Tensor2& mixer_probs, int n_vision, int n_map,
                           const std::string& prompt) {
  Explanation e;
  if (mixer_probs.size() == 0) return e;
  e.present = true;
  e.prompt = prompt;
  Tensor2 avg = mean_rows(mixer_probs);  // average over the goal queries
  e.vision_top = top_k_weights(avg, 0, n_vision);
  e.map_top = top_k_weights(avg, n_vision, n_vision + n_map);
  return e;
}

struct PolicyModel {
  RunConfig cfg;
  VisionEncoderParams vision;
  MapEncoderParams map_enc;
  GoalEncoderParams goal_enc;
  std::vector<CrossLayerParams> mixer;
  std::vector<TransformerLayerParams> backbone;
  Parameter act_token, reason_token;
  LinearParams head1, head2;

  void init(const RunConfig& config) {
    cfg = config;
    Rng rng(cfg.seed ^ 0xabcdef1234567890ULL);
    vision.init(rng, cfg);
    map_enc.init(rng, cfg);
    goal_enc.init(rng, cfg);
    mixer.resize(cfg.mixer_layers);
    for (int i = 0; i < cfg.mixer_layers; ++i)
      mixer[i].init(rng, cfg.d_model, cfg.mixer_heads, cfg.mlp_ratio,
                    "mixer." + std::to_string(i));
    backbone.resize(cfg.backbone_layers);
    for (int i = 0; i < cfg.backbone_layers; ++i) {
      const bool frozen = i < cfg.backbone_frozen;
      backbone[i].init(rng, cfg.d_model, cfg.backbone_heads, cfg.mlp_ratio,
                       "backbone." + std::to_string(i), !frozen);
    }
    act_token = Parameter("head.act_token", random_normal(rng, 1, cfg.d_model, 0.3));
    reason_token = Parameter("head.reason_token", random_normal(rng, 1, cfg.d_model, 0.3));
    const int head_in = cfg.fusion == FusionMode::late ? 2 * cfg.d_model : cfg.d_model;
    head1.init(rng, head_in, 2 * cfg.d_model, "head.fc1");
    head2.init(rng, 2 * cfg.d_model, 2, "head.fc2");
    head2.w.value.fill(0.0);  // start at steering 0, speed 0.5
  }

  std::vector<Parameter*> all_params() {
    std::vector<Parameter*> out;
    vision.collect(out);
    map_enc.collect(out);
    goal_enc.collect(out);
    for (auto& l : mixer) l.collect(out);
    for (auto& l : backbone) l.collect(out);
    out.push_back(&act_token);
    out.push_back(&reason_token);
    head1.collect(out);
    head2.collect(out);
    return out;
  }

  std::vector<Parameter*> trainable_params() {
    std::vector<Parameter*> out;
    for (Parameter* p : all_params())
      if (p->trainable) out.push_back(p);
    return out;
  }
};

template <class C>
struct PolicyForward {
  typename C::V action;        // 1x2: [steering, speed], post-activation
  Tensor2 mixer_attention;     // final mixer layer, head-averaged (empty unless cross_attn)
  TagList tags;
  int n_vision = 0;
  int n_map = 0;
};

/// Full policy forward pass. The fused sequence is
///   cross_attn: [vision | map | refined_goal | act | reason]
///   concat:     [vision | map | raw_goal     | act | reason]   (mixer skipped)
///   late:       [vision | raw_goal | act | reason], map mean-pooled into the head
/// Dropped modalities (A-rows) remove map tokens / replace goal tokens with
/// the learned null block.
template <class C>
PolicyForward<C> policy_forward(C& ctx, PolicyModel& m, const Frame& frame,
                                const SemanticGrid& grid, const Waypoint& wp) {
  using V = typename C::V;
  PolicyForward<C> out;

  V vis = tokenize_frame(ctx, m.vision, frame);
  out.n_vision = ctx.val(vis).rows();

  V goal = m.cfg.use_goal ? encode_goal(ctx, m.goal_enc, wp) : ctx.param(m.goal_enc.null_tokens);

  V map_tokens;
  const bool with_map = m.cfg.use_map;
  if (with_map) {
    map_tokens = encode_map(ctx, m.map_enc, grid);
    out.n_map = ctx.val(map_tokens).rows();
  }

  std::vector<V> seq_parts;
  TagList tags;
  const auto push_tags = [&tags](Modality mo, int n) { tags.insert(tags.end(), n, mo); };

  V pooled_map;
  bool have_pooled = false;

  if (m.cfg.fusion == FusionMode::cross_attn) {
    V kv = with_map ? ctx.concat_rows({vis, map_tokens}) : vis;
    V g = goal;
    for (size_t i = 0; i < m.mixer.size(); ++i) {
      Tensor2* probs = (i + 1 == m.mixer.size()) ? &out.mixer_attention : nullptr;
      g = cross_layer(ctx, m.mixer[i], g, kv, probs);
    }
    seq_parts = {vis};
    push_tags(Modality::vision, out.n_vision);
    if (with_map) {
      seq_parts.push_back(map_tokens);
      push_tags(Modality::map, out.n_map);
    }
    seq_parts.push_back(g);
    push_tags(Modality::goal, ctx.val(g).rows());
  } else if (m.cfg.fusion == FusionMode::concat) {
    seq_parts = {vis};
    push_tags(Modality::vision, out.n_vision);
    if (with_map) {
      seq_parts.push_back(map_tokens);
      push_tags(Modality::map, out.n_map);
    }
    seq_parts.push_back(goal);
    push_tags(Modality::goal, ctx.val(goal).rows());
  } else {  // late fusion: map bypasses the transformer entirely
    seq_parts = {vis};
    push_tags(Modality::vision, out.n_vision);
    seq_parts.push_back(goal);
    push_tags(Modality::goal, ctx.val(goal).rows());
    if (with_map) {
      pooled_map = ctx.mean_rows(map_tokens);
      have_pooled = true;
    }
  }

  seq_parts.push_back(ctx.param(m.act_token));
  push_tags(Modality::act, 1);
  seq_parts.push_back(ctx.param(m.reason_token));
  push_tags(Modality::reason, 1);

  V h = ctx.concat_rows(seq_parts);
  for (auto& layer : m.backbone) h = transformer_layer(ctx, layer, h);

  const int n_total = static_cast<int>(tags.size());
  V act_hidden = ctx.slice_rows(h, n_total - 2, n_total - 1);
  if (m.cfg.fusion == FusionMode::late) {
    if (!have_pooled) pooled_map = ctx.constant(Tensor2(1, m.cfg.d_model));
    act_hidden = ctx.concat_cols({act_hidden, pooled_map});
  }
  V hid = ctx.gelu(linear(ctx, m.head1, act_hidden));
  V pre = linear(ctx, m.head2, hid);
  V steering = ctx.tanh(ctx.slice_cols(pre, 0, 1));
  V speed = ctx.sigmoid(ctx.slice_cols(pre, 1, 2));
  out.action = ctx.concat_cols({steering, speed});
  out.tags = std::move(tags);
  return out;
}

/// Inference-mode step: plain value evaluation, no tape.
struct PolicyStep {
  Action action;
  Explanation explanation;
};

inline PolicyStep policy_act(PolicyModel& m, const Frame& frame, const SemanticGrid& grid,
                             const Waypoint& wp) {
  EvalCtx ctx;
  PolicyForward<EvalCtx> fwd = policy_forward(ctx, m, frame, grid, wp);
  PolicyStep out;
  out.action = Action::clamped(fwd.action.at(0, 0), fwd.action.at(0, 1));
  if (m.cfg.fusion == FusionMode::cross_attn)
    out.explanation = explain(fwd.mixer_attention, fwd.n_vision, fwd.n_map,
                              format_goal_prompt(wp));
  return out;
}

/// Single-precision inference wrapper; parameter casts are cached across
/// control steps. Weights must not change while an instance is live.
class FloatInference {
 public:
  explicit FloatInference(PolicyModel& m) : model_(&m) {}

  PolicyStep act(const Frame& frame, const SemanticGrid& grid, const Waypoint& wp) {
    PolicyForward<FloatCtx> fwd = policy_forward(ctx_, *model_, frame, grid, wp);
    PolicyStep out;
    out.action = Action::clamped(fwd.action.at(0, 0), fwd.action.at(0, 1));
    if (model_->cfg.fusion == FusionMode::cross_attn)
      out.explanation = explain(fwd.mixer_attention, fwd.n_vision, fwd.n_map,
                                format_goal_prompt(wp));
    return out;
  }

 private:
  PolicyModel* model_;
  FloatCtx ctx_;
};

// ---- safety monitor --------------------------------------------------------------
struct OverrideResult {
  Action action;
  bool triggered = false;
  double predicted_contact = 0.0;
};

/// Rolls the proposed action 2 s forward; on predicted contact, commands zero
/// speed (steering unchanged) and flags the step.
inline OverrideResult safety_override(const Action& proposed, const EgoState& ego,
                                      const std::vector<Obstacle>& obstacles) {
  OverrideResult out{proposed, false, 0.0};
  const ContactResult c = rollout_hits(ego, proposed, obstacles, kMonitorHorizon);
  if (c.hit) {
    out.action = Action{proposed.steering, 0.0};
    out.triggered = true;
    out.predicted_contact = c.time;
  }
  return out;
}

// ---- checkpoints -------------------------------------------------------------------
// Versioned binary dump of every parameter block (shape, frozen flag, data),
// pinned to the config hash; loading rejects any mismatch.
constexpr char kCheckpointMagic[8] = {'W', 'D', 'C', 'K', 'P', 'T', '0', '1'};

class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

inline void save_checkpoint(PolicyModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::string hash = config_hash(m.cfg);
  out.write(hash.data(), 16);
  const auto params = m.all_params();
  const uint32_t count = static_cast<uint32_t>(params.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const Parameter* p : params) {
    const uint16_t nlen = static_cast<uint16_t>(p->name.size());
    out.write(reinterpret_cast<const char*>(&nlen), sizeof(nlen));
    out.write(p->name.data(), nlen);
    const int32_t r = p->value.rows(), c = p->value.cols();
    const uint8_t trainable = p->trainable ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&r), sizeof(r));
    out.write(reinterpret_cast<const char*>(&c), sizeof(c));
    out.write(reinterpret_cast<const char*>(&trainable), sizeof(trainable));
    out.write(reinterpret_cast<const char*>(p->value.raw().data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("short write to checkpoint: " + path);
}

/// Loads weights into a model already initialized with the same config.
inline void load_checkpoint(PolicyModel& m, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw CheckpointError("bad checkpoint magic in " + path);
  char hash[17] = {0};
  in.read(hash, 16);
  if (config_hash(m.cfg) != hash)
    throw CheckpointError("checkpoint config hash " + std::string(hash) +
                          " does not match current config " + config_hash(m.cfg));
  uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  const auto params = m.all_params();
  if (count != params.size())
    throw CheckpointError("checkpoint parameter count mismatch in " + path);
  for (Parameter* p : params) {
    uint16_t nlen = 0;
    in.read(reinterpret_cast<char*>(&nlen), sizeof(nlen));
    std::string name(nlen, '\0');
    in.read(name.data(), nlen);
    int32_t r = 0, c = 0;
    uint8_t trainable = 0;
    in.read(reinterpret_cast<char*>(&r), sizeof(r));
    in.read(reinterpret_cast<char*>(&c), sizeof(c));
    in.read(reinterpret_cast<char*>(&trainable), sizeof(trainable));
    if (name != p->name || r != p->value.rows() || c != p->value.cols() ||
        (trainable != 0) != p->trainable)
      throw CheckpointError("checkpoint block '" + name + "' does not match model block '" +
                            p->name + "'");
    in.read(reinterpret_cast<char*>(p->value.raw().data()),
            static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!in) throw CheckpointError("truncated checkpoint: " + path);
}

}  // namespace waydrive

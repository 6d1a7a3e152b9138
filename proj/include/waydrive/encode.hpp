#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "waydrive/config.hpp"
#include "waydrive/nn.hpp"
#include "waydrive/sim.hpp"

namespace waydrive {

enum class Modality : uint8_t { vision, map, goal, act, reason };
using TagList = std::vector<Modality>;

/// Next waypoint expressed in the vehicle frame: east = forward offset (ego
/// +x), north = left offset (ego +y), yaw relative, in degrees. The names
/// come from the goal prompt template.
struct Waypoint {
  double east = 0.0;
  double north = 0.0;
  double yaw_deg = 0.0;
};

inline Waypoint relative_waypoint(const Pose& ego, const Pose& goal) {
  const Vec2 rel = world_to_ego(goal.position(), ego);
  double yaw = normalize_angle(goal.yaw - ego.yaw) * 180.0 / M_PI;
  if (yaw <= -180.0) yaw += 360.0;
  return {rel.x, rel.y, yaw};
}

/// Exact prompt string, one decimal place, C locale only.
inline std::string format_goal_prompt(const Waypoint& wp) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "<goal> east=%.1fm, north=%.1fm, yaw=%.1f\xc2\xb0 </goal>",
                wp.east, wp.north, wp.yaw_deg);
  return buf;
}

inline std::optional<Waypoint> parse_goal_prompt(const std::string& s) {
  Waypoint wp;
  if (std::sscanf(s.c_str(), "<goal> east=%lfm, north=%lfm, yaw=%lf", &wp.east, &wp.north,
                  &wp.yaw_deg) != 3)
    return std::nullopt;
  if (s.find("</goal>") == std::string::npos) return std::nullopt;
  return wp;
}

// ---- vision tokens -----------------------------------------------------------
/// Flattens one patch row-major, channel-minor: index ((y*P)+x)*3+c.
inline Tensor2 frame_patches(const Frame& f, int patch) {
  if (f.height % patch != 0 || f.width % patch != 0)
    shape_fail("frame_patches", f.height, f.width, patch, patch);
  const int gh = f.height / patch, gw = f.width / patch;
  Tensor2 out(gh * gw, patch * patch * 3);
  for (int pr = 0; pr < gh; ++pr)
    for (int pc = 0; pc < gw; ++pc) {
      double* row = out.row(pr * gw + pc);
      int at = 0;
      for (int y = 0; y < patch; ++y)
        for (int x = 0; x < patch; ++x)
          for (int c = 0; c < 3; ++c) row[at++] = f.at(pr * patch + y, pc * patch + x, c);
    }
  return out;
}

struct VisionEncoderParams {
  VisionEncoderKind kind = VisionEncoderKind::patch;
  int patch = 8;
  int tokens = 0;
  LinearParams proj;
  LinearParams conv1;  // conv2 variant only: 4x4 stride-4 then 2x2 stride-2
  Parameter pos;

  void init(Rng& rng, const RunConfig& cfg) {
    kind = cfg.vision_encoder;
    patch = cfg.patch_vision;
    const int grid = cfg.frame_size / patch;
    tokens = grid * grid;
    if (kind == VisionEncoderKind::patch) {
      proj.init(rng, patch * patch * 3, cfg.d_model, "vision.proj");
    } else {
      // capacity analog: two strided conv layers with an 8-pixel receptive field
      conv1.init(rng, 4 * 4 * 3, 16, "vision.conv1");
      proj.init(rng, 2 * 2 * 16, cfg.d_model, "vision.conv2");
      const int g2 = cfg.frame_size / 8;
      tokens = g2 * g2;
    }
    pos = Parameter("vision.pos", random_normal(rng, tokens, cfg.d_model, 0.02));
  }

  void collect(std::vector<Parameter*>& out) {
    proj.collect(out);
    if (kind == VisionEncoderKind::conv2) conv1.collect(out);
    out.push_back(&pos);
  }
};

template <class C>
typename C::V tokenize_frame(C& ctx, VisionEncoderParams& p, const Frame& f) {
  using V = typename C::V;
  V toks;
  if (p.kind == VisionEncoderKind::patch) {
    toks = linear(ctx, p.proj, ctx.constant(frame_patches(f, p.patch)));
  } else {
    const int g1 = f.width / 4;  // first conv grid
    V h = ctx.gelu(linear(ctx, p.conv1, ctx.constant(frame_patches(f, 4))));
    const int g2 = g1 / 2;
    std::vector<int> idx;
    idx.reserve(static_cast<size_t>(g2) * g2 * 4);
    for (int i = 0; i < g2; ++i)
      for (int j = 0; j < g2; ++j) {
        idx.push_back((2 * i) * g1 + 2 * j);
        idx.push_back((2 * i) * g1 + 2 * j + 1);
        idx.push_back((2 * i + 1) * g1 + 2 * j);
        idx.push_back((2 * i + 1) * g1 + 2 * j + 1);
      }
    toks = linear(ctx, p.proj, ctx.regroup_rows(ctx.gather_rows(h, idx), 4));
  }
  return ctx.add(toks, ctx.param(p.pos));
}

// ---- map tokens ---------------------------------------------------------------
/// Flattens one grid patch row-major, channel-minor: index ((y*P)+x)*4+ch.
inline Tensor2 grid_patches(const SemanticGrid& g, int patch) {
  if (g.size % patch != 0) shape_fail("grid_patches", g.size, g.size, patch, patch);
  const int n = g.size / patch;
  Tensor2 out(n * n, patch * patch * SemanticGrid::kChannels);
  for (int pr = 0; pr < n; ++pr)
    for (int pc = 0; pc < n; ++pc) {
      double* row = out.row(pr * n + pc);
      int at = 0;
      for (int y = 0; y < patch; ++y)
        for (int x = 0; x < patch; ++x)
          for (int ch = 0; ch < SemanticGrid::kChannels; ++ch)
            row[at++] = g.at(ch, pr * patch + y, pc * patch + x);
    }
  return out;
}

struct MapEncoderParams {
  int patch = 16;
  int tokens = 0;
  LinearParams proj;
  Parameter pos;

  void init(Rng& rng, const RunConfig& cfg) {
    patch = cfg.patch_map;
    const int n = cfg.grid_size() / patch;
    tokens = n * n;
    proj.init(rng, patch * patch * SemanticGrid::kChannels, cfg.d_model, "map.proj");
    pos = Parameter("map.pos", random_normal(rng, tokens, cfg.d_model, 0.02));
  }

  void collect(std::vector<Parameter*>& out) {
    proj.collect(out);
    out.push_back(&pos);
  }
};

template <class C>
typename C::V encode_map(C& ctx, MapEncoderParams& p, const SemanticGrid& g) {
  return ctx.add(linear(ctx, p.proj, ctx.constant(grid_patches(g, p.patch))), ctx.param(p.pos));
}

// ---- goal tokens ----------------------------------------------------------------
/// Sinusoidal features of one normalized scalar: 8 frequency pairs,
/// interleaved [sin w0 u, cos w0 u, sin w1 u, ...] with w_i = (pi/2) 2^i.
inline Tensor2 fourier_features(double u) {
  Tensor2 out(1, 16);
  double w = M_PI / 2.0;
  for (int i = 0; i < 8; ++i) {
    out.at(0, 2 * i) = std::sin(w * u);
    out.at(0, 2 * i + 1) = std::cos(w * u);
    w *= 2.0;
  }
  return out;
}

constexpr double kWaypointPosScale = 32.0;   // meters mapped to u = 1
constexpr double kWaypointYawScale = 180.0;  // degrees mapped to u = 1

/// 8 goal tokens: [0] and [7] are learned delimiters; slots 1-2, 3-4, 5-6
/// carry east, north, yaw as a learned slot embedding plus a shared
/// projection of the scalar's Fourier features.
struct GoalEncoderParams {
  Parameter delim_open, delim_close;
  Parameter slot_embed;  // 6 x d
  LinearParams fourier_proj;
  Parameter null_tokens;  // replaces goal tokens when the modality is dropped

  void init(Rng& rng, const RunConfig& cfg) {
    const int d = cfg.d_model;
    delim_open = Parameter("goal.open", random_normal(rng, 1, d, 0.3));
    delim_close = Parameter("goal.close", random_normal(rng, 1, d, 0.3));
    slot_embed = Parameter("goal.slots", random_normal(rng, 6, d, 0.3));
    fourier_proj.init(rng, 16, d, "goal.fourier");
    null_tokens = Parameter("goal.null", random_normal(rng, 8, d, 0.3));
  }

  void collect(std::vector<Parameter*>& out) {
    out.push_back(&delim_open);
    out.push_back(&delim_close);
    out.push_back(&slot_embed);
    fourier_proj.collect(out);
    out.push_back(&null_tokens);
  }
};

template <class C>
typename C::V encode_goal(C& ctx, GoalEncoderParams& p, const Waypoint& wp) {
  Tensor2 feats(6, 16);
  const double us[3] = {wp.east / kWaypointPosScale, wp.north / kWaypointPosScale,
                        wp.yaw_deg / kWaypointYawScale};
  for (int slot = 0; slot < 6; ++slot) {
    const Tensor2 ff = fourier_features(us[slot / 2]);
    for (int j = 0; j < 16; ++j) feats.at(slot, j) = ff.at(0, j);
  }
  typename C::V fields =
      ctx.add(linear(ctx, p.fourier_proj, ctx.constant(std::move(feats))), ctx.param(p.slot_embed));
  return ctx.concat_rows({ctx.param(p.delim_open), fields, ctx.param(p.delim_close)});
}

}  // namespace waydrive

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "waydrive/geometry.hpp"
#include "waydrive/hdmap.hpp"
#include "waydrive/tape.hpp"

namespace waydrive {

// Vehicle and control constants. The control period matches the ~100 ms
// reaction budget the whole stack is designed around.
constexpr double kDt = 0.1;             // s
constexpr double kWheelbase = 2.7;      // m
constexpr double kMaxSteerRad = 30.0 * M_PI / 180.0;
constexpr double kVMax = 10.0;          // m/s
constexpr double kSpeedTau = 0.5;       // s, first-order speed lag
constexpr double kEgoHalfLen = 2.0;     // 4.0 m x 1.8 m footprint
constexpr double kEgoHalfWid = 0.9;
constexpr double kMonitorHorizon = 2.0; // s

/// Steering in [-1, 1] (-1 full left, +1 full right), speed in [0, 1].
struct Action {
  double steering = 0.0;
  double speed = 0.0;

  static Action clamped(double steer, double spd) {
    return {std::clamp(steer, -1.0, 1.0), std::clamp(spd, 0.0, 1.0)};
  }
  bool finite() const { return std::isfinite(steering) && std::isfinite(speed); }
};

/// Synthetic RGB camera frame, values in [0,1], row-major (y, x, channel).
struct Frame {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Frame() = default;
  Frame(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w * 3, 0.0) {}
  double& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  void set_px(int y, int x, const double rgb[3]) {
    for (int c = 0; c < 3; ++c) at(y, x, c) = rgb[c];
  }
};

// ---- motion model -----------------------------------------------------------
// Kinematic bicycle with exact constant-curvature arc integration and a
// first-order speed lag. Templated on the scalar type so the same code runs
// on doubles and through the autodiff tape (soft collision term).
template <class S>
struct MotionState {
  S x, y, yaw, speed;
};

/// Steering command +1 is full right; yaw is counterclockwise-positive, so
/// the curvature carries a minus sign.
template <class S>
MotionState<S> step_motion(const MotionState<S>& m, S steer_cmd, S speed_cmd, double dt) {
  using std::cos;
  using std::exp;
  using std::sin;
  using std::tan;
  S steer_angle = steer_cmd * kMaxSteerRad;
  S curvature = tan(steer_angle) * (-1.0 / kWheelbase);
  S v_target = speed_cmd * kVMax;
  const double decay = std::exp(-dt / kSpeedTau);
  S new_speed = v_target + (m.speed - v_target) * decay;
  S dist = v_target * dt + (m.speed - v_target) * (kSpeedTau * (1.0 - decay));
  S half_arc = curvature * dist * 0.5;
  S stretch = dist * sinc(half_arc);
  S dx = stretch * cos(m.yaw + half_arc);
  S dy = stretch * sin(m.yaw + half_arc);
  return {m.x + dx, m.y + dy, m.yaw + curvature * dist, new_speed};
}

struct EgoState {
  Pose pose;
  double speed = 0.0;  // m/s, in [0, kVMax]

  OrientedRect footprint() const { return {pose.position(), kEgoHalfLen, kEgoHalfWid, pose.yaw}; }
};

inline EgoState step_dynamics(const EgoState& s, const Action& a, double dt = kDt) {
  MotionState<double> m{s.pose.x, s.pose.y, s.pose.yaw, s.speed};
  m = step_motion<double>(m, a.steering, a.speed, dt);
  EgoState out;
  out.pose = {m.x, m.y, normalize_angle(m.yaw)};
  out.speed = std::clamp(m.speed, 0.0, kVMax);
  return out;
}

// ---- obstacles ---------------------------------------------------------------
struct Obstacle {
  OrientedRect rect;
  Vec2 vel;              // constant velocity; zero for static obstacles
  double height = 2.2;   // rendered height

  OrientedRect at_time(double t) const {
    OrientedRect r = rect;
    r.center = r.center + vel * t;
    return r;
  }
};

struct ContactResult {
  bool hit = false;
  double time = 0.0;  // earliest contact, seconds from sweep start
};

/// Oriented-rectangle sweep: the ego footprint at each dt sample against
/// obstacles advanced at constant velocity. Returns the earliest contact.
inline ContactResult check_collision(const std::vector<OrientedRect>& ego_sweep,
                                     const std::vector<Obstacle>& obstacles, double dt,
                                     double t_start = 0.0) {
  for (size_t k = 0; k < ego_sweep.size(); ++k) {
    const double t = t_start + static_cast<double>(k) * dt;
    for (const Obstacle& ob : obstacles) {
      if (rects_intersect(ego_sweep[k], ob.at_time(t))) return {true, t};
    }
  }
  return {false, 0.0};
}

/// Rolls a constant action forward `horizon` seconds; true if the swept
/// footprint intersects any obstacle. Shared by the safety monitor and the
/// fixed-mode collision penalty.
inline ContactResult rollout_hits(const EgoState& s, const Action& a,
                                  const std::vector<Obstacle>& obstacles,
                                  double horizon = kMonitorHorizon) {
  const int steps = static_cast<int>(std::round(horizon / kDt));
  std::vector<OrientedRect> sweep;
  sweep.reserve(steps + 1);
  EgoState cur = s;
  sweep.push_back(cur.footprint());
  for (int k = 0; k < steps; ++k) {
    cur = step_dynamics(cur, a, kDt);
    sweep.push_back(cur.footprint());
  }
  return check_collision(sweep, obstacles, kDt);
}

inline double scalar_value(double x) { return x; }
inline double scalar_value(const Scalar& s) { return s.value(); }

/// Distance from a point (scalar type S) to a fixed oriented rectangle.
/// The tiny epsilon keeps the gradient finite when the point sits inside.
template <class S>
S point_rect_dist_s(S px, S py, const OrientedRect& r) {
  using std::fabs;
  using std::sqrt;
  const double c = std::cos(r.yaw), s = std::sin(r.yaw);
  S dx = px - r.center.x;
  S dy = py - r.center.y;
  S lx = dx * c + dy * s;
  S ly = dx * (-s) + dy * c;
  S ox = relu(fabs(lx) - r.half_len);
  S oy = relu(fabs(ly) - r.half_wid);
  return sqrt(ox * ox + oy * oy + 1e-12);
}

/// Exact clearance between the ego footprint (pose given by scalar type S)
/// and a fixed oriented rectangle: for convex polygons the minimum distance
/// is attained at a vertex of one of them. Zero when the rectangles
/// intersect.
template <class S>
S footprint_clearance(const MotionState<S>& m, const OrientedRect& ob) {
  using std::cos;
  using std::fabs;
  using std::sin;
  using std::sqrt;
  const OrientedRect ego_now{{scalar_value(m.x), scalar_value(m.y)}, kEgoHalfLen, kEgoHalfWid,
                             scalar_value(m.yaw)};
  if (rects_intersect(ego_now, ob)) return (m.x - m.x);  // zero of type S
  S c = cos(m.yaw), s = sin(m.yaw);
  std::vector<S> dists;
  dists.reserve(8);
  // ego corners against the obstacle rectangle
  const double ex[4] = {kEgoHalfLen, -kEgoHalfLen, -kEgoHalfLen, kEgoHalfLen};
  const double ey[4] = {kEgoHalfWid, kEgoHalfWid, -kEgoHalfWid, -kEgoHalfWid};
  for (int i = 0; i < 4; ++i) {
    S px = m.x + c * ex[i] - s * ey[i];
    S py = m.y + s * ex[i] + c * ey[i];
    dists.push_back(point_rect_dist_s<S>(px, py, ob));
  }
  // obstacle corners against the ego rectangle
  for (const Vec2& p : ob.corners()) {
    S dx = p.x - m.x;
    S dy = p.y - m.y;
    S lx = dx * c + dy * s;
    S ly = dy * c - dx * s;
    S ox = relu(fabs(lx) - kEgoHalfLen);
    S oy = relu(fabs(ly) - kEgoHalfWid);
    dists.push_back(sqrt(ox * ox + oy * oy + 1e-12));
  }
  return min_of(dists);
}

/// Minimum footprint clearance along a constant-action rollout.
/// Differentiable when S = Scalar.
template <class S>
S rollout_min_clearance(const MotionState<S>& start, S steer_cmd, S speed_cmd,
                        const std::vector<Obstacle>& obstacles, double horizon,
                        double t_start = 0.0) {
  const int steps = static_cast<int>(std::round(horizon / kDt));
  std::vector<S> clear;
  MotionState<S> cur = start;
  for (int k = 0; k <= steps; ++k) {
    const double t = t_start + k * kDt;
    for (const Obstacle& ob : obstacles)
      clear.push_back(footprint_clearance<S>(cur, ob.at_time(t)));
    if (k < steps) cur = step_motion<S>(cur, steer_cmd, speed_cmd, kDt);
  }
  if (clear.empty()) return steer_cmd * 0.0 + 1e9;  // no obstacles: effectively infinite
  return min_of(clear);
}

// ---- front-view renderer ------------------------------------------------------
// Flat-ground pinhole camera: 90 degree horizontal FOV, 1.5 m above ground,
// looking along the ego heading. Ground pixels are classified by map queries;
// obstacles are painted as vertical boxes, far to near.
namespace colors {
constexpr double kSky[3] = {0.55, 0.72, 0.92};
constexpr double kOffroad[3] = {0.42, 0.52, 0.33};
constexpr double kDrivable[3] = {0.34, 0.34, 0.38};
constexpr double kLaneLine[3] = {0.95, 0.95, 0.95};
constexpr double kCrosswalk[3] = {0.82, 0.72, 0.28};
constexpr double kObstacle[3] = {0.78, 0.16, 0.12};
}  // namespace colors

constexpr double kCamHeight = 1.5;
constexpr double kLaneLineHalfWidth = 0.15;
constexpr double kRenderRange = 70.0;

inline Frame render_front_view(const VectorMap& map, const std::vector<Obstacle>& obstacles,
                               const Pose& pose, int size = 64) {
  Frame img(size, size);
  const double f = size / 2.0;  // focal length in pixels for 90 deg HFOV
  const double cx = size / 2.0, cy = size / 2.0;

  const VectorMap local = query_radius(map, pose, kRenderRange);

  for (int r = 0; r < size; ++r) {
    const double up = (cy - (r + 0.5)) / f;
    for (int c = 0; c < size; ++c) {
      if (up >= 0.0) {
        img.set_px(r, c, colors::kSky);
        continue;
      }
      const double t = -kCamHeight / up;  // forward distance to ground hit
      const double left = t * (cx - (c + 0.5)) / f;
      const Vec2 world = ego_to_world({t, left}, pose);
      const double* color = colors::kOffroad;
      if (t <= kRenderRange) {
        bool lane = false;
        for (const auto& l : local.lanes) {
          if (point_polyline_dist(world, l.pts) <= kLaneLineHalfWidth) {
            lane = true;
            break;
          }
        }
        if (lane) {
          color = colors::kLaneLine;
        } else {
          bool cw = false;
          for (const auto& p : local.crosswalks)
            if (point_in_polygon(world, p.pts)) {
              cw = true;
              break;
            }
          if (cw) {
            color = colors::kCrosswalk;
          } else {
            for (const auto& p : local.drivable_area)
              if (point_in_polygon(world, p.pts)) {
                color = colors::kDrivable;
                break;
              }
          }
        }
      }
      img.set_px(r, c, color);
    }
  }

  // Obstacle faces, painter's algorithm far to near. Each footprint edge is a
  // vertical quad; its ground and top edges project to straight lines.
  struct Face {
    Vec2 a, b;  // ego-frame ground endpoints
    double h;
    double depth;
  };
  std::vector<Face> faces;
  for (const Obstacle& ob : obstacles) {
    const auto corners = ob.rect.corners();
    for (int i = 0; i < 4; ++i) {
      Vec2 a = world_to_ego(corners[i], pose);
      Vec2 b = world_to_ego(corners[(i + 1) % 4], pose);
      constexpr double kNear = 0.3;
      if (a.x <= kNear && b.x <= kNear) continue;
      if (a.x < kNear) a = b + (a - b) * ((b.x - kNear) / (b.x - a.x));
      if (b.x < kNear) b = a + (b - a) * ((a.x - kNear) / (a.x - b.x));
      if (a.x > kRenderRange && b.x > kRenderRange) continue;
      faces.push_back({a, b, ob.height, 0.5 * (a.norm() + b.norm())});
    }
  }
  std::sort(faces.begin(), faces.end(), [](const Face& u, const Face& v) {
    if (u.depth != v.depth) return u.depth > v.depth;
    if (u.a.x != v.a.x) return u.a.x > v.a.x;
    return u.a.y > v.a.y;
  });
  for (const Face& face : faces) {
    const double col_a = cx - f * face.a.y / face.a.x;
    const double col_b = cx - f * face.b.y / face.b.x;
    const double bot_a = cy + f * kCamHeight / face.a.x;
    const double bot_b = cy + f * kCamHeight / face.b.x;
    const double top_a = cy + f * (kCamHeight - face.h) / face.a.x;
    const double top_b = cy + f * (kCamHeight - face.h) / face.b.x;
    // pixel-center rule throughout, so mirrored worlds paint mirrored pixels
    const double lo = std::min(col_a, col_b), hi = std::max(col_a, col_b);
    int c0 = static_cast<int>(std::ceil(lo - 0.5));
    int c1 = static_cast<int>(std::floor(hi - 0.5));
    c0 = std::max(c0, 0);
    c1 = std::min(c1, size - 1);
    const double span = col_b - col_a;
    for (int c = c0; c <= c1; ++c) {
      const double u = (std::fabs(span) < 1e-9) ? 0.5 : ((c + 0.5) - col_a) / span;
      const double uu = std::clamp(u, 0.0, 1.0);
      const double top_f = top_a + uu * (top_b - top_a);
      const double bot_f = bot_a + uu * (bot_b - bot_a);
      const int top = std::max(0, static_cast<int>(std::ceil(top_f - 0.5)));
      const int bot = std::min(size - 1, static_cast<int>(std::floor(bot_f - 0.5)));
      for (int r = top; r <= bot; ++r) img.set_px(r, c, colors::kObstacle);
    }
  }
  return img;
}

// ---- scenarios -----------------------------------------------------------------
enum class Difficulty : uint8_t { straight, turn, ambiguous_intersection };

inline const char* difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::straight: return "straight";
    case Difficulty::turn: return "turn";
    default: return "ambiguous_intersection";
  }
}

struct Scenario {
  std::string id;
  VectorMap map;
  Pose start;
  std::vector<Pose> waypoints;  // world-frame goal poses, in order
  std::vector<Obstacle> obstacles;
  double budget_s = 30.0;
  uint64_t seed = 0;
  Difficulty difficulty = Difficulty::straight;
  std::vector<Vec2> route;  // lane-center path the expert tracks
  double l_opt = 0.0;       // expert executed path length

  /// Snapshot of all obstacles advanced to episode time t; velocities kept so
  /// rollouts started from the snapshot keep advancing them.
  std::vector<Obstacle> obstacles_at(double t) const {
    std::vector<Obstacle> out = obstacles;
    for (Obstacle& ob : out) ob.rect.center = ob.rect.center + ob.vel * t;
    return out;
  }

  const Pose& goal() const { return waypoints.back(); }
};

// ---- pure-pursuit expert ---------------------------------------------------------
struct RouteTracker {
  const std::vector<Vec2>* route = nullptr;
  std::vector<double> arc;  // cumulative arc length per vertex
  double progress = 0.0;

  explicit RouteTracker(const std::vector<Vec2>& r) : route(&r) {
    arc.resize(r.size(), 0.0);
    for (size_t i = 1; i < r.size(); ++i) arc[i] = arc[i - 1] + (r[i] - r[i - 1]).norm();
  }

  double total_length() const { return arc.empty() ? 0.0 : arc.back(); }

  /// Nearest-point projection restricted to a window around current progress,
  /// so self-approaching routes (loops) stay monotone.
  double project(const Vec2& p) {
    const auto& r = *route;
    double best_d = std::numeric_limits<double>::infinity();
    double best_s = progress;
    for (size_t i = 0; i + 1 < r.size(); ++i) {
      if (arc[i + 1] < progress - 3.0) continue;
      if (arc[i] > progress + 8.0) break;
      const Vec2 ab = r[i + 1] - r[i];
      const double len2 = ab.norm2();
      double t = len2 > 0 ? std::clamp((p - r[i]).dot(ab) / len2, 0.0, 1.0) : 0.0;
      const Vec2 q = r[i] + ab * t;
      const double d = (p - q).norm();
      if (d < best_d) {
        best_d = d;
        best_s = arc[i] + std::sqrt(len2) * t;
      }
    }
    progress = std::max(progress, best_s);
    return progress;
  }

  Vec2 point_at(double s) const {
    const auto& r = *route;
    if (s <= 0.0) return r.front();
    for (size_t i = 0; i + 1 < r.size(); ++i) {
      if (s <= arc[i + 1]) {
        const double seg = arc[i + 1] - arc[i];
        const double t = seg > 0 ? (s - arc[i]) / seg : 0.0;
        return r[i] + (r[i + 1] - r[i]) * t;
      }
    }
    return r.back();
  }
};

struct ExpertConfig {
  double lookahead_min = 3.0;
  double lookahead_speed_gain = 1.0;
  double nominal_speed_cmd = 0.7;
  double clearance_slow_at = 3.0;   // m; linear speed reduction below this
  double rollout_horizon = 1.0;     // s; comfort braking lookahead
  double goal_taper_dist = 6.0;
  double min_move_cmd = 0.15;
};

/// Pure pursuit on the lane-center route. Steering from pursuit curvature,
/// speed reduced linearly when the 2 s rollout clearance drops, tapered near
/// the goal.
inline Action expert_action(const EgoState& s, RouteTracker& tracker,
                            const std::vector<Obstacle>& obstacles_now,
                            const ExpertConfig& cfg = {}) {
  const double s0 = tracker.project(s.pose.position());
  const double lookahead = std::max(cfg.lookahead_min, cfg.lookahead_speed_gain * s.speed);
  const Vec2 target = tracker.point_at(s0 + lookahead);
  const Vec2 rel = world_to_ego(target, s.pose);
  const double dist = std::max(rel.norm(), 1e-6);
  const double alpha = std::atan2(rel.y, rel.x);
  const double curvature = 2.0 * std::sin(alpha) / dist;  // CCW-positive
  const double steer_angle = std::atan(curvature * kWheelbase);
  const double steer_cmd = std::clamp(-steer_angle / kMaxSteerRad, -1.0, 1.0);

  double speed_cmd = cfg.nominal_speed_cmd;
  if (!obstacles_now.empty()) {
    // Roll out at the current speed: a stopped vehicle measures its static
    // clearance, so the linear slowdown can never wedge it permanently.
    MotionState<double> m{s.pose.x, s.pose.y, s.pose.yaw, s.speed};
    const double c = rollout_min_clearance<double>(m, steer_cmd, s.speed / kVMax,
                                                   obstacles_now, cfg.rollout_horizon);
    speed_cmd *= std::clamp(c / cfg.clearance_slow_at, 0.0, 1.0);
  }
  const double remaining = tracker.total_length() - s0;
  const double taper = std::clamp(remaining / cfg.goal_taper_dist, cfg.min_move_cmd, 1.0);
  speed_cmd = std::min(speed_cmd, cfg.nominal_speed_cmd * taper);
  return Action::clamped(steer_cmd, speed_cmd);
}

// ---- road construction helpers ------------------------------------------------
namespace roadgen {

constexpr double kRoadHalf = 2.0;
constexpr double kWallOffset = 4.5;   // wall centerline distance from road centerline
constexpr double kWallHalfThick = 0.25;
constexpr double kWallHeight = 2.2;

/// Straight road piece: center/left/right boundary polylines plus a drivable
/// rectangle, appended to the map.
inline void add_road(VectorMap& map, const Vec2& a, const Vec2& b, double half = kRoadHalf) {
  const Vec2 dir = b - a;
  const double len = dir.norm();
  const Vec2 u = dir * (1.0 / len);
  const Vec2 n = u.perp();
  map.lanes.push_back({LaneBoundary::center, {a, b}});
  map.lanes.push_back({LaneBoundary::left, {a + n * half, b + n * half}});
  map.lanes.push_back({LaneBoundary::right, {a - n * half, b - n * half}});
  Polygon d;
  d.pts = {a + n * half, b + n * half, b - n * half, a - n * half};
  map.drivable_area.push_back(d);
}

/// Square drivable patch (junction/corner), no lane lines.
inline void add_patch(VectorMap& map, const Vec2& c, double half) {
  Polygon d;
  d.pts = {{c.x - half, c.y - half}, {c.x + half, c.y - half},
           {c.x + half, c.y + half}, {c.x - half, c.y + half}};
  map.drivable_area.push_back(d);
}

/// Crosswalk band across a road at point `c`, road direction `u`.
inline void add_crosswalk(VectorMap& map, const Vec2& c, const Vec2& u, double road_half,
                          double band = 1.2) {
  const Vec2 n = u.perp();
  Polygon p;
  p.pts = {c - u * (band / 2) + n * road_half, c + u * (band / 2) + n * road_half,
           c + u * (band / 2) - n * road_half, c - u * (band / 2) - n * road_half};
  map.crosswalks.push_back(p);
}

/// Axis-aligned wall run (obstacle box). horizontal: along x at fixed y.
inline Obstacle wall_x(double x0, double x1, double y) {
  Obstacle ob;
  ob.rect = {{(x0 + x1) / 2.0, y}, (x1 - x0) / 2.0, kWallHalfThick, 0.0};
  ob.height = kWallHeight;
  return ob;
}

inline Obstacle wall_y(double y0, double y1, double x) {
  Obstacle ob;
  ob.rect = {{x, (y0 + y1) / 2.0}, (y1 - y0) / 2.0, kWallHalfThick, M_PI / 2.0};
  ob.height = kWallHeight;
  return ob;
}

/// Cuts each interior corner of a route polyline with a diagonal chamfer so
/// that pure pursuit stays within the vehicle's minimum turn radius.
inline std::vector<Vec2> chamfer_route(const std::vector<Vec2>& pts, double cut = 4.0) {
  if (pts.size() < 3) return pts;
  std::vector<Vec2> out;
  out.push_back(pts.front());
  for (size_t i = 1; i + 1 < pts.size(); ++i) {
    const Vec2 in_dir = pts[i] - pts[i - 1];
    const Vec2 out_dir = pts[i + 1] - pts[i];
    const double li = in_dir.norm(), lo = out_dir.norm();
    const double c = std::min({cut, li * 0.5, lo * 0.5});
    out.push_back(pts[i] - in_dir * (c / li));
    out.push_back(pts[i] + out_dir * (c / lo));
  }
  out.push_back(pts.back());
  return out;
}

/// Rigidly transforms an entire scenario (map, walls, start, goals, route).
inline void transform_scenario(Scenario& sc, double angle, const Vec2& offset) {
  const auto tf = [&](const Vec2& p) { return rotate(p, angle) + offset; };
  for (auto& l : sc.map.lanes)
    for (Vec2& p : l.pts) p = tf(p);
  for (auto& c : sc.map.crosswalks)
    for (Vec2& p : c.pts) p = tf(p);
  for (auto& s : sc.map.signs) s.pos = tf(s.pos);
  for (auto& d : sc.map.drivable_area)
    for (Vec2& p : d.pts) p = tf(p);
  for (auto& ob : sc.obstacles) {
    ob.rect.center = tf(ob.rect.center);
    ob.rect.yaw = normalize_angle(ob.rect.yaw + angle);
    ob.vel = rotate(ob.vel, angle);
  }
  sc.start = {tf({sc.start.x, sc.start.y}).x, tf({sc.start.x, sc.start.y}).y,
              normalize_angle(sc.start.yaw + angle)};
  for (Pose& w : sc.waypoints) {
    const Vec2 p = tf({w.x, w.y});
    w = {p.x, p.y, normalize_angle(w.yaw + angle)};
  }
  for (Vec2& p : sc.route) p = tf(p);
}

}  // namespace roadgen

// ---- scenario builders ----------------------------------------------------------
namespace detail {

inline void mirror_y(Scenario& sc) {
  for (auto& l : sc.map.lanes)
    for (Vec2& p : l.pts) p.y = -p.y;
  for (auto& c : sc.map.crosswalks)
    for (Vec2& p : c.pts) p.y = -p.y;
  for (auto& s : sc.map.signs) s.pos.y = -s.pos.y;
  for (auto& d : sc.map.drivable_area)
    for (Vec2& p : d.pts) p.y = -p.y;
  for (auto& ob : sc.obstacles) {
    ob.rect.center.y = -ob.rect.center.y;
    ob.rect.yaw = normalize_angle(-ob.rect.yaw);
    ob.vel.y = -ob.vel.y;
  }
  sc.start.y = -sc.start.y;
  sc.start.yaw = normalize_angle(-sc.start.yaw);
  for (Pose& w : sc.waypoints) {
    w.y = -w.y;
    w.yaw = normalize_angle(-w.yaw);
  }
  for (Vec2& p : sc.route) p.y = -p.y;
}

inline Scenario build_straight(Rng& rng) {
  using namespace roadgen;
  Scenario sc;
  sc.difficulty = Difficulty::straight;
  const double len = rng.uniform(32.0, 52.0);
  add_road(sc.map, {0.0, 0.0}, {len, 0.0});
  if (rng.bernoulli(0.5))
    add_crosswalk(sc.map, {rng.uniform(0.3 * len, 0.7 * len), 0.0}, {1.0, 0.0}, kRoadHalf);
  if (rng.bernoulli(0.6)) {
    Sign s;
    s.pos = {rng.uniform(0.2 * len, 0.8 * len), rng.bernoulli(0.5) ? 3.0 : -3.0};
    s.cls = rng.bernoulli(0.5) ? SignClass::speed_limit : SignClass::stop;
    s.value = 30.0;
    sc.map.signs.push_back(s);
  }
  // roadside obstacles, clear of the route
  const int n_obs = rng.uniform_int(0, 2);
  for (int i = 0; i < n_obs; ++i) {
    Obstacle ob;
    const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
    ob.rect = {{rng.uniform(6.0, len - 4.0), side * rng.uniform(5.5, 8.0)},
               rng.uniform(0.5, 1.2), rng.uniform(0.5, 1.0), rng.uniform(-M_PI, M_PI)};
    sc.obstacles.push_back(ob);
  }
  if (rng.bernoulli(0.25)) {
    Obstacle mv;
    mv.rect = {{rng.uniform(10.0, len), rng.bernoulli(0.5) ? 9.0 : -9.0}, 0.8, 0.5, 0.0};
    mv.vel = {rng.uniform(-1.5, 1.5), 0.0};
    sc.obstacles.push_back(mv);
  }
  const double jitter = rng.uniform(-0.3, 0.3);
  sc.start = {1.5, jitter, 0.0};
  sc.route = {{1.5, 0.0}, {len - 1.5, 0.0}};
  sc.waypoints = {{len - 1.5, 0.0, 0.0}};
  return sc;
}

inline Scenario build_turn(Rng& rng) {
  using namespace roadgen;
  Scenario sc;
  sc.difficulty = Difficulty::turn;
  const double l1 = rng.uniform(16.0, 26.0);
  const double l2 = rng.uniform(14.0, 22.0);
  const double dir = rng.bernoulli(0.5) ? 1.0 : -1.0;  // 1: left turn (north)
  const Vec2 corner{l1, 0.0};
  const Vec2 end{l1, dir * l2};
  add_road(sc.map, {0.0, 0.0}, corner);
  add_road(sc.map, corner, end);
  add_patch(sc.map, corner, kRoadHalf + 1.0);
  if (rng.bernoulli(0.5)) add_crosswalk(sc.map, {l1 * 0.5, 0.0}, {1.0, 0.0}, kRoadHalf);
  {
    Sign s;
    s.pos = {l1 - 4.0, -dir * 3.2};
    s.cls = SignClass::yield;
    s.value = 0.0;
    sc.map.signs.push_back(s);
  }
  const int n_obs = rng.uniform_int(0, 2);
  for (int i = 0; i < n_obs; ++i) {
    Obstacle ob;
    const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
    ob.rect = {{rng.uniform(5.0, l1 - 5.0), side * rng.uniform(5.5, 8.0)},
               rng.uniform(0.5, 1.2), rng.uniform(0.5, 1.0), rng.uniform(-M_PI, M_PI)};
    sc.obstacles.push_back(ob);
  }
  const double jitter = rng.uniform(-0.3, 0.3);
  sc.start = {1.5, jitter, 0.0};
  sc.route = chamfer_route({{1.5, 0.0}, corner, {end.x, end.y - dir * 1.5}});
  const double end_yaw = dir > 0 ? M_PI / 2.0 : -M_PI / 2.0;
  sc.waypoints = {{end.x, end.y - dir * 1.5, end_yaw}};
  return sc;
}

/// T-junction with two visually identical branches. Only the map within the
/// 25.6 m window reveals which branch continues; occluder walls keep the
/// camera blind to the difference until the vehicle has committed.
inline Scenario build_ambiguous(Rng& rng, bool north_live) {
  using namespace roadgen;
  Scenario sc;
  sc.difficulty = Difficulty::ambiguous_intersection;
  const double l_app = rng.uniform(16.0, 22.0);
  const double l_branch = 8.0;
  const double l_leg = rng.uniform(15.0, 17.0);
  const double l_stub = 6.0;       // dead leg length; must stay camera-hidden
  const double l_tail = 2.0;       // dead-side stub attached to its corner
  const double l_fin = rng.uniform(6.0, 8.0);

  const double W = kWallOffset;    // 4.5
  const double C = kWallOffset;    // corridor wall coordinate, same value

  // Roads: approach, both branch corridors, live leg, dead stubs, both
  // descending corridors, final leg. Everything except the leg gap is
  // symmetric between the two variants (before mirroring).
  add_road(sc.map, {-l_app, 0.0}, {0.0, 0.0});
  add_patch(sc.map, {0.0, 0.0}, kRoadHalf + 1.0);
  add_road(sc.map, {0.0, 0.0}, {0.0, l_branch});        // north branch
  add_road(sc.map, {0.0, 0.0}, {0.0, -l_branch});       // south branch
  add_patch(sc.map, {0.0, l_branch}, kRoadHalf + 1.0);
  add_patch(sc.map, {0.0, -l_branch}, kRoadHalf + 1.0);
  // live leg: full; dead leg: short stub then gap, then a tail at the far end
  add_road(sc.map, {0.0, l_branch}, {l_leg, l_branch});
  add_road(sc.map, {0.0, -l_branch}, {l_stub, -l_branch});
  add_road(sc.map, {l_leg - l_tail, -l_branch}, {l_leg, -l_branch});
  add_patch(sc.map, {l_leg, l_branch}, kRoadHalf + 1.0);
  add_patch(sc.map, {l_leg, -l_branch}, kRoadHalf + 1.0);
  add_road(sc.map, {l_leg, l_branch}, {l_leg, 0.0});    // descending, live side
  add_road(sc.map, {l_leg, -l_branch}, {l_leg, 0.0});   // descending, dead side
  add_patch(sc.map, {l_leg, 0.0}, kRoadHalf + 1.0);
  add_road(sc.map, {l_leg, 0.0}, {l_leg + l_fin + 2.0, 0.0});
  // identical dressing on both sides
  add_crosswalk(sc.map, {0.0, l_branch * 0.55}, {0.0, 1.0}, kRoadHalf);
  add_crosswalk(sc.map, {0.0, -l_branch * 0.55}, {0.0, 1.0}, kRoadHalf);
  {
    Sign s1, s2;
    s1.pos = {-3.5, 3.2};
    s1.cls = SignClass::traffic_light;
    s2.pos = {-3.5, -3.2};
    s2.cls = SignClass::traffic_light;
    sc.map.signs.push_back(s1);
    sc.map.signs.push_back(s2);
  }

  // Occluder walls (also collidable obstacles). Openings follow the roads.
  auto& obs = sc.obstacles;
  const double leg_lo = l_branch - 2.5, leg_hi = l_branch + 2.5;  // leg opening in branch walls
  // approach corridor
  obs.push_back(wall_x(-l_app - 3.0, -W, W));
  obs.push_back(wall_x(-l_app - 3.0, -W, -W));
  // junction east wall plus branch east walls, with leg openings on both sides
  obs.push_back(wall_y(-leg_lo, leg_lo, C));
  obs.push_back(wall_y(leg_hi, l_branch + W, C));
  obs.push_back(wall_y(-l_branch - W, -leg_hi, C));
  // branch west walls
  obs.push_back(wall_y(W, l_branch + W, -C));
  obs.push_back(wall_y(-l_branch - W, -W, -C));
  // branch end caps
  obs.push_back(wall_x(-C, C, l_branch + W));
  obs.push_back(wall_x(-C, C, -l_branch - W));
  // leg side walls, both sides, spanning the gap too (symmetric)
  obs.push_back(wall_x(C, l_leg - W, l_branch - W));
  obs.push_back(wall_x(C, l_leg - W, -(l_branch - W)));
  obs.push_back(wall_x(C, l_leg + W, l_branch + W));
  obs.push_back(wall_x(C, l_leg + W, -(l_branch + W)));
  // descending corridor west walls (opening at the leg on both sides)
  obs.push_back(wall_y(-W, leg_lo, l_leg - W));
  obs.push_back(wall_y(leg_hi, l_branch + W, l_leg - W));
  obs.push_back(wall_y(-leg_lo, W, l_leg - W));
  obs.push_back(wall_y(-l_branch - W, -leg_hi, l_leg - W));
  // descending corridor east walls (opening at the final leg)
  obs.push_back(wall_y(2.5, l_branch + W, l_leg + W));
  obs.push_back(wall_y(-l_branch - W, -2.5, l_leg + W));
  // final leg walls and end cap
  obs.push_back(wall_x(l_leg + W, l_leg + l_fin + 4.0, W));
  obs.push_back(wall_x(l_leg + W, l_leg + l_fin + 4.0, -W));
  obs.push_back(wall_y(-W, W, l_leg + l_fin + 4.0));
  // dead-side caps: close the stub and the tail mouth (asymmetric, hidden)
  obs.push_back(wall_y(-leg_hi, -leg_lo, l_stub + kWallHalfThick));
  obs.push_back(wall_y(-leg_hi, -leg_lo, l_leg - l_tail - kWallHalfThick));

  const double jitter = rng.uniform(-0.25, 0.25);
  sc.start = {-l_app + 1.5, jitter, 0.0};
  sc.route = chamfer_route({{-l_app + 1.5, 0.0},
                            {0.0, 0.0},
                            {0.0, l_branch},
                            {l_leg, l_branch},
                            {l_leg, 0.0},
                            {l_leg + l_fin, 0.0}});
  sc.waypoints = {{l_leg + l_fin, 0.0, 0.0}};

  if (!north_live) mirror_y(sc);
  return sc;
}

}  // namespace detail

// ---- expert rollout and generator acceptance -------------------------------------
inline bool inside_drivable(const VectorMap& map, const Vec2& p) {
  for (const auto& d : map.drivable_area)
    if (point_in_polygon(p, d.pts)) return true;
  return false;
}

struct ExpertRollout {
  bool completed = false;
  bool collided = false;
  bool infraction = false;
  double path_length = 0.0;
  double time_s = 0.0;
  std::vector<EgoState> states;   // state before each action
  std::vector<Action> actions;
};

constexpr double kArrivalRadius = 2.0;

/// Runs the pure-pursuit expert through the scenario. Optional seeded action
/// noise widens state coverage for demonstrations; the rollout is rejected by
/// callers if it no longer completes cleanly.
inline ExpertRollout run_expert(const Scenario& sc, double max_time_s, Rng* noise = nullptr,
                                double noise_mag = 0.0) {
  ExpertRollout out;
  RouteTracker tracker(sc.route);
  EgoState ego{sc.start, 0.0};
  const Vec2 goal = sc.goal().position();
  double t = 0.0;
  while (t < max_time_s) {
    if ((ego.pose.position() - goal).norm() <= kArrivalRadius) {
      out.completed = true;
      break;
    }
    const auto obstacles_now = sc.obstacles_at(t);
    Action a = expert_action(ego, tracker, obstacles_now);
    if (noise && noise_mag > 0.0) {
      a = Action::clamped(a.steering + noise->uniform(-noise_mag, noise_mag),
                          a.speed + noise->uniform(-noise_mag, noise_mag) * 0.5);
    }
    out.states.push_back(ego);
    out.actions.push_back(a);
    const EgoState next = step_dynamics(ego, a, kDt);
    const auto contact =
        check_collision({ego.footprint(), next.footprint()}, obstacles_now, kDt, 0.0);
    out.path_length += (next.pose.position() - ego.pose.position()).norm();
    ego = next;
    t += kDt;
    if (contact.hit) {
      out.collided = true;
      break;
    }
    if (!inside_drivable(sc.map, ego.pose.position())) {
      out.infraction = true;
      break;
    }
  }
  out.time_s = t;
  return out;
}

/// Procedural scenario generation with rejection sampling: a scenario is only
/// emitted once the expert completes it collision-free. Deterministic in
/// (seed, difficulty).
inline Scenario generate_scenario(uint64_t seed, Difficulty difficulty) {
  Rng master(seed * 0x9e3779b97f4a7c15ULL + static_cast<uint64_t>(difficulty) + 1);
  for (int attempt = 0; attempt < 60; ++attempt) {
    Rng rng = master.fork(attempt);
    Scenario sc;
    switch (difficulty) {
      case Difficulty::straight: sc = detail::build_straight(rng); break;
      case Difficulty::turn: sc = detail::build_turn(rng); break;
      case Difficulty::ambiguous_intersection:
        sc = detail::build_ambiguous(rng, rng.bernoulli(0.5));
        break;
    }
    const double angle = rng.uniform(-M_PI, M_PI);
    const Vec2 offset{rng.uniform(-80.0, 80.0), rng.uniform(-80.0, 80.0)};
    roadgen::transform_scenario(sc, angle, offset);
    sc.seed = seed;
    sc.id = std::string(difficulty_name(difficulty)) + "-" + std::to_string(seed);

    const ExpertRollout trial = run_expert(sc, 120.0);
    if (!trial.completed || trial.collided || trial.infraction) continue;
    sc.l_opt = trial.path_length;
    sc.budget_s = trial.time_s * 1.6 + 5.0;
    return sc;
  }
  throw std::runtime_error("generate_scenario: no valid scenario after 60 attempts (seed " +
                           std::to_string(seed) + ")");
}

}  // namespace waydrive

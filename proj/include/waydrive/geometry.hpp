#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace waydrive {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double norm2() const { return x * x + y * y; }
  Vec2 perp() const { return {-y, x}; }  // 90 degrees counterclockwise
};

inline Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Wraps to (-pi, pi].
inline double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

/// World pose: x east, y north, yaw counterclockwise from the east axis.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Vec2 position() const { return {x, y}; }
  Vec2 heading() const { return {std::cos(yaw), std::sin(yaw)}; }
};

/// Ego frame: +x forward along yaw, +y left. Rotate by -yaw, then translate.
inline Vec2 world_to_ego(const Vec2& p, const Pose& pose) {
  return rotate(p - pose.position(), -pose.yaw);
}

inline Vec2 ego_to_world(const Vec2& p, const Pose& pose) {
  return rotate(p, pose.yaw) + pose.position();
}

// ---- segments --------------------------------------------------------------
inline double point_segment_dist(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.norm2();
  if (len2 <= 0.0) return (p - a).norm();
  double t = (p - a).dot(ab) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

inline double point_polyline_dist(const Vec2& p, const std::vector<Vec2>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < pts.size(); ++i)
    best = std::min(best, point_segment_dist(p, pts[i], pts[i + 1]));
  if (pts.size() == 1) best = (p - pts[0]).norm();
  return best;
}

inline bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    const double v = (q - p).cross(r - p);
    return v > 0 ? 1 : (v < 0 ? -1 : 0);
  };
  const int o1 = orient(a, b, c), o2 = orient(a, b, d);
  const int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  const auto on_seg = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) &&
           std::min(p.y, q.y) <= r.y && r.y <= std::max(p.y, q.y);
  };
  if (o1 == 0 && on_seg(a, b, c)) return true;
  if (o2 == 0 && on_seg(a, b, d)) return true;
  if (o3 == 0 && on_seg(c, d, a)) return true;
  if (o4 == 0 && on_seg(c, d, b)) return true;
  return false;
}

// ---- polygons ---------------------------------------------------------------
/// Even-odd rule. A point exactly on a horizontal boundary follows the
/// half-open crossing convention (y0 <= p.y < y1), matching the rasterizer.
inline bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
  bool inside = false;
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    if ((a.y <= p.y && p.y < b.y) || (b.y <= p.y && p.y < a.y)) {
      const double cx = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (cx < p.x) inside = !inside;
    }
  }
  return inside;
}

/// Distance to a filled polygon region: 0 inside, else nearest edge.
inline double point_polygon_dist(const Vec2& p, const std::vector<Vec2>& poly) {
  if (point_in_polygon(p, poly)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i)
    best = std::min(best, point_segment_dist(p, poly[i], poly[(i + 1) % n]));
  return best;
}

/// O(E^2) simplicity test: no two non-adjacent edges intersect.
inline bool polygon_is_simple(const std::vector<Vec2>& poly) {
  const size_t n = poly.size();
  if (n < 3) return false;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const size_t ni = (i + 1) % n, nj = (j + 1) % n;
      if (j == i || nj == i || ni == j) continue;  // adjacent edges share a vertex
      if (segments_intersect(poly[i], poly[ni], poly[j], poly[nj])) return false;
    }
  }
  return true;
}

// ---- oriented rectangles ----------------------------------------------------
struct OrientedRect {
  Vec2 center;
  double half_len = 0.0;  // along local x (yaw direction)
  double half_wid = 0.0;  // along local y
  double yaw = 0.0;

  std::array<Vec2, 4> corners() const {
    const Vec2 ux = {std::cos(yaw), std::sin(yaw)};
    const Vec2 uy = ux.perp();
    const Vec2 ex = ux * half_len, ey = uy * half_wid;
    return {center + ex + ey, center - ex + ey, center - ex - ey, center + ex - ey};
  }
};

/// Separating-axis test for two oriented rectangles (touching counts as
/// intersecting).
inline bool rects_intersect(const OrientedRect& a, const OrientedRect& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const Vec2 axes[4] = {
      {std::cos(a.yaw), std::sin(a.yaw)}, Vec2{std::cos(a.yaw), std::sin(a.yaw)}.perp(),
      {std::cos(b.yaw), std::sin(b.yaw)}, Vec2{std::cos(b.yaw), std::sin(b.yaw)}.perp()};
  for (const Vec2& ax : axes) {
    double amin = ca[0].dot(ax), amax = amin;
    for (int i = 1; i < 4; ++i) {
      const double t = ca[i].dot(ax);
      amin = std::min(amin, t);
      amax = std::max(amax, t);
    }
    double bmin = cb[0].dot(ax), bmax = bmin;
    for (int i = 1; i < 4; ++i) {
      const double t = cb[i].dot(ax);
      bmin = std::min(bmin, t);
      bmax = std::max(bmax, t);
    }
    if (amax < bmin || bmax < amin) return false;
  }
  return true;
}

/// Distance from a point to a filled oriented rectangle (0 inside).
inline double point_rect_dist(const Vec2& p, const OrientedRect& r) {
  const Vec2 local = rotate(p - r.center, -r.yaw);
  const double dx = std::max(0.0, std::fabs(local.x) - r.half_len);
  const double dy = std::max(0.0, std::fabs(local.y) - r.half_wid);
  return std::hypot(dx, dy);
}

}  // namespace waydrive

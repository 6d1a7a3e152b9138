#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "waydrive/geometry.hpp"

namespace waydrive {

enum class LaneBoundary : uint8_t { left, right, center };
enum class SignClass : uint8_t { speed_limit, stop, yield, traffic_light };

struct LanePolyline {
  LaneBoundary cls = LaneBoundary::center;
  std::vector<Vec2> pts;
};

struct Polygon {
  std::vector<Vec2> pts;  // closed implicitly, simple
};

struct Sign {
  Vec2 pos;
  SignClass cls = SignClass::speed_limit;
  double value = 0.0;  // numeric attribute, e.g. speed limit
};

/// Ground-truth world geometry: lanes, crosswalks, signs, drivable area.
struct VectorMap {
  std::vector<LanePolyline> lanes;
  std::vector<Polygon> crosswalks;
  std::vector<Sign> signs;
  std::vector<Polygon> drivable_area;

  bool empty() const {
    return lanes.empty() && crosswalks.empty() && signs.empty() && drivable_area.empty();
  }
};

class MapValidationError : public std::runtime_error {
 public:
  explicit MapValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Normalizes and checks map invariants. Polygons with a repeated closing
/// vertex are deduplicated; 1-vertex polylines or self-intersecting polygons
/// are rejected.
inline void validate_map(VectorMap& map) {
  const auto check_finite = [](const Vec2& p, const std::string& where) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw MapValidationError(where + ": non-finite coordinate");
  };
  for (size_t i = 0; i < map.lanes.size(); ++i) {
    auto& pts = map.lanes[i].pts;
    const std::string where = "lanes[" + std::to_string(i) + "]";
    if (pts.size() < 2) throw MapValidationError(where + ": polyline needs at least 2 vertices");
    for (const Vec2& p : pts) check_finite(p, where);
  }
  const auto fix_polygon = [&](Polygon& poly, const std::string& where) {
    auto& pts = poly.pts;
    if (pts.size() >= 2 && pts.front().x == pts.back().x && pts.front().y == pts.back().y)
      pts.pop_back();  // repeated closing vertex
    if (pts.size() < 3) throw MapValidationError(where + ": polygon needs at least 3 vertices");
    for (const Vec2& p : pts) check_finite(p, where);
    if (!polygon_is_simple(pts)) throw MapValidationError(where + ": polygon is self-intersecting");
  };
  for (size_t i = 0; i < map.crosswalks.size(); ++i)
    fix_polygon(map.crosswalks[i], "crosswalks[" + std::to_string(i) + "]");
  for (size_t i = 0; i < map.drivable_area.size(); ++i)
    fix_polygon(map.drivable_area[i], "drivable_area[" + std::to_string(i) + "]");
  for (size_t i = 0; i < map.signs.size(); ++i)
    check_finite(map.signs[i].pos, "signs[" + std::to_string(i) + "]");
}

// ---- radius query -----------------------------------------------------------
inline double polyline_dist(const Vec2& p, const std::vector<Vec2>& pts) {
  return point_polyline_dist(p, pts);
}

/// Distance from a point to a polygon treated as a filled region.
inline double polygon_dist(const Vec2& p, const Polygon& poly) {
  return point_polygon_dist(p, poly.pts);
}

/// Every primitive with any part within distance r of the pose position.
/// Primitives are kept whole; clipping happens only at rasterization.
inline VectorMap query_radius(const VectorMap& map, const Pose& pose, double r) {
  const Vec2 c = pose.position();
  VectorMap out;
  for (const auto& lane : map.lanes)
    if (polyline_dist(c, lane.pts) <= r) out.lanes.push_back(lane);
  for (const auto& cw : map.crosswalks)
    if (polygon_dist(c, cw) <= r) out.crosswalks.push_back(cw);
  for (const auto& s : map.signs)
    if ((s.pos - c).norm() <= r) out.signs.push_back(s);
  for (const auto& da : map.drivable_area)
    if (polygon_dist(c, da) <= r) out.drivable_area.push_back(da);
  return out;
}

/// Rigid transform of all primitives into the ego frame of `pose`.
inline VectorMap to_ego(const VectorMap& map, const Pose& pose) {
  VectorMap out = map;
  for (auto& lane : out.lanes)
    for (Vec2& p : lane.pts) p = world_to_ego(p, pose);
  for (auto& cw : out.crosswalks)
    for (Vec2& p : cw.pts) p = world_to_ego(p, pose);
  for (auto& s : out.signs) s.pos = world_to_ego(s.pos, pose);
  for (auto& da : out.drivable_area)
    for (Vec2& p : da.pts) p = world_to_ego(p, pose);
  return out;
}

// ---- raster grid --------------------------------------------------------------
/// Ego-centered multi-channel occupancy raster of the map crop. For an ego
/// point (f forward, l left): col = floor((E - l)/res), row = floor((E - f)/res)
/// with E = size*res/2, so the ego origin lands in pixel (size/2, size/2) and
/// forward points up the image.
struct SemanticGrid {
  static constexpr int kLane = 0;
  static constexpr int kCrosswalk = 1;
  static constexpr int kSign = 2;
  static constexpr int kDrivable = 3;
  static constexpr int kChannels = 4;

  int size = 0;
  double resolution = 0.0;
  std::vector<uint8_t> cells;  // channel-major, then row-major

  SemanticGrid() = default;
  SemanticGrid(int size_, double res)
      : size(size_), resolution(res),
        cells(static_cast<size_t>(kChannels) * size_ * size_, 0) {}

  uint8_t at(int ch, int row, int col) const {
    return cells[(static_cast<size_t>(ch) * size + row) * size + col];
  }
  void set(int ch, int row, int col) {
    cells[(static_cast<size_t>(ch) * size + row) * size + col] = 1;
  }
  double window() const { return size * resolution; }
  size_t count(int ch) const {
    size_t n = 0;
    const size_t base = static_cast<size_t>(ch) * size * size;
    for (size_t i = 0; i < static_cast<size_t>(size) * size; ++i) n += cells[base + i];
    return n;
  }
};

namespace detail {

/// Does the segment [a,b] (in continuous ego coords) pass through the closed
/// square of pixel (row, col)? Slab test against the pixel's bounds.
inline bool segment_hits_pixel(const Vec2& a, const Vec2& b, int row, int col, int size,
                               double res) {
  const double E = size * res / 2.0;
  // pixel (row, col) covers l in (E-(col+1)*res, E-col*res], f analogous;
  // use closed bounds on both sides, which is the conservative reading.
  const double l_lo = E - (col + 1) * res, l_hi = E - col * res;
  const double f_lo = E - (row + 1) * res, f_hi = E - row * res;
  double t0 = 0.0, t1 = 1.0;
  const double d[2] = {b.x - a.x, b.y - a.y};
  const double lo[2] = {f_lo, l_lo}, hi[2] = {f_hi, l_hi};
  const double s[2] = {a.x, a.y};
  for (int k = 0; k < 2; ++k) {
    if (d[k] == 0.0) {
      if (s[k] < lo[k] || s[k] > hi[k]) return false;
    } else {
      double ta = (lo[k] - s[k]) / d[k];
      double tb = (hi[k] - s[k]) / d[k];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
  }
  return true;
}

/// Supercover rasterization of one segment: marks every pixel whose closed
/// square the segment passes through. Sampled walk plus an exact 3x3
/// neighborhood slab test; the dense sampling guarantees no crossed pixel is
/// farther than one cell from a sample.
inline void draw_segment(SemanticGrid& g, int ch, const Vec2& a, const Vec2& b) {
  const double res = g.resolution;
  const double E = g.size * res / 2.0;
  const double len = (b - a).norm();
  const int steps = std::max(1, static_cast<int>(std::ceil(len / (0.4 * res))));
  int prev_row = INT32_MIN, prev_col = INT32_MIN;
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const Vec2 p = a + (b - a) * t;
    const int row = static_cast<int>(std::floor((E - p.x) / res));
    const int col = static_cast<int>(std::floor((E - p.y) / res));
    if (row == prev_row && col == prev_col) continue;
    prev_row = row;
    prev_col = col;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        const int r = row + dr, c = col + dc;
        if (r < 0 || r >= g.size || c < 0 || c >= g.size) continue;
        if (g.at(ch, r, c)) continue;
        if (segment_hits_pixel(a, b, r, c, g.size, res)) g.set(ch, r, c);
      }
    }
  }
}

/// Scanline even-odd fill over pixel centers. Matches a per-pixel-center
/// point_in_polygon test exactly (same half-open crossing convention).
inline void fill_polygon(SemanticGrid& g, int ch, const std::vector<Vec2>& poly) {
  const double res = g.resolution;
  const double E = g.size * res / 2.0;
  const size_t n = poly.size();
  std::vector<double> crossings;
  for (int row = 0; row < g.size; ++row) {
    const double f = E - (row + 0.5) * res;  // pixel-center forward coordinate
    crossings.clear();
    for (size_t i = 0; i < n; ++i) {
      const Vec2& a = poly[i];
      const Vec2& b = poly[(i + 1) % n];
      if ((a.x <= f && f < b.x) || (b.x <= f && f < a.x))
        crossings.push_back(a.y + (f - a.x) * (b.y - a.y) / (b.x - a.x));
    }
    if (crossings.size() < 2) continue;
    std::sort(crossings.begin(), crossings.end());
    // inside iff the number of crossings strictly below l is odd:
    // the inside interval between crossings c1 < c2 is (c1, c2].
    for (size_t k = 0; k + 1 < crossings.size(); k += 2) {
      const double lo = crossings[k], hi = crossings[k + 1];
      // pixel center l(col) = E - (col+0.5)*res, decreasing in col
      // need lo < l <= hi
      const double cmin_f = (E - hi) / res - 0.5;  // from l <= hi
      const double cmax_f = (E - lo) / res - 0.5;  // from l > lo (strict)
      int cmin = static_cast<int>(std::ceil(cmin_f));
      if (static_cast<double>(cmin) < cmin_f) ++cmin;  // guard fp rounding
      int cmax = static_cast<int>(std::floor(cmax_f));
      if (static_cast<double>(cmax) >= cmax_f) --cmax;  // strict upper bound
      cmin = std::max(cmin, 0);
      cmax = std::min(cmax, g.size - 1);
      for (int col = cmin; col <= cmax; ++col) g.set(ch, row, col);
    }
  }
}

}  // namespace detail

/// Rasterizes primitives already expressed in the ego frame. Polylines are
/// drawn with supercover lines, polygons filled by the even-odd rule on pixel
/// centers, signs mark their single containing pixel. Geometry outside the
/// window is silently clipped.
inline SemanticGrid rasterize(const VectorMap& ego_map, int size, double resolution) {
  if (size % 2 != 0) throw MapValidationError("rasterize: grid size must be even");
  if (!(resolution > 0.0)) throw MapValidationError("rasterize: resolution must be positive");
  SemanticGrid g(size, resolution);
  for (const auto& lane : ego_map.lanes)
    for (size_t i = 0; i + 1 < lane.pts.size(); ++i)
      detail::draw_segment(g, SemanticGrid::kLane, lane.pts[i], lane.pts[i + 1]);
  for (const auto& cw : ego_map.crosswalks) detail::fill_polygon(g, SemanticGrid::kCrosswalk, cw.pts);
  for (const auto& da : ego_map.drivable_area)
    detail::fill_polygon(g, SemanticGrid::kDrivable, da.pts);
  const double E = size * resolution / 2.0;
  for (const auto& s : ego_map.signs) {
    const int row = static_cast<int>(std::floor((E - s.pos.x) / resolution));
    const int col = static_cast<int>(std::floor((E - s.pos.y) / resolution));
    if (row >= 0 && row < size && col >= 0 && col < size) g.set(SemanticGrid::kSign, row, col);
  }
  return g;
}

/// Full sensor-side pipeline: radius query, ego transform, rasterize.
inline SemanticGrid map_crop(const VectorMap& map, const Pose& pose, double radius, int size,
                             double resolution) {
  return rasterize(to_ego(query_radius(map, pose, radius), pose), size, resolution);
}

}  // namespace waydrive

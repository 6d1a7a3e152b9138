#include <catch2/catch_amalgamated.hpp>

#include "waydrive/hdmap.hpp"
#include "waydrive/tensor.hpp"

using namespace waydrive;

namespace {

VectorMap random_map(Rng& rng, int lanes, int polys) {
  VectorMap m;
  for (int i = 0; i < lanes; ++i) {
    LanePolyline l;
    l.cls = LaneBoundary::center;
    Vec2 p{rng.uniform(-30, 30), rng.uniform(-30, 30)};
    l.pts.push_back(p);
    const int segs = rng.uniform_int(1, 4);
    for (int s = 0; s < segs; ++s) {
      p = p + Vec2{rng.uniform(-12, 12), rng.uniform(-12, 12)};
      l.pts.push_back(p);
    }
    m.lanes.push_back(std::move(l));
  }
  for (int i = 0; i < polys; ++i) {
    // random convex-ish polygon: points on a circle
    Polygon poly;
    const Vec2 c{rng.uniform(-25, 25), rng.uniform(-25, 25)};
    const double r = rng.uniform(1.5, 6.0);
    const int n = rng.uniform_int(3, 7);
    double ang = rng.uniform(0, 2 * M_PI);
    for (int k = 0; k < n; ++k) {
      ang += 2 * M_PI / n;
      poly.pts.push_back({c.x + r * std::cos(ang), c.y + r * std::sin(ang)});
    }
    if (i % 2 == 0) m.crosswalks.push_back(std::move(poly));
    else m.drivable_area.push_back(std::move(poly));
  }
  return m;
}

/// Independent even-odd ray cast, written as the classic textbook loop.
bool pip_oracle(const Vec2& p, const std::vector<Vec2>& poly) {
  bool inside = false;
  const size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

/// Closed-square segment/pixel overlap oracle for supercover lines.
bool segment_pixel_oracle(const Vec2& a, const Vec2& b, int row, int col, int size, double res) {
  const double E = size * res / 2.0;
  const double f_hi = E - row * res, f_lo = E - (row + 1) * res;
  const double l_hi = E - col * res, l_lo = E - (col + 1) * res;
  // Liang-Barsky interval intersection with the closed box
  double t0 = 0.0, t1 = 1.0;
  const double d[2] = {b.x - a.x, b.y - a.y};
  const double lo[2] = {f_lo, l_lo}, hi[2] = {f_hi, l_hi};
  const double s[2] = {a.x, a.y};
  for (int k = 0; k < 2; ++k) {
    if (d[k] == 0.0) {
      if (s[k] < lo[k] || s[k] > hi[k]) return false;
    } else {
      double ta = (lo[k] - s[k]) / d[k], tb = (hi[k] - s[k]) / d[k];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("query_radius: empty map and distance bound") {
  VectorMap empty;
  const VectorMap out = query_radius(empty, {0, 0, 0}, 25.0);
  REQUIRE(out.lanes.empty());
  REQUIRE(out.crosswalks.empty());

  VectorMap m;
  LanePolyline far;
  far.pts = {{100.0, 0.0}, {110.0, 0.0}};  // entirely at distance >= 2r
  m.lanes.push_back(far);
  REQUIRE(query_radius(m, {0, 0, 0}, 25.0).lanes.empty());
  REQUIRE(query_radius(m, {0, 0, 0}, 101.0).lanes.size() == 1);
}

TEST_CASE("query_radius matches brute-force distance filtering") {
  Rng rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    VectorMap m = random_map(rng, 10, 6);
    const Pose pose{rng.uniform(-10, 10), rng.uniform(-10, 10), 0.0};
    const double r = 25.0;
    const VectorMap got = query_radius(m, pose, r);
    // oracle: per-primitive minimum distance computed the long way
    size_t lanes = 0;
    for (const auto& l : m.lanes) {
      double best = 1e18;
      for (size_t i = 0; i + 1 < l.pts.size(); ++i)
        best = std::min(best, point_segment_dist(pose.position(), l.pts[i], l.pts[i + 1]));
      if (best <= r) ++lanes;
    }
    REQUIRE(got.lanes.size() == lanes);
    size_t cws = 0;
    for (const auto& c : m.crosswalks) {
      double best = pip_oracle(pose.position(), c.pts) ? 0.0 : 1e18;
      for (size_t i = 0; i < c.pts.size(); ++i)
        best = std::min(best,
                        point_segment_dist(pose.position(), c.pts[i], c.pts[(i + 1) % c.pts.size()]));
      if (best <= r) ++cws;
    }
    REQUIRE(got.crosswalks.size() == cws);
  }
}

TEST_CASE("rasterize: empty input gives an all-zero grid") {
  VectorMap empty;
  const SemanticGrid g = rasterize(empty, 64, 0.1);
  for (int ch = 0; ch < SemanticGrid::kChannels; ++ch) REQUIRE(g.count(ch) == 0);
}

TEST_CASE("rasterize: the ego origin lands in pixel (size/2, size/2)") {
  VectorMap m;
  Sign s;
  s.pos = {0.0, 0.0};
  s.cls = SignClass::stop;
  m.signs.push_back(s);
  const SemanticGrid g = rasterize(m, 256, 0.1);
  REQUIRE(g.at(SemanticGrid::kSign, 128, 128) == 1);
  REQUIRE(g.count(SemanticGrid::kSign) == 1);
}

TEST_CASE("rasterize: forward points up the image") {
  VectorMap m;
  Sign ahead;
  ahead.pos = {5.0, 0.0};  // 5 m forward
  m.signs.push_back(ahead);
  const SemanticGrid g = rasterize(m, 64, 0.5);
  // row = floor((16 - 5)/0.5) = 22 < 32: above the center row
  REQUIRE(g.at(SemanticGrid::kSign, 22, 32) == 1);
}

TEST_CASE("polygon fill matches the per-pixel point-in-polygon oracle exactly") {
  Rng rng(52);
  for (int trial = 0; trial < 40; ++trial) {
    Polygon poly;
    const int n = rng.uniform_int(3, 8);
    // star-shaped random polygon around a random center
    const Vec2 c{rng.uniform(-4, 4), rng.uniform(-4, 4)};
    std::vector<double> angles;
    for (int k = 0; k < n; ++k) angles.push_back(rng.uniform(0, 2 * M_PI));
    std::sort(angles.begin(), angles.end());
    for (double a : angles)
      poly.pts.push_back({c.x + rng.uniform(1.0, 7.0) * std::cos(a),
                          c.y + rng.uniform(1.0, 7.0) * std::sin(a)});
    VectorMap m;
    m.drivable_area.push_back(poly);
    const int size = 32;
    const double res = 0.5;
    const SemanticGrid g = rasterize(m, size, res);
    const double E = size * res / 2.0;
    for (int row = 0; row < size; ++row)
      for (int col = 0; col < size; ++col) {
        const Vec2 center{E - (row + 0.5) * res, E - (col + 0.5) * res};
        const bool oracle = pip_oracle(center, poly.pts);
        CAPTURE(trial, row, col);
        REQUIRE(static_cast<bool>(g.at(SemanticGrid::kDrivable, row, col)) == oracle);
      }
  }
}

TEST_CASE("supercover lines match the closed-square overlap oracle") {
  Rng rng(53);
  for (int trial = 0; trial < 60; ++trial) {
    const Vec2 a{rng.uniform(-8, 8), rng.uniform(-8, 8)};
    const Vec2 b{rng.uniform(-8, 8), rng.uniform(-8, 8)};
    VectorMap m;
    LanePolyline l;
    l.pts = {a, b};
    m.lanes.push_back(l);
    const int size = 32;
    const double res = 0.5;
    const SemanticGrid g = rasterize(m, size, res);
    for (int row = 0; row < size; ++row)
      for (int col = 0; col < size; ++col) {
        const bool oracle = segment_pixel_oracle(a, b, row, col, size, res);
        CAPTURE(trial, row, col, a.x, a.y, b.x, b.y);
        REQUIRE(static_cast<bool>(g.at(SemanticGrid::kLane, row, col)) == oracle);
      }
  }
}

TEST_CASE("supercover lines cover every densely sampled point with no gaps") {
  Rng rng(54);
  for (int trial = 0; trial < 30; ++trial) {
    const Vec2 a{rng.uniform(-10, 10), rng.uniform(-10, 10)};
    const Vec2 b{rng.uniform(-10, 10), rng.uniform(-10, 10)};
    VectorMap m;
    LanePolyline l;
    l.pts = {a, b};
    m.lanes.push_back(l);
    const int size = 64;
    const double res = 0.4;
    const SemanticGrid g = rasterize(m, size, res);
    const double E = size * res / 2.0;
    const int samples = 400;
    for (int s = 0; s <= samples; ++s) {
      const Vec2 p = a + (b - a) * (static_cast<double>(s) / samples);
      const int row = static_cast<int>(std::floor((E - p.x) / res));
      const int col = static_cast<int>(std::floor((E - p.y) / res));
      if (row < 0 || row >= size || col < 0 || col >= size) continue;
      REQUIRE(g.at(SemanticGrid::kLane, row, col) == 1);
    }
  }
}

TEST_CASE("rasterization is equivariant under rigid motion of world and pose") {
  Rng rng(55);
  for (int trial = 0; trial < 6; ++trial) {
    VectorMap m = random_map(rng, 6, 4);
    const Pose pose{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-M_PI, M_PI)};
    const double angle = rng.uniform(-M_PI, M_PI);
    const Vec2 offset{rng.uniform(-40, 40), rng.uniform(-40, 40)};

    const auto tf = [&](const Vec2& p) { return rotate(p, angle) + offset; };
    VectorMap m2 = m;
    for (auto& l : m2.lanes)
      for (Vec2& p : l.pts) p = tf(p);
    for (auto& c : m2.crosswalks)
      for (Vec2& p : c.pts) p = tf(p);
    for (auto& s : m2.signs) s.pos = tf(s.pos);
    for (auto& d : m2.drivable_area)
      for (Vec2& p : d.pts) p = tf(p);
    const Vec2 p2 = tf(pose.position());
    const Pose pose2{p2.x, p2.y, normalize_angle(pose.yaw + angle)};

    const SemanticGrid g1 = map_crop(m, pose, 25.0, 64, 0.4);
    const SemanticGrid g2 = map_crop(m2, pose2, 25.0, 64, 0.4);
    REQUIRE(g1.cells == g2.cells);
  }
}

TEST_CASE("coarser grids conservatively cover filled polygons") {
  Rng rng(56);
  for (int trial = 0; trial < 10; ++trial) {
    // fat convex polygon: vertices on a circle with radius well above the
    // coarse resolution
    Polygon poly;
    const Vec2 c{rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const double r = rng.uniform(3.0, 6.0);
    const int n = rng.uniform_int(5, 9);
    for (int k = 0; k < n; ++k) {
      const double a = 2 * M_PI * k / n + rng.uniform(0.0, 0.3);
      poly.pts.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
    }
    VectorMap m;
    m.drivable_area.push_back(poly);
    const double fine_res = 0.25;
    const SemanticGrid fine = rasterize(m, 128, fine_res);
    const SemanticGrid coarse = rasterize(m, 64, 2 * fine_res);
    for (int row = 0; row < 64; ++row)
      for (int col = 0; col < 64; ++col) {
        if (!coarse.at(SemanticGrid::kDrivable, row, col)) continue;
        int children = 0;
        for (int dr = 0; dr < 2; ++dr)
          for (int dc = 0; dc < 2; ++dc)
            children += fine.at(SemanticGrid::kDrivable, 2 * row + dr, 2 * col + dc);
        CAPTURE(trial, row, col);
        REQUIRE(children >= 1);
      }
  }
}

TEST_CASE("map validation: minimal map, dedup, and rejections") {
  VectorMap ok;
  LanePolyline l;
  l.pts = {{0, 0}, {1, 0}};
  ok.lanes.push_back(l);
  REQUIRE_NOTHROW(validate_map(ok));

  VectorMap dedup;
  Polygon p;
  p.pts = {{0, 0}, {2, 0}, {2, 2}, {0, 2}, {0, 0}};  // repeated closing vertex
  dedup.crosswalks.push_back(p);
  validate_map(dedup);
  REQUIRE(dedup.crosswalks[0].pts.size() == 4);

  VectorMap bad;
  LanePolyline single;
  single.pts = {{0, 0}};
  bad.lanes.push_back(single);
  REQUIRE_THROWS_AS(validate_map(bad), MapValidationError);

  VectorMap selfx;
  Polygon bow;
  bow.pts = {{0, 0}, {2, 2}, {2, 0}, {0, 2}};
  selfx.drivable_area.push_back(bow);
  REQUIRE_THROWS_AS(validate_map(selfx), MapValidationError);
}

TEST_CASE("rasterize rejects odd sizes and non-positive resolutions") {
  VectorMap m;
  REQUIRE_THROWS_AS(rasterize(m, 63, 0.1), MapValidationError);
  REQUIRE_THROWS_AS(rasterize(m, 64, 0.0), MapValidationError);
}

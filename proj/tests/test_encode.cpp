#include <catch2/catch_amalgamated.hpp>

#include "waydrive/encode.hpp"

using namespace waydrive;

namespace {
RunConfig small_cfg() {
  RunConfig cfg;
  cfg.d_model = 32;
  cfg.frame_size = 64;
  cfg.patch_vision = 8;
  cfg.patch_map = 16;
  cfg.map_window = 12.8;
  cfg.grid_res = 0.1;  // 128 grid -> 8x8 = 64 map tokens
  return cfg;
}
}  // namespace

TEST_CASE("goal prompt: exact template strings") {
  REQUIRE(format_goal_prompt({12.5, -3.0, 45.0}) ==
          "<goal> east=12.5m, north=-3.0m, yaw=45.0\xc2\xb0 </goal>");
  REQUIRE(format_goal_prompt({0.0, 0.0, 0.0}) ==
          "<goal> east=0.0m, north=0.0m, yaw=0.0\xc2\xb0 </goal>");
}

TEST_CASE("goal prompt: round-trip recovers the waypoint within 0.05") {
  Rng rng(61);
  for (int i = 0; i < 50; ++i) {
    const Waypoint wp{rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-180, 180)};
    const auto parsed = parse_goal_prompt(format_goal_prompt(wp));
    REQUIRE(parsed.has_value());
    REQUIRE(std::fabs(parsed->east - wp.east) <= 0.05);
    REQUIRE(std::fabs(parsed->north - wp.north) <= 0.05);
    REQUIRE(std::fabs(parsed->yaw_deg - wp.yaw_deg) <= 0.05);
  }
  REQUIRE_FALSE(parse_goal_prompt("<goal> east=1m </goal>").has_value());
  REQUIRE_FALSE(parse_goal_prompt("east=1.0m, north=2.0m, yaw=3.0").has_value());
}

TEST_CASE("vision tokens: counts and zero-frame content") {
  RunConfig cfg = small_cfg();
  Rng rng(62);
  VisionEncoderParams enc;
  enc.init(rng, cfg);
  REQUIRE(enc.tokens == 64);

  Frame zero(64, 64);
  EvalCtx ctx;
  Tensor2 toks = tokenize_frame(ctx, enc, zero);
  REQUIRE(toks.rows() == 64);
  REQUIRE(toks.cols() == cfg.d_model);
  // zero frame: every token is its positional embedding plus the bias
  for (int i = 0; i < toks.rows(); ++i)
    for (int j = 0; j < toks.cols(); ++j)
      REQUIRE(toks.at(i, j) ==
              Catch::Approx(enc.pos.value.at(i, j) + enc.proj.b.value.at(0, j)).margin(1e-12));
}

TEST_CASE("vision tokens: divisibility violations raise shape errors") {
  RunConfig cfg = small_cfg();
  Rng rng(63);
  VisionEncoderParams enc;
  enc.init(rng, cfg);
  Frame bad(60, 60);
  EvalCtx ctx;
  REQUIRE_THROWS_AS(tokenize_frame(ctx, enc, bad), ShapeError);
}

TEST_CASE("vision tokens: permuting two patches permutes exactly those tokens") {
  RunConfig cfg = small_cfg();
  Rng rng(64);
  VisionEncoderParams enc;
  enc.init(rng, cfg);
  Rng frng(65);
  Frame f(64, 64);
  for (double& v : f.data) v = frng.uniform();
  EvalCtx ctx;
  const Tensor2 before = tokenize_frame(ctx, enc, f);

  // swap the pixel contents of patches 3 and 10 (patch grid is 8x8)
  Frame g = f;
  const int pa = 3, pb = 10, P = 8, gw = 8;
  const auto patch_origin = [&](int p, int& y0, int& x0) {
    y0 = (p / gw) * P;
    x0 = (p % gw) * P;
  };
  int ya, xa, yb, xb;
  patch_origin(pa, ya, xa);
  patch_origin(pb, yb, xb);
  for (int y = 0; y < P; ++y)
    for (int x = 0; x < P; ++x)
      for (int c = 0; c < 3; ++c)
        std::swap(g.at(ya + y, xa + x, c), g.at(yb + y, xb + x, c));
  const Tensor2 after = tokenize_frame(ctx, enc, g);

  for (int i = 0; i < before.rows(); ++i) {
    for (int j = 0; j < before.cols(); ++j) {
      // content term = token minus positional embedding
      const double ca = before.at(i, j) - enc.pos.value.at(i, j);
      if (i == pa) {
        REQUIRE(after.at(i, j) - enc.pos.value.at(i, j) ==
                Catch::Approx(before.at(pb, j) - enc.pos.value.at(pb, j)).margin(1e-12));
      } else if (i == pb) {
        REQUIRE(after.at(i, j) - enc.pos.value.at(i, j) ==
                Catch::Approx(before.at(pa, j) - enc.pos.value.at(pa, j)).margin(1e-12));
      } else {
        REQUIRE(after.at(i, j) - enc.pos.value.at(i, j) == Catch::Approx(ca).margin(1e-12));
      }
    }
  }
}

TEST_CASE("map tokens: counts, zero-grid content, single-pixel locality") {
  RunConfig cfg = small_cfg();
  Rng rng(66);
  MapEncoderParams enc;
  enc.init(rng, cfg);
  REQUIRE(enc.tokens == 64);

  SemanticGrid zero(cfg.grid_size(), cfg.grid_res);
  EvalCtx ctx;
  const Tensor2 toks = encode_map(ctx, enc, zero);
  for (int i = 0; i < toks.rows(); ++i)
    for (int j = 0; j < toks.cols(); ++j)
      REQUIRE(toks.at(i, j) ==
              Catch::Approx(enc.pos.value.at(i, j) + enc.proj.b.value.at(0, j)).margin(1e-12));

  SemanticGrid one(cfg.grid_size(), cfg.grid_res);
  one.set(SemanticGrid::kLane, 20, 35);  // inside patch (1, 2) of the 8x8 token grid
  const Tensor2 toks1 = encode_map(ctx, enc, one);
  int changed = 0;
  for (int i = 0; i < toks.rows(); ++i) {
    bool diff = false;
    for (int j = 0; j < toks.cols(); ++j)
      if (toks.at(i, j) != toks1.at(i, j)) diff = true;
    if (diff) {
      ++changed;
      REQUIRE(i == (20 / 16) * 8 + (35 / 16));
    }
  }
  REQUIRE(changed == 1);
}

TEST_CASE("goal tokens: field separation and continuity") {
  RunConfig cfg = small_cfg();
  Rng rng(67);
  GoalEncoderParams enc;
  enc.init(rng, cfg);
  EvalCtx ctx;

  const Waypoint a{12.5, -3.0, 45.0};
  const Waypoint b{12.5, -3.0, -10.0};  // differs only in yaw
  const Tensor2 ta = encode_goal(ctx, enc, a);
  const Tensor2 tb = encode_goal(ctx, enc, b);
  REQUIRE(ta.rows() == 8);
  REQUIRE(ta.cols() == cfg.d_model);
  for (int i : {0, 1, 2, 3, 4, 7})
    for (int j = 0; j < ta.cols(); ++j) REQUIRE(ta.at(i, j) == tb.at(i, j));
  bool differ = false;
  for (int i : {5, 6})
    for (int j = 0; j < ta.cols(); ++j)
      if (ta.at(i, j) != tb.at(i, j)) differ = true;
  REQUIRE(differ);

  const Waypoint c{12.5 + 5e-10, -3.0 - 5e-10, 45.0 + 5e-10};
  const Tensor2 tc = encode_goal(ctx, enc, c);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < ta.cols(); ++j)
      REQUIRE(std::fabs(ta.at(i, j) - tc.at(i, j)) <= 1e-6);
}

TEST_CASE("fourier features at zero follow the [sin 0, cos 0, ...] pattern") {
  const Tensor2 ff = fourier_features(0.0);
  for (int i = 0; i < 8; ++i) {
    REQUIRE(ff.at(0, 2 * i) == 0.0);
    REQUIRE(ff.at(0, 2 * i + 1) == 1.0);
  }
  // frequencies double per pair
  const Tensor2 f1 = fourier_features(0.25);
  REQUIRE(f1.at(0, 0) == Catch::Approx(std::sin(M_PI / 8.0)));
  REQUIRE(f1.at(0, 2) == Catch::Approx(std::sin(M_PI / 4.0)));
}

TEST_CASE("all encoders share the model dimension") {
  RunConfig cfg = small_cfg();
  Rng rng(68);
  VisionEncoderParams ve;
  ve.init(rng, cfg);
  MapEncoderParams me;
  me.init(rng, cfg);
  GoalEncoderParams ge;
  ge.init(rng, cfg);
  EvalCtx ctx;
  Frame f(64, 64);
  SemanticGrid g(cfg.grid_size(), cfg.grid_res);
  REQUIRE(tokenize_frame(ctx, ve, f).cols() == cfg.d_model);
  REQUIRE(encode_map(ctx, me, g).cols() == cfg.d_model);
  REQUIRE(encode_goal(ctx, ge, {1, 2, 3}).cols() == cfg.d_model);
}

TEST_CASE("conv2 vision encoder variant produces the same token grid") {
  RunConfig cfg = small_cfg();
  cfg.vision_encoder = VisionEncoderKind::conv2;
  Rng rng(69);
  VisionEncoderParams enc;
  enc.init(rng, cfg);
  REQUIRE(enc.tokens == 64);  // 8-pixel receptive field on a 64x64 frame
  Frame f(64, 64);
  Rng frng(70);
  for (double& v : f.data) v = frng.uniform();
  EvalCtx ctx;
  const Tensor2 toks = tokenize_frame(ctx, enc, f);
  REQUIRE(toks.rows() == 64);
  REQUIRE(toks.cols() == cfg.d_model);
  REQUIRE(toks.all_finite());
}

TEST_CASE("relative waypoint matches the ego frame convention") {
  const Pose ego{10.0, 5.0, M_PI / 2.0};  // facing north
  const Pose goal{10.0, 25.0, M_PI};      // 20 m north, facing west
  const Waypoint wp = relative_waypoint(ego, goal);
  REQUIRE(wp.east == Catch::Approx(20.0));          // ahead
  REQUIRE(wp.north == Catch::Approx(0.0).margin(1e-9));
  REQUIRE(wp.yaw_deg == Catch::Approx(90.0));       // goal heading 90 deg to the left
}

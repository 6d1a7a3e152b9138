#include <catch2/catch_amalgamated.hpp>

#include "waydrive/losses.hpp"
#include "waydrive/train.hpp"

using namespace waydrive;

namespace {
RunConfig micro_cfg() {
  RunConfig cfg;
  cfg.seed = 21;
  cfg.d_model = 16;
  cfg.frame_size = 16;
  cfg.patch_vision = 8;   // 4 vision tokens
  cfg.patch_map = 16;
  cfg.map_window = 3.2;
  cfg.grid_res = 0.1;     // 32 grid -> 4 map tokens
  cfg.mixer_layers = 1;
  cfg.mixer_heads = 2;
  cfg.backbone_layers = 2;
  cfg.backbone_frozen = 1;
  cfg.backbone_heads = 2;
  return cfg;
}
}  // namespace

TEST_CASE("action loss: zero at match, exact small case, oracle equality") {
  std::vector<Action> expert = {{0.3, 0.4}};
  REQUIRE(action_loss(expert, expert) == 0.0);

  std::vector<Action> pred = {{0.0, 0.0}};
  REQUIRE(action_loss(pred, expert) == Catch::Approx(0.25));

  Rng rng(22);
  std::vector<Action> a, b;
  for (int i = 0; i < 17; ++i) {
    a.push_back({rng.uniform(-1, 1), rng.uniform(0, 1)});
    b.push_back({rng.uniform(-1, 1), rng.uniform(0, 1)});
  }
  double oracle = 0.0;
  for (int i = 0; i < 17; ++i) {
    oracle += (a[i].steering - b[i].steering) * (a[i].steering - b[i].steering);
    oracle += (a[i].speed - b[i].speed) * (a[i].speed - b[i].speed);
  }
  oracle /= 17.0;
  REQUIRE(action_loss(a, b) == Catch::Approx(oracle).epsilon(1e-12));

  std::vector<Action> shorter = {{0, 0}};
  REQUIRE_THROWS_AS(action_loss(a, shorter), std::invalid_argument);
}

TEST_CASE("smoothness loss: constant, step, and alternating sequences") {
  std::vector<Action> constant(5, Action{0.4, 0.6});
  REQUIRE(smoothness_loss(constant) == 0.0);

  std::vector<Action> step = {{0, 0}, {1, 0}};
  REQUIRE(smoothness_loss(step) == Catch::Approx(1.0));

  const double delta = 0.3;
  std::vector<Action> alt;
  for (int i = 0; i < 9; ++i) alt.push_back({i % 2 == 0 ? delta : -delta, 0.5});
  REQUIRE(smoothness_loss(alt) == Catch::Approx(4.0 * delta * delta));

  std::vector<Action> single = {{0, 0}};
  REQUIRE_THROWS_AS(smoothness_loss(single), std::invalid_argument);
}

TEST_CASE("collision penalty: empty set, rollout hit, soft hinge value") {
  std::vector<Action> acts = {{0.0, 0.8}};
  std::vector<EgoState> states(1);
  states[0].speed = 8.0;
  std::vector<double> times = {0.0};

  REQUIRE(collision_penalty(acts, states, {}, times, CollisionMode::fixed) == 0.0);
  REQUIRE(collision_penalty(acts, states, {}, times, CollisionMode::soft) == 0.0);

  std::vector<Obstacle> wall(1);
  wall[0].rect = {{8.0, 0.0}, 0.5, 2.0, 0.0};  // squarely on the rollout path
  REQUIRE(collision_penalty(acts, states, wall, times, CollisionMode::fixed) == 1.0);

  // stationary vehicle, obstacle at exactly 0.5 m footprint clearance
  std::vector<Action> still = {{0.0, 0.0}};
  std::vector<EgoState> rest(1);
  std::vector<Obstacle> near(1);
  near[0].rect = {{kEgoHalfLen + 0.5 + 0.5, 0.0}, 0.5, 1.0, 0.0};
  const double soft = collision_penalty(still, rest, near, times, CollisionMode::soft);
  REQUIRE(soft == Catch::Approx(0.5).margin(1e-6));
}

TEST_CASE("total loss: weighted sum and breakdown invariant") {
  const LossBreakdown zero = total_loss(0.0, 0.0, 0.0);
  REQUIRE(zero.total == 0.0);
  const LossBreakdown b = total_loss(0.25, 1.0, 0.0);
  REQUIRE(b.total == Catch::Approx(0.35));
  REQUIRE(b.consistent());
  const LossBreakdown c = total_loss(0.1, 0.2, 0.4);
  REQUIRE(c.total == Catch::Approx(0.1 + 0.1 * 0.2 + 0.05 * 0.4));
  REQUIRE(c.consistent());
}

TEST_CASE("chunk loss: tape and value paths agree; dropped terms record zero") {
  RunConfig cfg = micro_cfg();
  PolicyModel m;
  m.init(cfg);
  Rng hr(23);
  for (double& v : m.head2.w.value.raw()) v = 0.3 * hr.normal();

  const Scenario sc = generate_scenario(31, Difficulty::straight);
  const ExpertRollout roll = run_expert(sc, sc.budget_s);
  const Demonstration demo = make_demonstration(sc, roll);
  std::vector<ChunkStep> steps;
  for (int i = 4; i < 6; ++i) {
    ChunkStep cs;
    materialize_step(demo, demo.steps[i], cfg, cs.frame, cs.grid);
    cs.wp = demo.steps[i].wp;
    cs.expert = demo.steps[i].expert;
    cs.state = demo.steps[i].state;
    cs.t = demo.steps[i].t;
    steps.push_back(std::move(cs));
  }

  EvalCtx ec;
  const auto val = chunk_loss(ec, m, steps, demo.obstacles, false, false);
  Tape tape;
  TapeCtx tc{&tape};
  const auto rec = chunk_loss(tc, m, steps, demo.obstacles, false, false);
  REQUIRE(val.breakdown.total == Catch::Approx(rec.breakdown.total).epsilon(1e-12));
  REQUIRE(val.breakdown.consistent());
  REQUIRE(rec.breakdown.consistent());

  const auto no_smooth = chunk_loss(ec, m, steps, demo.obstacles, true, false);
  REQUIRE(no_smooth.breakdown.smooth_term == 0.0);
  REQUIRE(no_smooth.breakdown.consistent());
  const auto no_coll = chunk_loss(ec, m, steps, demo.obstacles, false, true);
  REQUIRE(no_coll.breakdown.coll_term == 0.0);
}

TEST_CASE("chunk loss gradient check passes at 1e-4 with the soft collision term") {
  RunConfig cfg = micro_cfg();
  PolicyModel m;
  m.init(cfg);
  Rng hr(24);
  for (double& v : m.head2.w.value.raw()) v = 0.4 * hr.normal();

  // straight scenario with an added obstacle near the path so the soft
  // clearance term is active and generic
  Scenario sc = generate_scenario(32, Difficulty::straight);
  Obstacle near;
  const Vec2 mid = sc.route[0] + (sc.route[1] - sc.route[0]) * 0.4;
  const Vec2 dir = sc.route[1] - sc.route[0];
  const Vec2 n = Vec2{-dir.y, dir.x} * (1.0 / dir.norm());
  near.rect = {mid + n * 3.4, 0.7, 0.6, 0.37};
  sc.obstacles.push_back(near);

  const ExpertRollout roll = run_expert(sc, sc.budget_s);
  const Demonstration demo = make_demonstration(sc, roll);
  const size_t pick = std::min<size_t>(10, demo.steps.size() - 2);
  std::vector<ChunkStep> steps;
  for (size_t i = pick; i < pick + 2; ++i) {
    ChunkStep cs;
    materialize_step(demo, demo.steps[i], cfg, cs.frame, cs.grid);
    cs.wp = demo.steps[i].wp;
    cs.expert = demo.steps[i].expert;
    cs.state = demo.steps[i].state;
    cs.t = demo.steps[i].t;
    steps.push_back(std::move(cs));
  }

  ScalarFn f = [&](Tape* tape) {
    if (!tape) {
      EvalCtx ctx;
      return chunk_loss(ctx, m, steps, demo.obstacles, false, false).breakdown.total;
    }
    TapeCtx ctx{tape};
    const auto out = chunk_loss(ctx, m, steps, demo.obstacles, false, false);
    tape->backward(out.total);
    return out.breakdown.total;
  };
  GradCheckOptions opt;
  opt.samples_per_param = 2;
  opt.seed = 25;
  REQUIRE(grad_check(f, m.all_params(), opt) < 1e-4);
}

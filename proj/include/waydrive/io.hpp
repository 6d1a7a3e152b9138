#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "waydrive/bench.hpp"

namespace waydrive {

class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// ---- map files -----------------------------------------------------------------
// JSON with top-level lists `lanes`, `crosswalks`, `signs`, `drivable_area`;
// coordinates in decimal meters. Sign classes come from a closed set.
inline const char* sign_class_name(SignClass c) {
  switch (c) {
    case SignClass::speed_limit: return "speed_limit";
    case SignClass::stop: return "stop";
    case SignClass::yield: return "yield";
    default: return "traffic_light";
  }
}

inline SignClass sign_class_from(const std::string& s, const std::string& where) {
  if (s == "speed_limit") return SignClass::speed_limit;
  if (s == "stop") return SignClass::stop;
  if (s == "yield") return SignClass::yield;
  if (s == "traffic_light") return SignClass::traffic_light;
  throw ParseError(where + ": unknown sign class '" + s + "'");
}

inline const char* lane_class_name(LaneBoundary c) {
  switch (c) {
    case LaneBoundary::left: return "left";
    case LaneBoundary::right: return "right";
    default: return "center";
  }
}

inline LaneBoundary lane_class_from(const std::string& s, const std::string& where) {
  if (s == "left") return LaneBoundary::left;
  if (s == "right") return LaneBoundary::right;
  if (s == "center") return LaneBoundary::center;
  throw ParseError(where + ": unknown lane boundary class '" + s + "'");
}

inline nlohmann::json points_to_json(const std::vector<Vec2>& pts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Vec2& p : pts) arr.push_back({p.x, p.y});
  return arr;
}

inline std::vector<Vec2> points_from_json(const nlohmann::json& arr, const std::string& where) {
  if (!arr.is_array()) throw ParseError(where + ": expected an array of points");
  std::vector<Vec2> out;
  for (size_t i = 0; i < arr.size(); ++i) {
    const auto& p = arr[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw ParseError(where + "[" + std::to_string(i) + "]: point must be [x, y]");
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

inline nlohmann::json map_to_json(const VectorMap& m) {
  nlohmann::json j;
  j["format"] = "waydrive-map";
  j["version"] = 1;
  j["lanes"] = nlohmann::json::array();
  for (const auto& l : m.lanes)
    j["lanes"].push_back({{"class", lane_class_name(l.cls)}, {"points", points_to_json(l.pts)}});
  j["crosswalks"] = nlohmann::json::array();
  for (const auto& c : m.crosswalks) j["crosswalks"].push_back({{"points", points_to_json(c.pts)}});
  j["signs"] = nlohmann::json::array();
  for (const auto& s : m.signs)
    j["signs"].push_back({{"pos", {s.pos.x, s.pos.y}},
                          {"class", sign_class_name(s.cls)},
                          {"value", s.value}});
  j["drivable_area"] = nlohmann::json::array();
  for (const auto& d : m.drivable_area)
    j["drivable_area"].push_back({{"points", points_to_json(d.pts)}});
  return j;
}

inline VectorMap map_from_json(const nlohmann::json& j) {
  VectorMap m;
  if (j.value("format", "") != std::string("waydrive-map"))
    throw ParseError("map: missing or wrong \"format\" field (want \"waydrive-map\")");
  for (size_t i = 0; j.contains("lanes") && i < j["lanes"].size(); ++i) {
    const auto& l = j["lanes"][i];
    const std::string where = "lanes[" + std::to_string(i) + "]";
    LanePolyline lp;
    lp.cls = lane_class_from(l.value("class", "center"), where);
    lp.pts = points_from_json(l.at("points"), where);
    m.lanes.push_back(std::move(lp));
  }
  for (size_t i = 0; j.contains("crosswalks") && i < j["crosswalks"].size(); ++i) {
    Polygon p;
    p.pts = points_from_json(j["crosswalks"][i].at("points"),
                             "crosswalks[" + std::to_string(i) + "]");
    m.crosswalks.push_back(std::move(p));
  }
  for (size_t i = 0; j.contains("signs") && i < j["signs"].size(); ++i) {
    const auto& sj = j["signs"][i];
    const std::string where = "signs[" + std::to_string(i) + "]";
    if (!sj.contains("pos") || !sj["pos"].is_array() || sj["pos"].size() != 2)
      throw ParseError(where + ": \"pos\" must be [x, y]");
    Sign s;
    s.pos = {sj["pos"][0].get<double>(), sj["pos"][1].get<double>()};
    s.cls = sign_class_from(sj.value("class", ""), where);
    s.value = sj.value("value", 0.0);
    m.signs.push_back(s);
  }
  for (size_t i = 0; j.contains("drivable_area") && i < j["drivable_area"].size(); ++i) {
    Polygon p;
    p.pts = points_from_json(j["drivable_area"][i].at("points"),
                             "drivable_area[" + std::to_string(i) + "]");
    m.drivable_area.push_back(std::move(p));
  }
  validate_map(m);
  return m;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

inline VectorMap load_map(const std::string& path) { return map_from_json(read_json_file(path)); }
inline void save_map(const std::string& path, const VectorMap& m) {
  write_json_file(path, map_to_json(m));
}

// ---- scenario files ---------------------------------------------------------------
inline nlohmann::json scenario_to_json(const Scenario& sc) {
  nlohmann::json j = map_to_json(sc.map);
  j["format"] = "waydrive-scenario";
  j["id"] = sc.id;
  j["start"] = {{"x", sc.start.x}, {"y", sc.start.y}, {"yaw", sc.start.yaw}};
  j["waypoints"] = nlohmann::json::array();
  for (const Pose& w : sc.waypoints)
    j["waypoints"].push_back({{"x", w.x}, {"y", w.y}, {"yaw", w.yaw}});
  j["obstacles"] = nlohmann::json::array();
  for (const Obstacle& ob : sc.obstacles)
    j["obstacles"].push_back({{"center", {ob.rect.center.x, ob.rect.center.y}},
                              {"half_len", ob.rect.half_len},
                              {"half_wid", ob.rect.half_wid},
                              {"yaw", ob.rect.yaw},
                              {"vel", {ob.vel.x, ob.vel.y}},
                              {"height", ob.height}});
  j["budget_s"] = sc.budget_s;
  j["seed"] = sc.seed;
  j["difficulty"] = difficulty_name(sc.difficulty);
  j["route"] = points_to_json(sc.route);
  j["l_opt"] = sc.l_opt;
  return j;
}

inline Difficulty difficulty_from(const std::string& s) {
  if (s == "straight") return Difficulty::straight;
  if (s == "turn") return Difficulty::turn;
  if (s == "ambiguous_intersection") return Difficulty::ambiguous_intersection;
  throw ParseError("unknown difficulty: " + s);
}

inline Scenario scenario_from_json(nlohmann::json j) {
  Scenario sc;
  if (j.value("format", "") != std::string("waydrive-scenario"))
    throw ParseError("scenario: missing or wrong \"format\" field (want \"waydrive-scenario\")");
  j["format"] = "waydrive-map";
  sc.map = map_from_json(j);
  sc.id = j.value("id", "");
  const auto& st = j.at("start");
  sc.start = {st.at("x").get<double>(), st.at("y").get<double>(), st.at("yaw").get<double>()};
  for (const auto& w : j.at("waypoints"))
    sc.waypoints.push_back(
        {w.at("x").get<double>(), w.at("y").get<double>(), w.at("yaw").get<double>()});
  if (sc.waypoints.empty()) throw ParseError("scenario: needs at least one waypoint");
  for (size_t i = 0; j.contains("obstacles") && i < j["obstacles"].size(); ++i) {
    const auto& o = j["obstacles"][i];
    Obstacle ob;
    ob.rect.center = {o.at("center")[0].get<double>(), o.at("center")[1].get<double>()};
    ob.rect.half_len = o.at("half_len").get<double>();
    ob.rect.half_wid = o.at("half_wid").get<double>();
    ob.rect.yaw = o.value("yaw", 0.0);
    if (o.contains("vel")) ob.vel = {o["vel"][0].get<double>(), o["vel"][1].get<double>()};
    ob.height = o.value("height", 2.2);
    sc.obstacles.push_back(ob);
  }
  sc.budget_s = j.value("budget_s", 30.0);
  sc.seed = j.value("seed", 0ULL);
  sc.difficulty = difficulty_from(j.value("difficulty", "straight"));
  if (j.contains("route")) sc.route = points_from_json(j["route"], "route");
  sc.l_opt = j.value("l_opt", 0.0);
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  return scenario_from_json(read_json_file(path));
}
inline void save_scenario(const std::string& path, const Scenario& sc) {
  write_json_file(path, scenario_to_json(sc));
}

/// Validates a map or scenario file; returns its kind on success.
inline std::string schema_check(const std::string& path) {
  const nlohmann::json j = read_json_file(path);
  const std::string format = j.value("format", "");
  if (format == "waydrive-map") {
    (void)map_from_json(j);
    return "map";
  }
  if (format == "waydrive-scenario") {
    (void)scenario_from_json(j);
    return "scenario";
  }
  throw ParseError(path + ": unknown \"format\" field '" + format + "'");
}

// ---- demonstration dumps -------------------------------------------------------------
// Binary container: magic, version, index header with per-demonstration byte
// offsets, then per-step records binding frame (float32), grid (packed bits),
// waypoint, and expert action.
constexpr char kDemoMagic[8] = {'W', 'D', 'D', 'E', 'M', 'O', '0', '1'};

namespace detail {
template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
inline void put_string(std::ofstream& out, const std::string& s) {
  put<uint32_t>(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string get_string(std::ifstream& in) {
  const uint32_t n = get<uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}
}  // namespace detail

/// Writes demonstrations with observations materialized per step (streamed,
/// so memory stays flat regardless of dump size).
inline void save_demonstrations(const std::string& path, const std::vector<Demonstration>& demos,
                                const RunConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write demo dump: " + path);
  out.write(kDemoMagic, sizeof(kDemoMagic));
  detail::put<uint32_t>(out, static_cast<uint32_t>(demos.size()));
  const std::streampos index_pos = out.tellp();
  for (size_t i = 0; i < demos.size(); ++i) detail::put<uint64_t>(out, 0);  // offsets patched below
  std::vector<uint64_t> offsets;
  for (const Demonstration& d : demos) {
    offsets.push_back(static_cast<uint64_t>(out.tellp()));
    detail::put_string(out, d.scenario_id);
    detail::put<uint64_t>(out, d.scenario_seed);
    detail::put<uint8_t>(out, static_cast<uint8_t>(d.difficulty));
    detail::put<uint32_t>(out, static_cast<uint32_t>(d.obstacles.size()));
    for (const Obstacle& ob : d.obstacles) {
      const double vals[8] = {ob.rect.center.x, ob.rect.center.y, ob.rect.half_len,
                              ob.rect.half_wid, ob.rect.yaw,      ob.vel.x,
                              ob.vel.y,         ob.height};
      out.write(reinterpret_cast<const char*>(vals), sizeof(vals));
    }
    detail::put<uint32_t>(out, static_cast<uint32_t>(d.steps.size()));
    for (const DemoStep& s : d.steps) {
      const double vals[10] = {s.state.pose.x, s.state.pose.y, s.state.pose.yaw, s.state.speed,
                               s.t,            s.wp.east,      s.wp.north,       s.wp.yaw_deg,
                               s.expert.steering, s.expert.speed};
      out.write(reinterpret_cast<const char*>(vals), sizeof(vals));
      Frame frame;
      SemanticGrid grid;
      materialize_step(d, s, cfg, frame, grid);
      detail::put<int32_t>(out, frame.height);
      detail::put<int32_t>(out, frame.width);
      for (double v : frame.data) detail::put<float>(out, static_cast<float>(v));
      detail::put<int32_t>(out, grid.size);
      detail::put<double>(out, grid.resolution);
      const size_t nbits = grid.cells.size();
      std::vector<uint8_t> packed((nbits + 7) / 8, 0);
      for (size_t b = 0; b < nbits; ++b)
        if (grid.cells[b]) packed[b / 8] |= static_cast<uint8_t>(1u << (b % 8));
      out.write(reinterpret_cast<const char*>(packed.data()),
                static_cast<std::streamsize>(packed.size()));
    }
  }
  out.seekp(index_pos);
  for (uint64_t off : offsets) detail::put<uint64_t>(out, off);
  if (!out) throw std::runtime_error("short write to demo dump: " + path);
}

inline std::vector<Demonstration> load_demonstrations(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open demo dump: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kDemoMagic, sizeof(magic)) != 0)
    throw ParseError(path + ": bad demo dump magic");
  const uint32_t count = detail::get<uint32_t>(in);
  std::vector<uint64_t> offsets(count);
  for (uint32_t i = 0; i < count; ++i) offsets[i] = detail::get<uint64_t>(in);
  std::vector<Demonstration> demos;
  demos.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    in.seekg(static_cast<std::streamoff>(offsets[i]));
    Demonstration d;
    d.scenario_id = detail::get_string(in);
    d.scenario_seed = detail::get<uint64_t>(in);
    d.difficulty = static_cast<Difficulty>(detail::get<uint8_t>(in));
    const uint32_t nobs = detail::get<uint32_t>(in);
    for (uint32_t k = 0; k < nobs; ++k) {
      double vals[8];
      in.read(reinterpret_cast<char*>(vals), sizeof(vals));
      Obstacle ob;
      ob.rect = {{vals[0], vals[1]}, vals[2], vals[3], vals[4]};
      ob.vel = {vals[5], vals[6]};
      ob.height = vals[7];
      d.obstacles.push_back(ob);
    }
    const uint32_t nsteps = detail::get<uint32_t>(in);
    for (uint32_t k = 0; k < nsteps; ++k) {
      DemoStep s;
      double vals[10];
      in.read(reinterpret_cast<char*>(vals), sizeof(vals));
      s.state = {{vals[0], vals[1], vals[2]}, vals[3]};
      s.t = vals[4];
      s.wp = {vals[5], vals[6], vals[7]};
      s.expert = {vals[8], vals[9]};
      const int32_t h = detail::get<int32_t>(in);
      const int32_t w = detail::get<int32_t>(in);
      auto frame = std::make_shared<Frame>(h, w);
      for (double& v : frame->data) v = static_cast<double>(detail::get<float>(in));
      const int32_t gsize = detail::get<int32_t>(in);
      const double gres = detail::get<double>(in);
      auto grid = std::make_shared<SemanticGrid>(gsize, gres);
      const size_t nbits = grid->cells.size();
      std::vector<uint8_t> packed((nbits + 7) / 8);
      in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
      for (size_t b = 0; b < nbits; ++b)
        grid->cells[b] = (packed[b / 8] >> (b % 8)) & 1u;
      s.frame = std::move(frame);
      s.grid = std::move(grid);
      d.steps.push_back(std::move(s));
    }
    if (!in) throw ParseError(path + ": truncated demo dump");
    demos.push_back(std::move(d));
  }
  return demos;
}

// ---- episode logs ------------------------------------------------------------------
/// One JSON object per episode, with per-step explanation records when
/// step logging was enabled.
inline nlohmann::json episode_to_json(const EpisodeResult& r, const std::vector<StepLog>* steps) {
  nlohmann::json j;
  j["scenario"] = r.scenario_id;
  j["success"] = r.success;
  j["l_opt"] = r.l_opt;
  j["l_agent"] = r.l_agent;
  j["collided"] = r.collided;
  j["infraction"] = r.infraction;
  j["steps"] = r.steps;
  j["override_count"] = r.override_count;
  if (!r.failure.empty()) j["failure"] = r.failure;
  if (steps) {
    nlohmann::json arr = nlohmann::json::array();
    for (const StepLog& s : *steps) {
      nlohmann::json sj;
      sj["step"] = s.step;
      sj["proposed"] = {s.proposed.steering, s.proposed.speed};
      sj["applied"] = {s.applied.steering, s.applied.speed};
      sj["override"] = s.overridden;
      if (s.explanation.present) {
        sj["prompt"] = s.explanation.prompt;
        nlohmann::json vt = nlohmann::json::array(), mt = nlohmann::json::array();
        for (const auto& [idx, w] : s.explanation.vision_top) vt.push_back({idx, w});
        for (const auto& [idx, w] : s.explanation.map_top) mt.push_back({idx, w});
        sj["vision_top"] = vt;
        sj["map_top"] = mt;
      } else {
        sj["explanation"] = nullptr;
      }
      arr.push_back(std::move(sj));
    }
    j["step_records"] = std::move(arr);
  }
  return j;
}

// ---- raster inspection ----------------------------------------------------------------
/// Channel planes as a portable PGM (for `rasterize` CLI inspection).
inline void write_grid_pgm(const SemanticGrid& g, int channel, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P5\n" << g.size << " " << g.size << "\n255\n";
  for (int r = 0; r < g.size; ++r)
    for (int c = 0; c < g.size; ++c) out.put(g.at(channel, r, c) ? '\xff' : '\0');
}

inline void write_frame_ppm(const Frame& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P6\n" << f.width << " " << f.height << "\n255\n";
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.put(static_cast<char>(std::clamp(f.at(y, x, c), 0.0, 1.0) * 255.0));
}

}  // namespace waydrive

#pragma once

// Scenario file format: UTF-8 JSON, one scenario per file.
//
//   {"id": str, "dt": s, "lane_width": m, "lanes": [[[x,y]...]...],
//    "drivable": [[[x,y]...]...], "history": [[x,y]...],
//    "gt_future": [[x,y]...], "agents": [[[x,y]...]...]}
//
// "drivable", "lane_width" and "gt_future" are optional on input. save_scenario
// writes keys in the order above so that save(load(save(x))) is byte-identical.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadwarp/error.hpp"
#include "roadwarp/scene.hpp"

namespace roadwarp {

using json = nlohmann::ordered_json;

namespace io {

inline json to_json(Point2 p) { return json::array({p.x, p.y}); }

inline json to_json(const std::vector<Point2>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back(to_json(p));
  return arr;
}

inline Point2 point_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ParseError(path + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline std::vector<Point2> points_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path + ": expected array of points");
  std::vector<Point2> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(point_from_json(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<std::vector<Point2>> point_lists_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path + ": expected array of point arrays");
  std::vector<std::vector<Point2>> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(points_from_json(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline double number_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) throw ParseError(std::string("missing numeric field \"") + key + "\"");
  return j[key].get<double>();
}

inline json parse_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

/// Drops a trailing vertex that repeats the first one.
inline std::vector<Point2> open_ring(std::vector<Point2> ring) {
  if (ring.size() > 1 && distance(ring.front(), ring.back()) <= kCoincidentTol) ring.pop_back();
  return ring;
}

}  // namespace io

/// Reads lanes, drivable rings and lane width. Derives the drivable area when
/// the object has none.
inline Scene scene_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("scene: expected JSON object");
  Scene scene;
  if (j.contains("lane_width")) scene.lane_width = io::number_field(j, "lane_width");
  if (!j.contains("lanes")) throw ParseError("missing field \"lanes\"");
  for (auto& pts : io::point_lists_from_json(j["lanes"], "lanes")) scene.lanes.push_back(Polyline{std::move(pts)});
  if (j.contains("drivable") && !j["drivable"].is_null())
    for (auto& ring : io::point_lists_from_json(j["drivable"], "drivable"))
      scene.drivable.push_back(Polygon{io::open_ring(std::move(ring))});
  validate(scene);
  if (scene.drivable.empty() && !scene.lanes.empty()) scene = derive_drivable_area(scene);
  return scene;
}

inline Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("scenario: expected JSON object");
  Scenario scn;
  if (j.contains("id")) {
    if (!j["id"].is_string()) throw ParseError("field \"id\" must be a string");
    scn.id = j["id"].get<std::string>();
  }
  const double dt = io::number_field(j, "dt");
  scn.scene = scene_from_json(j);
  scn.history.dt = dt;
  if (j.contains("history")) scn.history.points = io::points_from_json(j["history"], "history");
  if (j.contains("gt_future") && !j["gt_future"].is_null())
    scn.gt_future = Trajectory{io::points_from_json(j["gt_future"], "gt_future"), dt};
  if (j.contains("agents"))
    for (auto& pts : io::point_lists_from_json(j["agents"], "agents")) scn.agents.push_back(Trajectory{std::move(pts), dt});
  validate(scn);
  return scn;
}

inline json scene_to_json(const Scene& s) {
  json j = json::object();
  j["lane_width"] = s.lane_width;
  json lanes = json::array();
  for (const auto& l : s.lanes) lanes.push_back(io::to_json(l.points));
  j["lanes"] = std::move(lanes);
  json rings = json::array();
  for (const auto& p : s.drivable) rings.push_back(io::to_json(p.ring));
  j["drivable"] = std::move(rings);
  return j;
}

inline json scenario_to_json(const Scenario& scn) {
  json j = json::object();
  j["id"] = scn.id;
  j["dt"] = scn.history.dt;
  const json scene = scene_to_json(scn.scene);
  for (auto& [k, v] : scene.items()) j[k] = v;
  j["history"] = io::to_json(scn.history.points);
  if (scn.gt_future) j["gt_future"] = io::to_json(scn.gt_future->points);
  json agents = json::array();
  for (const auto& a : scn.agents) agents.push_back(io::to_json(a.points));
  j["agents"] = std::move(agents);
  return j;
}

inline Scenario parse_scenario(const std::string& text, const std::string& origin = "scenario") {
  return scenario_from_json(io::parse_text(text, origin));
}

inline std::string dump_scenario(const Scenario& scn) { return scenario_to_json(scn).dump() + "\n"; }

inline Scenario load_scenario(const std::filesystem::path& path) {
  try {
    return parse_scenario(io::read_file(path), path.string());
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void save_scenario(const Scenario& scn, const std::filesystem::path& path) {
  io::write_file(path, dump_scenario(scn));
}

/// Loads a map tile: the scenario schema where only the scene keys are needed.
inline Scene load_scene(const std::filesystem::path& path) {
  try {
    return scene_from_json(io::parse_text(io::read_file(path), path.string()));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

/// Every *.json file of a directory in lexicographic order, or the path itself
/// when it names a file.
inline std::vector<std::filesystem::path> json_files(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(path)) return {path};
  if (!fs::is_directory(path)) throw ParseError("no such file or directory: " + path.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

inline std::vector<Scenario> load_scenarios(const std::filesystem::path& path) {
  std::vector<Scenario> out;
  for (const auto& f : json_files(path)) out.push_back(load_scenario(f));
  return out;
}

}  // namespace roadwarp

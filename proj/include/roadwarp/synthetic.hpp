#pragma once

// Procedural scenarios and map tiles: straight multi-lane roads, single-lane
// arcs with straight approaches, mirror-symmetric straights and random road
// networks for retrieval.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "roadwarp/physics.hpp"
#include "roadwarp/retrieval.hpp"
#include "roadwarp/scene.hpp"

namespace roadwarp::synth {

inline constexpr std::size_t kHistorySteps = 20;
inline constexpr double kStepDt = 0.1;

/// Arc-length parametrised centerline built from straight and circular pieces.
class PathBuilder {
 public:
  PathBuilder(Point2 start, double heading) : pos_(start), heading_(heading) { pts_.push_back(start); }

  PathBuilder& straight(double length, double step = 1.0) {
    const int n = std::max(1, static_cast<int>(std::ceil(length / step)));
    const Point2 dir{std::cos(heading_), std::sin(heading_)};
    const Point2 from = pos_;
    for (int i = 1; i <= n; ++i) pts_.push_back(from + (length * i / n) * dir);
    pos_ = pts_.back();
    return *this;
  }

  /// Circular arc; positive sweep turns left.
  PathBuilder& arc(double radius, double sweep, double step = 1.0) {
    const int n = std::max(2, static_cast<int>(std::ceil(radius * std::abs(sweep) / step)));
    const double side = sweep > 0.0 ? 1.0 : -1.0;
    const Point2 centre = pos_ + radius * Point2{-side * std::sin(heading_), side * std::cos(heading_)};
    const double a0 = heading_ - side * 0.5 * std::numbers::pi;
    for (int i = 1; i <= n; ++i) {
      const double a = a0 + sweep * i / n;
      pts_.push_back(centre + radius * Point2{std::cos(a), std::sin(a)});
    }
    heading_ += sweep;
    pos_ = pts_.back();
    return *this;
  }

  [[nodiscard]] const std::vector<Point2>& points() const { return pts_; }

 private:
  Point2 pos_;
  double heading_;
  std::vector<Point2> pts_;
};

/// Point at arc length s along a polyline (clamped to its ends).
inline Point2 point_at(const std::vector<Point2>& pts, double s) {
  if (s <= 0.0) return pts.front();
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double len = distance(pts[i - 1], pts[i]);
    if (s <= len) return pts[i - 1] + (s / len) * (pts[i] - pts[i - 1]);
    s -= len;
  }
  return pts.back();
}

/// Polyline offset sideways by `d` (left positive), vertex by vertex.
inline std::vector<Point2> offset_polyline(const std::vector<Point2>& pts, double d) {
  std::vector<Point2> out;
  out.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point2 t = pts[std::min(i + 1, pts.size() - 1)] - pts[i == 0 ? 0 : i - 1];
    out.push_back(pts[i] + (d / norm(t)) * Point2{-t.y, t.x});
  }
  return out;
}

/// Ego driving along `lane` at constant speed; its last observed point is at
/// arc length `s_end`. The future continues along the lane.
inline void drive_along(Scenario& scn, const std::vector<Point2>& lane, double s_end, double speed) {
  scn.history = Trajectory{{}, kStepDt};
  for (std::size_t i = 0; i < kHistorySteps; ++i)
    scn.history.points.push_back(
        point_at(lane, s_end - speed * kStepDt * static_cast<double>(kHistorySteps - 1 - i)));
  Trajectory fut{{}, kStepDt};
  for (std::size_t k = 1; k <= 30; ++k) fut.points.push_back(point_at(lane, s_end + speed * kStepDt * static_cast<double>(k)));
  scn.gt_future = fut;
}

struct StraightParams {
  int lanes{1};
  int ego_lane{0};
  double speed{8.0};
  double behind{60.0};
  double ahead{120.0};
  bool with_agent{true};
};

/// Parallel lanes along +x; the ego's last history point is the origin.
inline Scenario straight_scenario(const std::string& id, const StraightParams& p) {
  Scenario scn;
  scn.id = id;
  const double w = kDefaultLaneWidth;
  const double y_ego = 0.0;
  std::vector<Point2> ego_lane;
  for (int l = 0; l < p.lanes; ++l) {
    const double y = y_ego + w * (l - p.ego_lane);
    const auto pts = PathBuilder({-p.behind, y}, 0.0).straight(p.behind + p.ahead, 2.0).points();
    if (l == p.ego_lane) ego_lane = pts;
    scn.scene.lanes.push_back(Polyline{pts});
  }
  drive_along(scn, ego_lane, p.behind, p.speed);
  if (p.with_agent) {
    // a lead vehicle on the ego lane, 25 m ahead, same speed
    Trajectory a{{}, kStepDt};
    for (std::size_t i = 0; i < kHistorySteps; ++i)
      a.points.push_back(point_at(ego_lane, p.behind + 25.0 - p.speed * kStepDt * static_cast<double>(kHistorySteps - 1 - i)));
    if (p.speed > 0.0) scn.agents.push_back(a);
  }
  scn.scene = derive_drivable_area(scn.scene);
  return scn;
}

struct ArcParams {
  double radius{40.0};
  double sweep{std::numbers::pi / 3};  // signed, left positive
  double lead_in{60.0};
  double lead_out{80.0};
  /// Arc length of the ego's last point, measured from the lane start.
  double ego_s{55.0};
  double speed{8.0};
};

inline Scenario arc_scenario(const std::string& id, const ArcParams& p) {
  Scenario scn;
  scn.id = id;
  const auto lane = PathBuilder({-p.lead_in, 0.0}, 0.0).straight(p.lead_in, 2.0).arc(p.radius, p.sweep).straight(p.lead_out, 2.0).points();
  scn.scene.lanes.push_back(Polyline{lane});
  drive_along(scn, lane, p.ego_s, p.speed);
  scn.scene = derive_drivable_area(scn.scene);
  return scn;
}

/// The same scenario placed at a random world pose.
inline Scenario placed(Scenario scn, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-500.0, 500.0);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  const double rot = ang(rng);
  const Point2 t{pos(rng), pos(rng)};
  return transformed(std::move(scn), Pose{t, rot});
}

struct CorpusSpec {
  std::size_t straights{50};
  std::size_t arcs{50};
  std::size_t fast_straights{12};
  std::size_t stationary{4};
};

/// Mixed corpus: multi-lane straights (3-15 m/s), single-lane arcs with
/// feasible speeds, fast straights (18-24 m/s) and a few stationary egos.
/// Every scenario is placed at a random world pose.
inline std::vector<Scenario> scenario_corpus(std::uint64_t seed, const CorpusSpec& spec = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  std::vector<Scenario> out;
  std::size_t counter = 0;
  const auto next_id = [&](const char* kind) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s-%04zu", kind, counter++);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < spec.straights; ++i) {
    StraightParams p;
    p.lanes = 1 + static_cast<int>(rng() % 3);
    p.ego_lane = static_cast<int>(rng() % static_cast<std::uint64_t>(p.lanes));
    p.speed = uni(3.0, 15.0);
    out.push_back(placed(straight_scenario(next_id("straight"), p), rng));
  }
  for (std::size_t i = 0; i < spec.arcs; ++i) {
    ArcParams p;
    p.radius = uni(25.0, 80.0);
    p.sweep = (u01(rng) < 0.5 ? -1.0 : 1.0) * uni(30.0, 90.0) * std::numbers::pi / 180.0;
    p.ego_s = uni(30.0, p.lead_in + 0.5 * p.radius * std::abs(p.sweep));
    p.speed = uni(3.0, 0.9 * max_feasible_speed(p.radius));
    out.push_back(placed(arc_scenario(next_id("arc"), p), rng));
  }
  for (std::size_t i = 0; i < spec.fast_straights; ++i) {
    StraightParams p;
    p.lanes = 1 + static_cast<int>(rng() % 2);
    p.ego_lane = 0;
    p.speed = uni(18.0, 24.0);
    p.behind = 80.0;
    p.ahead = 160.0;
    out.push_back(placed(straight_scenario(next_id("fast"), p), rng));
  }
  for (std::size_t i = 0; i < spec.stationary; ++i) {
    StraightParams p;
    p.lanes = 1 + static_cast<int>(rng() % 2);
    p.speed = 0.0;
    p.with_agent = false;
    out.push_back(placed(straight_scenario(next_id("stopped"), p), rng));
  }
  return out;
}

/// Straights that are symmetric about the ego's line of travel (odd lane
/// count, ego in the middle, no agents), left in the ego's frame.
inline std::vector<Scenario> mirror_corpus(std::uint64_t seed, std::size_t n, double v_lo = 4.0, double v_hi = 9.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> speed(v_lo, v_hi);
  std::vector<Scenario> out;
  for (std::size_t i = 0; i < n; ++i) {
    StraightParams p;
    p.lanes = (rng() % 2 == 0) ? 1 : 3;
    p.ego_lane = p.lanes / 2;
    p.speed = speed(rng);
    p.with_agent = false;
    out.push_back(straight_scenario("mirror-" + std::to_string(i), p));
  }
  return out;
}

/// Random road network in a 200 m x 200 m tile: 2 to 6 roads, each a chain of
/// straight and circular pieces clipped to the tile.
inline Scene random_tile(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  constexpr double kTile = 200.0;
  Scene scene;
  const int roads = 2 + static_cast<int>(rng() % 5);
  for (int r = 0; r < roads; ++r) {
    PathBuilder pb({uni(0.0, kTile), uni(0.0, kTile)}, uni(-std::numbers::pi, std::numbers::pi));
    const int pieces = 2 + static_cast<int>(rng() % 4);
    for (int k = 0; k < pieces; ++k) {
      if (u01(rng) < 0.5) pb.straight(uni(15.0, 80.0), 2.0);
      else pb.arc(uni(12.0, 150.0), (u01(rng) < 0.5 ? -1.0 : 1.0) * uni(0.3, 2.0));
    }
    std::vector<Point2> clipped;
    for (const auto& p : pb.points()) {
      if (p.x < 0.0 || p.x > kTile || p.y < 0.0 || p.y > kTile) break;
      clipped.push_back(p);
    }
    if (clipped.size() >= 3) scene.lanes.push_back(Polyline{std::move(clipped)});
  }
  if (scene.lanes.empty())
    scene.lanes.push_back(Polyline{PathBuilder({20.0, 100.0}, 0.0).straight(160.0, 2.0).points()});
  return scene;
}

/// Map tiles for the retrieval index (lanes only; the descriptor ignores the
/// drivable area).
inline std::vector<CorpusEntry> tile_corpus(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::vector<CorpusEntry> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "tile-%05zu", i);
    out.push_back({buf, random_tile(rng), "synthetic"});
  }
  return out;
}

}  // namespace roadwarp::synth

#pragma once

// Scenes, trajectories and scenarios plus the rigid normalization frame.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "roadwarp/error.hpp"
#include "roadwarp/geometry.hpp"

namespace roadwarp {

inline constexpr double kDefaultLaneWidth = 3.5;
/// Maximum edge length of drivable rings after derivation (meters).
inline constexpr double kRingDensifySpacing = 0.5;

/// Ordered lane centerline; at least two points, no coincident neighbours.
struct Polyline {
  std::vector<Point2> points;
  friend bool operator==(const Polyline&, const Polyline&) = default;
};

/// Simple polygon stored as an implicitly closed ring (first point not repeated).
struct Polygon {
  std::vector<Point2> ring;
  friend bool operator==(const Polygon&, const Polygon&) = default;
};

struct Scene {
  std::vector<Polyline> lanes;
  /// Drivable region is the union of these polygons.
  std::vector<Polygon> drivable;
  double lane_width{kDefaultLaneWidth};
  friend bool operator==(const Scene&, const Scene&) = default;
};

struct Trajectory {
  std::vector<Point2> points;
  double dt{0.1};
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct Scenario {
  std::string id;
  Scene scene;
  Trajectory history;
  std::optional<Trajectory> gt_future;
  std::vector<Trajectory> agents;
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// ---------------------------------------------------------------------------
// Validation

inline void validate_points(const std::vector<Point2>& pts, const std::string& path) {
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (!is_finite(pts[i])) throw InvariantError(path + "[" + std::to_string(i) + "] not finite");
}

inline void validate(const Polyline& p, const std::string& path) {
  if (p.points.size() < 2) throw InvariantError(path + " has fewer than 2 points");
  validate_points(p.points, path);
  for (std::size_t i = 1; i < p.points.size(); ++i)
    if (distance(p.points[i - 1], p.points[i]) <= kCoincidentTol)
      throw InvariantError(path + "[" + std::to_string(i) + "] coincides with previous point");
}

inline void validate(const Polygon& poly, const std::string& path) {
  if (poly.ring.size() < 3) throw InvariantError(path + " ring has fewer than 3 points");
  validate_points(poly.ring, path);
  if (ring_self_intersects(poly.ring)) throw InvariantError(path + " ring self-intersects");
}

inline void validate(const Scene& s, const std::string& path = "scene") {
  if (!(s.lane_width > 0.0) || !std::isfinite(s.lane_width))
    throw InvariantError(path + ".lane_width must be positive");
  for (std::size_t i = 0; i < s.lanes.size(); ++i)
    validate(s.lanes[i], path + ".lanes[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < s.drivable.size(); ++i)
    validate(s.drivable[i], path + ".drivable[" + std::to_string(i) + "]");
}

inline void validate(const Scenario& scn) {
  validate(scn.scene, "scene");
  if (scn.history.points.empty()) throw InvariantError("history empty");
  if (!(scn.history.dt > 0.0)) throw InvariantError("dt must be positive");
  validate_points(scn.history.points, "history");
  if (scn.gt_future) {
    if (scn.gt_future->dt != scn.history.dt) throw InvariantError("gt_future.dt differs from history.dt");
    validate_points(scn.gt_future->points, "gt_future");
  }
  for (std::size_t i = 0; i < scn.agents.size(); ++i) {
    const auto path = "agents[" + std::to_string(i) + "]";
    if (scn.agents[i].dt != scn.history.dt) throw InvariantError(path + ".dt differs from history.dt");
    validate_points(scn.agents[i].points, path);
  }
}

// ---------------------------------------------------------------------------
// Rigid motions

/// Applies `fn` to every point of the scenario (lanes, rings, trajectories).
template <typename Fn>
void for_each_point(Scenario& scn, Fn&& fn) {
  for (auto& lane : scn.scene.lanes)
    for (auto& p : lane.points) fn(p);
  for (auto& poly : scn.scene.drivable)
    for (auto& p : poly.ring) fn(p);
  for (auto& p : scn.history.points) fn(p);
  if (scn.gt_future)
    for (auto& p : scn.gt_future->points) fn(p);
  for (auto& a : scn.agents)
    for (auto& p : a.points) fn(p);
}

inline Scenario transformed(Scenario scn, const Pose& pose) {
  for_each_point(scn, [&](Point2& p) { p = pose.apply(p); });
  return scn;
}

inline Trajectory transformed(Trajectory t, const Pose& pose) {
  for (auto& p : t.points) p = pose.apply(p);
  return t;
}

/// Pose of the normalized frame expressed in world coordinates: origin at the
/// last history point, +x along the last non-degenerate history segment.
/// Returns nullopt when every history point coincides.
inline std::optional<Pose> history_frame(const Trajectory& history) {
  const auto& h = history.points;
  if (h.empty()) return std::nullopt;
  const Point2 last = h.back();
  for (std::size_t i = h.size() - 1; i-- > 0;) {
    if (distance(h[i], last) > kCoincidentTol) {
      const Point2 d = last - h[i];
      return Pose{last, wrap_angle(std::atan2(d.y, d.x))};
    }
  }
  return std::nullopt;
}

/// Maps the scenario into the frame of its history. The returned pose maps
/// normalized coordinates back to world coordinates.
inline std::pair<Scenario, Pose> normalize(const Scenario& scn) {
  const auto frame = history_frame(scn.history);
  if (!frame) throw InvariantError("history heading degenerate: all points coincide");
  return {transformed(scn, frame->inverse()), *frame};
}

inline Scenario denormalize(const Scenario& scn, const Pose& pose) {
  if (pose.is_identity()) return scn;
  return transformed(scn, pose);
}

// ---------------------------------------------------------------------------
// Polylines and drivable area

/// Subdivides each segment into equal pieces no longer than `spacing`;
/// original vertices and endpoints are preserved.
inline Polyline resample_polyline(const Polyline& p, double spacing) {
  if (!(spacing > 0.0)) throw InvariantError("resample spacing must be positive");
  return Polyline{densify(p.points, spacing)};
}

namespace detail {

inline Point2 left_normal(Point2 d) {
  const double len = norm(d);
  return {-d.y / len, d.x / len};
}

/// Offset ring of a centerline with squared caps (extended by half_width).
inline std::vector<Point2> corridor_ring(const std::vector<Point2>& pts, double half_width) {
  const std::size_t n = pts.size();
  std::vector<Point2> left(n), right(n);
  for (std::size_t i = 0; i < n; ++i) {
    Point2 offset;
    if (i == 0 || i == n - 1) {
      const Point2 d = i == 0 ? pts[1] - pts[0] : pts[n - 1] - pts[n - 2];
      offset = half_width * left_normal(d);
    } else {
      const Point2 n0 = left_normal(pts[i] - pts[i - 1]);
      const Point2 n1 = left_normal(pts[i + 1] - pts[i]);
      Point2 bis = n0 + n1;
      const double bl = norm(bis);
      if (bl < 1e-6) {
        offset = half_width * n0;  // reversal; degenerate, caught by the self-intersection check
      } else {
        bis = (1.0 / bl) * bis;
        const double cos_half = std::max(dot(bis, n0), 0.25);
        offset = (half_width / cos_half) * bis;
      }
    }
    left[i] = pts[i] + offset;
    right[i] = pts[i] - offset;
  }
  const Point2 t0 = (1.0 / distance(pts[0], pts[1])) * (pts[1] - pts[0]);
  const Point2 t1 = (1.0 / distance(pts[n - 2], pts[n - 1])) * (pts[n - 1] - pts[n - 2]);
  left.front() = left.front() - half_width * t0;
  right.front() = right.front() - half_width * t0;
  left.back() = left.back() + half_width * t1;
  right.back() = right.back() + half_width * t1;

  std::vector<Point2> ring;
  ring.reserve(2 * n);
  // counter-clockwise: right side forward, left side backward
  for (std::size_t i = 0; i < n; ++i) ring.push_back(right[i]);
  for (std::size_t i = n; i-- > 0;) ring.push_back(left[i]);
  return ring;
}

inline std::vector<Point2> segment_rectangle(Point2 a, Point2 b, double half_width) {
  const Point2 t = (1.0 / distance(a, b)) * (b - a);
  const Point2 nrm{-t.y, t.x};
  const Point2 a2 = a - half_width * t;
  const Point2 b2 = b + half_width * t;
  return {a2 - half_width * nrm, b2 - half_width * nrm, b2 + half_width * nrm, a2 + half_width * nrm};
}

}  // namespace detail

/// Buffers each lane centerline by lane_width / 2 (squared caps) when the scene
/// has no explicit drivable polygons. A lane whose offset ring would fold over
/// itself falls back to one rectangle per segment.
inline Scene derive_drivable_area(const Scene& scene) {
  if (!scene.drivable.empty()) return scene;
  if (scene.lanes.empty()) throw InvariantError("scene.lanes empty: cannot derive drivable area");
  Scene out = scene;
  const double half = 0.5 * scene.lane_width;
  for (const auto& lane : scene.lanes) {
    auto ring = densify(detail::corridor_ring(lane.points, half), kRingDensifySpacing, true);
    if (!ring_self_intersects(ring)) {
      out.drivable.push_back(Polygon{std::move(ring)});
      continue;
    }
    for (std::size_t i = 1; i < lane.points.size(); ++i) {
      auto rect = detail::segment_rectangle(lane.points[i - 1], lane.points[i], half);
      out.drivable.push_back(Polygon{densify(rect, kRingDensifySpacing, true)});
    }
  }
  return out;
}

}  // namespace roadwarp

#pragma once

// Feasibility: the tightest road radius bounds the speed at sqrt(mu g R), and
// histories faster than that are slowed down.

#include <algorithm>
#include <cmath>
#include <limits>

#include "roadwarp/error.hpp"
#include "roadwarp/scene.hpp"

namespace roadwarp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
/// Arc-length spacing used when estimating road curvature (meters).
inline constexpr double kCurvatureSpacing = 1.0;

struct PhysicsConfig {
  double mu{0.7};
  double gravity{9.81};
};

inline void validate(const PhysicsConfig& cfg) {
  if (!(cfg.mu > 0.0) || !(cfg.gravity > 0.0)) throw InvariantError("physics: mu and gravity must be positive");
}

/// Radius of the circle through three points; +inf when collinear.
inline double circumradius(Point2 p1, Point2 p2, Point2 p3) {
  const double a = distance(p2, p3);
  const double b = distance(p1, p3);
  const double c = distance(p1, p2);
  if (a <= kCoincidentTol || b <= kCoincidentTol || c <= kCoincidentTol)
    throw InvariantError("circumradius: duplicate points");
  const double twice_area = std::abs(cross(p2 - p1, p3 - p1));
  if (twice_area == 0.0) return kInf;
  return a * b * c / (2.0 * twice_area);
}

/// Smallest circumradius over consecutive triples of every lane resampled at
/// uniform arc-length `spacing`.
inline double min_radius(const Scene& scene, double spacing = kCurvatureSpacing) {
  if (scene.lanes.empty()) throw InvariantError("min_radius: scene has no lanes");
  double best = kInf;
  for (const auto& lane : scene.lanes) {
    const auto pts = uniform_resample(lane.points, spacing);
    for (std::size_t i = 2; i < pts.size(); ++i)
      best = std::min(best, circumradius(pts[i - 2], pts[i - 1], pts[i]));
  }
  return best;
}

inline double max_feasible_speed(double radius, const PhysicsConfig& cfg = {}) {
  if (!(radius > 0.0)) throw InvariantError("max_feasible_speed: radius must be positive");
  if (std::isinf(radius)) return kInf;
  return std::sqrt(cfg.mu * cfg.gravity * radius);
}

/// Largest per-step displacement divided by dt; 0 for a single point.
inline double max_step_speed(const Trajectory& t) {
  double v = 0.0;
  for (std::size_t i = 1; i < t.points.size(); ++i) v = std::max(v, distance(t.points[i - 1], t.points[i]));
  return v / t.dt;
}

/// Scales every displacement increment by `lambda`, keeping the final point fixed.
inline Trajectory slow_down(const Trajectory& t, double lambda) {
  Trajectory out = t;
  if (t.points.empty()) return out;
  const Point2 anchor = t.points.back();
  for (std::size_t i = 0; i + 1 < t.points.size(); ++i)
    out.points[i] = anchor - lambda * (anchor - t.points[i]);
  return out;
}

/// Relative slack before a history counts as too fast. Keeps the operation
/// idempotent under rounding.
inline constexpr double kSpeedSlack = 1e-9;

/// Slows the history (and, by the same factor, every agent) down to the
/// maximum feasible speed of the scene.
inline Scenario enforce_feasibility(const Scenario& scn, const PhysicsConfig& cfg = {},
                                    double spacing = kCurvatureSpacing) {
  validate(cfg);
  const double v_obs = max_step_speed(scn.history);
  if (v_obs == 0.0) return scn;
  const double v_max = max_feasible_speed(min_radius(scn.scene, spacing), cfg);
  if (v_obs <= v_max * (1.0 + kSpeedSlack)) return scn;
  const double lambda = v_max / v_obs;
  Scenario out = scn;
  out.history = slow_down(scn.history, lambda);
  for (auto& a : out.agents) a = slow_down(a, lambda);
  return out;
}

}  // namespace roadwarp

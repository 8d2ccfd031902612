#pragma once

// Planar primitives shared by every module: points, rigid poses, segment
// predicates, point-in-ring membership and polyline resampling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <unordered_map>
#include <vector>

namespace roadwarp {

/// Two points closer than this are considered coincident (meters).
inline constexpr double kCoincidentTol = 1e-9;

struct Point2 {
  double x{0.0};
  double y{0.0};

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
inline Point2 operator*(Point2 p, double s) { return {s * p.x, s * p.y}; }

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(b - a); }
inline bool is_finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::remainder(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  return a;
}

/// Rigid motion p -> R(rotation) p + translation.
struct Pose {
  Point2 translation{};
  double rotation{0.0};

  [[nodiscard]] Point2 apply(Point2 p) const {
    const double c = std::cos(rotation);
    const double s = std::sin(rotation);
    return {c * p.x - s * p.y + translation.x, s * p.x + c * p.y + translation.y};
  }

  [[nodiscard]] Pose inverse() const {
    const double c = std::cos(rotation);
    const double s = std::sin(rotation);
    // R^T (p - t)
    return {{-(c * translation.x + s * translation.y), s * translation.x - c * translation.y},
            wrap_angle(-rotation)};
  }

  [[nodiscard]] bool is_identity() const {
    return translation.x == 0.0 && translation.y == 0.0 && rotation == 0.0;
  }
};

struct BoundingBox {
  double min_x{std::numeric_limits<double>::infinity()};
  double min_y{std::numeric_limits<double>::infinity()};
  double max_x{-std::numeric_limits<double>::infinity()};
  double max_y{-std::numeric_limits<double>::infinity()};

  void extend(Point2 p) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
  void extend(std::span<const Point2> pts) {
    for (const auto& p : pts) extend(p);
  }
  [[nodiscard]] bool empty() const { return min_x > max_x; }
  [[nodiscard]] bool contains(Point2 p, double pad = 0.0) const {
    return p.x >= min_x - pad && p.x <= max_x + pad && p.y >= min_y - pad && p.y <= max_y + pad;
  }
  [[nodiscard]] double width() const { return max_x - min_x; }
  [[nodiscard]] double height() const { return max_y - min_y; }
};

inline BoundingBox bounding_box(std::span<const Point2> pts) {
  BoundingBox b;
  b.extend(pts);
  return b;
}

/// Distance from p to the closed segment [a, b].
inline double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + t * ab);
}

namespace detail {

/// Sign of the turn a -> b -> c; cross products within round-off of zero
/// (relative to the operand lengths) count as collinear.
inline int orientation_sign(Point2 a, Point2 b, Point2 c) {
  const Point2 u = b - a, w = c - a;
  const double v = cross(u, w);
  const double tol = 1e-12 * norm(u) * norm(w);
  return (v > tol) - (v < -tol);
}

inline bool on_segment_collinear(Point2 a, Point2 b, Point2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

}  // namespace detail

/// True if closed segments [a, b] and [c, d] share at least one point.
inline bool segments_intersect(Point2 a, Point2 b, Point2 c, Point2 d) {
  using detail::on_segment_collinear;
  using detail::orientation_sign;
  const int o1 = orientation_sign(a, b, c);
  const int o2 = orientation_sign(a, b, d);
  const int o3 = orientation_sign(c, d, a);
  const int o4 = orientation_sign(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment_collinear(a, b, c)) return true;
  if (o2 == 0 && on_segment_collinear(a, b, d)) return true;
  if (o3 == 0 && on_segment_collinear(c, d, a)) return true;
  if (o4 == 0 && on_segment_collinear(c, d, b)) return true;
  return false;
}

/// Membership of p in the simple polygon bounded by `ring` (implicitly closed).
/// Points within `boundary_tol` of an edge count as inside.
inline bool point_in_ring(Point2 p, std::span<const Point2> ring, double boundary_tol = kCoincidentTol) {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = ring[j];
    const Point2 b = ring[i];
    if (point_segment_distance(p, a, b) <= boundary_tol) return true;
    if ((b.y > p.y) != (a.y > p.y)) {
      const double x_cross = b.x + (p.y - b.y) * (a.x - b.x) / (a.y - b.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

/// Absolute twice-area of the ring via the shoelace formula (signed: CCW > 0).
inline double signed_area(std::span<const Point2> ring) {
  double acc = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) acc += cross(ring[j], ring[i]);
  return 0.5 * acc;
}

/// Detects any intersection between non-adjacent edges of a closed ring.
/// Edges are bucketed on a uniform grid so typical rings cost O(n).
inline bool ring_self_intersects(std::span<const Point2> ring) {
  const std::size_t n = ring.size();
  if (n < 4) return false;
  const BoundingBox box = bounding_box(ring);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += distance(ring[i], ring[(i + 1) % n]);
  const double extent = std::max(box.width(), box.height());
  double cell = std::max(2.0 * total / static_cast<double>(n), extent / 4096.0);
  if (!(cell > 0.0)) return true;  // all vertices coincide

  const auto key = [](long long cx, long long cy) { return (cx << 32) ^ (cy & 0xffffffffLL); };
  std::unordered_map<long long, std::vector<std::size_t>> grid;
  grid.reserve(n * 2);
  const auto cell_of = [&](double v, double origin) {
    return static_cast<long long>(std::floor((v - origin) / cell));
  };
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = ring[i];
    const Point2 b = ring[(i + 1) % n];
    const long long x0 = cell_of(std::min(a.x, b.x), box.min_x);
    const long long x1 = cell_of(std::max(a.x, b.x), box.min_x);
    const long long y0 = cell_of(std::min(a.y, b.y), box.min_y);
    const long long y1 = cell_of(std::max(a.y, b.y), box.min_y);
    for (long long cx = x0; cx <= x1; ++cx)
      for (long long cy = y0; cy <= y1; ++cy) grid[key(cx, cy)].push_back(i);
  }
  for (const auto& [k, edges] : grid) {
    for (std::size_t u = 0; u < edges.size(); ++u) {
      for (std::size_t v = u + 1; v < edges.size(); ++v) {
        const std::size_t i = std::min(edges[u], edges[v]);
        const std::size_t j = std::max(edges[u], edges[v]);
        if (j == i + 1 || (i == 0 && j == n - 1)) continue;
        if (segments_intersect(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n])) return true;
      }
    }
  }
  return false;
}

/// Total arc length of an open polyline.
inline double arc_length(std::span<const Point2> pts) {
  double acc = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) acc += distance(pts[i - 1], pts[i]);
  return acc;
}

/// Subdivides every segment longer than `max_edge` into equal pieces. Original
/// vertices are kept, so the point set describes exactly the same curve.
inline std::vector<Point2> densify(std::span<const Point2> pts, double max_edge, bool closed = false) {
  std::vector<Point2> out;
  if (pts.empty()) return out;
  out.reserve(pts.size());
  const std::size_t n = pts.size();
  const std::size_t edges = closed ? n : n - 1;
  for (std::size_t i = 0; i < edges; ++i) {
    const Point2 a = pts[i];
    const Point2 b = pts[(i + 1) % n];
    out.push_back(a);
    const double len = distance(a, b);
    const auto pieces = static_cast<std::size_t>(std::ceil(len / max_edge - 1e-12));
    for (std::size_t k = 1; k < pieces; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(pieces);
      out.push_back(a + t * (b - a));
    }
  }
  if (!closed) out.push_back(pts[n - 1]);
  return out;
}

/// Samples an open polyline at uniform arc-length steps of `spacing`; the last
/// vertex is always included. Corners between samples are cut, which is what
/// curvature and histogram estimators want.
inline std::vector<Point2> uniform_resample(std::span<const Point2> pts, double spacing) {
  std::vector<Point2> out;
  if (pts.empty()) return out;
  out.push_back(pts.front());
  double carried = 0.0;  // arc length walked since the last emitted sample
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Point2 a = pts[i - 1];
    const Point2 b = pts[i];
    const double len = distance(a, b);
    if (len == 0.0) continue;
    double s = spacing - carried;
    while (s <= len + 1e-12) {
      out.push_back(a + (std::min(s, len) / len) * (b - a));
      s += spacing;
    }
    carried = len - (s - spacing);
  }
  if (distance(out.back(), pts.back()) > kCoincidentTol) {
    if (distance(out.back(), pts.back()) < 0.5 * spacing && out.size() > 1) out.back() = pts.back();
    else out.push_back(pts.back());
  }
  return out;
}

}  // namespace roadwarp

#pragma once

// Atomic scene-generation functions. Every point s of a normalized scenario is
// mapped to (s.x, s.y + f(s.x - border)) where f vanishes for negative
// arguments, so only the road ahead of the ego is bent.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "roadwarp/error.hpp"
#include "roadwarp/scenario_io.hpp"
#include "roadwarp/scene.hpp"

namespace roadwarp {

inline constexpr double kDefaultBorder = 5.0;
/// Scale applied to the curvature coefficient when reporting transformation power.
inline constexpr double kPowerScale = 3000.0;

/// Single turn: q(u) = curvature * u^exponent on [0, length], then continued
/// along its tangent.
struct SmoothTurnParams {
  double length{10.0};     // alpha1, meters
  double curvature{0.0};   // alpha2; sign selects the turn direction
  double exponent{3.0};    // alpha3 > 1
  friend bool operator==(const SmoothTurnParams&, const SmoothTurnParams&) = default;
};

/// Two opposite turns `gap` meters apart: f(u) = st(u) - st(u - gap).
struct DoubleTurnParams {
  SmoothTurnParams turn;   // beta1
  double gap{10.0};        // beta2, meters
  friend bool operator==(const DoubleTurnParams&, const DoubleTurnParams&) = default;
};

/// Ripple road: amplitude * (1 - cos(2 pi frequency u)).
struct RippleParams {
  double amplitude{0.0};   // gamma1, meters
  double frequency{0.01};  // gamma2, 1/meters
  friend bool operator==(const RippleParams&, const RippleParams&) = default;
};

enum class Family : std::uint8_t { smooth_turn, double_turn, ripple_road };

inline constexpr std::string_view family_name(Family f) {
  switch (f) {
    case Family::smooth_turn: return "smooth_turn";
    case Family::double_turn: return "double_turn";
    case Family::ripple_road: return "ripple_road";
  }
  return "?";
}

inline Family parse_family(std::string_view name) {
  if (name == "smooth_turn" || name == "smooth") return Family::smooth_turn;
  if (name == "double_turn" || name == "double") return Family::double_turn;
  if (name == "ripple_road" || name == "ripple") return Family::ripple_road;
  throw ParseError("unknown transform family: " + std::string(name));
}

struct TransformSpec {
  std::variant<SmoothTurnParams, DoubleTurnParams, RippleParams> params;
  double border{kDefaultBorder};

  [[nodiscard]] Family family() const { return static_cast<Family>(params.index()); }
  friend bool operator==(const TransformSpec&, const TransformSpec&) = default;
};

inline void validate(const SmoothTurnParams& p) {
  if (!(p.length > 0.0) || !std::isfinite(p.length)) throw InvariantError("smooth_turn length must be > 0");
  if (!(p.exponent > 1.0) || !std::isfinite(p.exponent)) throw InvariantError("smooth_turn exponent must be > 1");
  if (!std::isfinite(p.curvature)) throw InvariantError("smooth_turn curvature must be finite");
}

inline void validate(const TransformSpec& spec) {
  if (!std::isfinite(spec.border)) throw InvariantError("border must be finite");
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SmoothTurnParams>) {
          validate(p);
        } else if constexpr (std::is_same_v<T, DoubleTurnParams>) {
          validate(p.turn);
          if (!(p.gap > 0.0) || !std::isfinite(p.gap)) throw InvariantError("double_turn gap must be > 0");
        } else {
          if (!std::isfinite(p.amplitude)) throw InvariantError("ripple amplitude must be finite");
          if (!(p.frequency > 0.0) || !std::isfinite(p.frequency)) throw InvariantError("ripple frequency must be > 0");
        }
      },
      spec.params);
}

// ---------------------------------------------------------------------------
// Offset functions, argument already shifted by the border.

inline double smooth_turn_offset(const SmoothTurnParams& p, double u) {
  if (u < 0.0) return 0.0;
  if (u <= p.length) return p.curvature * std::pow(u, p.exponent);
  const double q_end = p.curvature * std::pow(p.length, p.exponent);
  const double slope_end = p.curvature * p.exponent * std::pow(p.length, p.exponent - 1.0);
  return (u - p.length) * slope_end + q_end;
}

inline double double_turn_offset(const DoubleTurnParams& p, double u) {
  return smooth_turn_offset(p.turn, u) - smooth_turn_offset(p.turn, u - p.gap);
}

inline double ripple_offset(const RippleParams& p, double u) {
  if (u < 0.0) return 0.0;
  return p.amplitude * (1.0 - std::cos(2.0 * std::numbers::pi * p.frequency * u));
}

/// Lateral displacement applied at longitudinal coordinate x: f(x - border).
inline double eval_offset(const TransformSpec& spec, double x) {
  const double u = x - spec.border;
  return std::visit(
      [u](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SmoothTurnParams>) return smooth_turn_offset(p, u);
        else if constexpr (std::is_same_v<T, DoubleTurnParams>) return double_turn_offset(p, u);
        else return ripple_offset(p, u);
      },
      spec.params);
}

/// Magnitude of the curvature knob: |alpha2|*3000, |beta12|*3000 or |gamma1|.
inline double power_of(const TransformSpec& spec) {
  return std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SmoothTurnParams>) return std::abs(p.curvature) * kPowerScale;
        else if constexpr (std::is_same_v<T, DoubleTurnParams>) return std::abs(p.turn.curvature) * kPowerScale;
        else return std::abs(p.amplitude);
      },
      spec.params);
}

/// True when f is identically zero.
inline bool is_identity(const TransformSpec& spec) { return power_of(spec) == 0.0; }

/// Copy of `spec` with the curvature knob negated (mirror image across the x axis).
inline TransformSpec mirrored(TransformSpec spec) {
  std::visit(
      [](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SmoothTurnParams>) p.curvature = -p.curvature;
        else if constexpr (std::is_same_v<T, DoubleTurnParams>) p.turn.curvature = -p.turn.curvature;
        else p.amplitude = -p.amplitude;
      },
      spec.params);
  return spec;
}

// ---------------------------------------------------------------------------
// Vector warp

namespace detail {

/// Subdivides only the segments reaching past the border, leaving content
/// behind the border bit-identical.
inline std::vector<Point2> densify_ahead(const std::vector<Point2>& pts, double border, double max_edge,
                                         bool closed) {
  std::vector<Point2> out;
  const std::size_t n = pts.size();
  if (n == 0) return out;
  out.reserve(n);
  const std::size_t edges = closed ? n : n - 1;
  for (std::size_t i = 0; i < edges; ++i) {
    const Point2 a = pts[i];
    const Point2 b = pts[(i + 1) % n];
    out.push_back(a);
    if (std::max(a.x, b.x) <= border) continue;
    const auto pieces = static_cast<std::size_t>(std::ceil(distance(a, b) / max_edge - 1e-12));
    for (std::size_t k = 1; k < pieces; ++k)
      out.push_back(a + (static_cast<double>(k) / static_cast<double>(pieces)) * (b - a));
  }
  if (!closed) out.push_back(pts[n - 1]);
  return out;
}

inline void shear(std::vector<Point2>& pts, const TransformSpec& spec) {
  for (auto& p : pts) p.y += eval_offset(spec, p.x);
}

}  // namespace detail

/// Bends a normalized scenario. Lanes and drivable rings are first densified to
/// 0.5 m ahead of the border; trajectories keep their time samples.
/// Throws DegenerateWarp when a drivable ring ends up self-intersecting.
inline Scenario warp_scenario(const Scenario& scn, const TransformSpec& spec) {
  validate(spec);
  if (is_identity(spec)) return scn;
  Scenario out = scn;
  for (auto& lane : out.scene.lanes) {
    lane.points = detail::densify_ahead(lane.points, spec.border, kRingDensifySpacing, false);
    detail::shear(lane.points, spec);
  }
  for (auto& poly : out.scene.drivable) {
    poly.ring = detail::densify_ahead(poly.ring, spec.border, kRingDensifySpacing, true);
    detail::shear(poly.ring, spec);
    if (ring_self_intersects(poly.ring)) throw DegenerateWarp();
  }
  detail::shear(out.history.points, spec);
  if (out.gt_future) detail::shear(out.gt_future->points, spec);
  for (auto& a : out.agents) detail::shear(a.points, spec);
  return out;
}

// ---------------------------------------------------------------------------
// Raster warp

struct Rgb {
  std::uint8_t r{0}, g{0}, b{0};
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Row-major RGB image; pixel (col, row) sits at world
/// (origin.x + col * resolution, origin.y + row * resolution).
struct RasterImage {
  int width{0};
  int height{0};
  double resolution{1.0};
  Point2 origin{};
  std::vector<Rgb> pixels;

  RasterImage() = default;
  RasterImage(int w, int h, double res, Point2 org, Rgb fill = {})
      : width(w), height(h), resolution(res), origin(org), pixels(static_cast<std::size_t>(w) * h, fill) {
    if (!(res > 0.0)) throw InvariantError("raster resolution must be positive");
  }

  [[nodiscard]] Rgb& at(int col, int row) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  [[nodiscard]] const Rgb& at(int col, int row) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
  [[nodiscard]] Point2 world(int col, int row) const {
    return {origin.x + col * resolution, origin.y + row * resolution};
  }
  friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

/// Moves every pixel value from (x, y) to (x, y + f(x - b)) using inverse
/// nearest-neighbour lookup; destinations without a source get `background`.
inline RasterImage warp_raster(const RasterImage& img, const TransformSpec& spec, Rgb background = {}) {
  validate(spec);
  RasterImage out(img.width, img.height, img.resolution, img.origin, background);
  for (int col = 0; col < img.width; ++col) {
    const double x = img.origin.x + col * img.resolution;
    const double shift = eval_offset(spec, x);
    for (int row = 0; row < img.height; ++row) {
      const double src_y = img.origin.y + row * img.resolution - shift;
      const double src_row = std::round((src_y - img.origin.y) / img.resolution);
      if (src_row < 0.0 || src_row >= img.height) continue;
      out.at(col, row) = img.at(col, static_cast<int>(src_row));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: {"family": ..., "params": [...], "border": b}

inline json spec_to_json(const TransformSpec& spec) {
  json j = json::object();
  j["family"] = std::string(family_name(spec.family()));
  json params = json::array();
  std::visit(
      [&params](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SmoothTurnParams>) params = {p.length, p.curvature, p.exponent};
        else if constexpr (std::is_same_v<T, DoubleTurnParams>)
          params = {p.turn.length, p.turn.curvature, p.turn.exponent, p.gap};
        else params = {p.amplitude, p.frequency};
      },
      spec.params);
  j["params"] = std::move(params);
  j["border"] = spec.border;
  return j;
}

inline TransformSpec spec_from_json(const json& j) {
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string() || !j.contains("params") ||
      !j["params"].is_array())
    throw ParseError("transform spec: expected {\"family\", \"params\", \"border\"}");
  const Family fam = parse_family(j["family"].get<std::string>());
  std::vector<double> v;
  for (const auto& x : j["params"]) {
    if (!x.is_number()) throw ParseError("transform spec: params must be numbers");
    v.push_back(x.get<double>());
  }
  TransformSpec spec;
  spec.border = j.contains("border") ? io::number_field(j, "border") : kDefaultBorder;
  const auto need = [&](std::size_t n) {
    if (v.size() != n) throw ParseError("transform spec: " + std::string(family_name(fam)) + " takes " + std::to_string(n) + " params");
  };
  switch (fam) {
    case Family::smooth_turn: need(3); spec.params = SmoothTurnParams{v[0], v[1], v[2]}; break;
    case Family::double_turn: need(4); spec.params = DoubleTurnParams{{v[0], v[1], v[2]}, v[3]}; break;
    case Family::ripple_road: need(2); spec.params = RippleParams{v[0], v[1]}; break;
  }
  validate(spec);
  return spec;
}

inline std::string describe(const TransformSpec& spec) { return spec_to_json(spec).dump(); }

}  // namespace roadwarp

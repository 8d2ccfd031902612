#pragma once

// Deterministic SVG output for scenarios, predictions and HOR heatmaps.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "roadwarp/error.hpp"
#include "roadwarp/metrics.hpp"
#include "roadwarp/scenario_io.hpp"
#include "roadwarp/transforms.hpp"

namespace roadwarp {

struct RenderStyle {
  std::string background{"#ffffff"};
  std::string drivable_fill{"#d9d9d9"};
  std::string drivable_stroke{"#a0a0a0"};
  std::string lane{"#7f7f7f"};
  std::string history{"#1f77b4"};
  std::string prediction{"#d62728"};
  std::string ground_truth{"#2ca02c"};
  std::string agent{"#9467bd"};
  double lane_width{0.6};
  double trajectory_width{1.5};
  double padding{5.0};           // meters around the content
  double pixels_per_meter{4.0};
};

inline void validate(const RenderStyle& s) {
  if (!(s.lane_width > 0.0) || !(s.trajectory_width > 0.0)) throw InvariantError("render style: stroke widths must be > 0");
  if (!(s.padding >= 0.0)) throw InvariantError("render style: padding must be >= 0");
  if (!(s.pixels_per_meter > 0.0)) throw InvariantError("render style: pixels_per_meter must be > 0");
}

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s(buf);
  if (s == "-0.000") s = "0.000";
  return s;
}

}  // namespace detail

/// Affine world -> SVG mapping (y flipped so +y points up on screen).
struct Viewport {
  double min_x{0.0};
  double max_y{0.0};
  double scale{1.0};
  double width{0.0};
  double height{0.0};

  [[nodiscard]] Point2 map(Point2 p) const { return {(p.x - min_x) * scale, (max_y - p.y) * scale}; }

  static Viewport fit(const BoundingBox& box, double padding, double scale) {
    Viewport v;
    v.min_x = box.min_x - padding;
    v.max_y = box.max_y + padding;
    v.scale = scale;
    v.width = (box.width() + 2.0 * padding) * scale;
    v.height = (box.height() + 2.0 * padding) * scale;
    return v;
  }
};

inline Viewport scene_viewport(const Scenario& scn, const PredictionSet* preds, const RenderStyle& style) {
  BoundingBox box;
  for (const auto& l : scn.scene.lanes) box.extend(l.points);
  for (const auto& p : scn.scene.drivable) box.extend(p.ring);
  box.extend(scn.history.points);
  if (scn.gt_future) box.extend(scn.gt_future->points);
  for (const auto& a : scn.agents) box.extend(a.points);
  if (preds)
    for (const auto& m : preds->modes) box.extend(m.points);
  return Viewport::fit(box, style.padding, style.pixels_per_meter);
}

inline std::string render_scene(const Scenario& scn, const PredictionSet* preds = nullptr, const RenderStyle& style = {}) {
  validate(style);
  validate(scn);
  const Viewport vp = scene_viewport(scn, preds, style);
  using detail::fmt;
  const auto points_attr = [&](const std::vector<Point2>& pts) {
    std::string s;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Point2 q = vp.map(pts[i]);
      if (i) s += ' ';
      s += fmt(q.x) + "," + fmt(q.y);
    }
    return s;
  };
  const auto polyline = [&](const std::vector<Point2>& pts, const std::string& color, double width,
                            const std::string& cls) {
    return "<polyline class=\"" + cls + "\" points=\"" + points_attr(pts) + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"" + fmt(width) + "\"/>\n";
  };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(vp.width) + "\" height=\"" + fmt(vp.height) +
         "\" viewBox=\"0 0 " + fmt(vp.width) + " " + fmt(vp.height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"" + style.background + "\"/>\n";
  for (const auto& poly : scn.scene.drivable)
    out += "<polygon class=\"drivable\" points=\"" + points_attr(poly.ring) + "\" fill=\"" + style.drivable_fill +
           "\" stroke=\"" + style.drivable_stroke + "\" stroke-width=\"0.500\"/>\n";
  for (const auto& lane : scn.scene.lanes) out += polyline(lane.points, style.lane, style.lane_width, "lane");
  for (const auto& a : scn.agents)
    if (a.points.size() >= 2) out += polyline(a.points, style.agent, style.trajectory_width, "agent");
  if (scn.gt_future && scn.gt_future->points.size() >= 2)
    out += polyline(scn.gt_future->points, style.ground_truth, style.trajectory_width, "ground-truth");
  if (scn.history.points.size() >= 2)
    out += polyline(scn.history.points, style.history, style.trajectory_width, "history");
  const Point2 ego = vp.map(scn.history.points.back());
  out += "<circle class=\"ego\" cx=\"" + fmt(ego.x) + "\" cy=\"" + fmt(ego.y) + "\" r=\"" +
         fmt(2.0 * style.trajectory_width) + "\" fill=\"" + style.history + "\"/>\n";
  if (preds)
    for (const auto& m : preds->modes)
      if (m.points.size() >= 2) out += polyline(m.points, style.prediction, style.trajectory_width, "prediction");
  out += "</svg>\n";
  return out;
}

inline void render_scene_file(const Scenario& scn, const PredictionSet* preds, const RenderStyle& style,
                              const std::filesystem::path& out) {
  io::write_file(out, render_scene(scn, preds, style));
}

/// Linear ramp: 0 -> green, 100 -> red.
inline Rgb heatmap_color(int hor) {
  const double t = std::clamp(hor, 0, 100) / 100.0;
  return {static_cast<std::uint8_t>(std::lround(255.0 * t)), static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - t))), 0};
}

inline std::string hex_color(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

struct HeatmapAxes {
  std::string column_name;
  std::string row_name;
  std::vector<double> columns;
  std::vector<double> rows;
};

inline constexpr double kHeatmapCell = 48.0;
inline constexpr double kHeatmapMargin = 64.0;

inline std::string label_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

/// grid[row][column] of HOR percentages; rows drawn top to bottom.
inline std::string render_heatmap(const std::vector<std::vector<int>>& grid, const HeatmapAxes& axes) {
  if (grid.empty() || grid.front().empty()) throw InvariantError("heatmap: empty grid");
  const std::size_t cols = grid.front().size();
  for (const auto& row : grid)
    if (row.size() != cols) throw InvariantError("heatmap: ragged grid");
  if (axes.columns.size() != cols || axes.rows.size() != grid.size())
    throw InvariantError("heatmap: axis labels do not match the grid shape");
  using detail::fmt;
  const double w = kHeatmapMargin + kHeatmapCell * static_cast<double>(cols) + 8.0;
  const double h = kHeatmapMargin + kHeatmapCell * static_cast<double>(grid.size()) + 8.0;
  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) + "\" viewBox=\"0 0 " +
         fmt(w) + " " + fmt(h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<text x=\"" + fmt(kHeatmapMargin) + "\" y=\"14\">" + axes.column_name + "</text>\n";
  out += "<text x=\"4\" y=\"" + fmt(kHeatmapMargin - 20.0) + "\">" + axes.row_name + "</text>\n";
  for (std::size_t c = 0; c < cols; ++c)
    out += "<text class=\"col-label\" x=\"" + fmt(kHeatmapMargin + kHeatmapCell * (static_cast<double>(c) + 0.5)) +
           "\" y=\"" + fmt(kHeatmapMargin - 6.0) + "\" text-anchor=\"middle\">" + label_value(axes.columns[c]) + "</text>\n";
  for (std::size_t r = 0; r < grid.size(); ++r) {
    const double y = kHeatmapMargin + kHeatmapCell * static_cast<double>(r);
    out += "<text class=\"row-label\" x=\"" + fmt(kHeatmapMargin - 6.0) + "\" y=\"" + fmt(y + 0.5 * kHeatmapCell + 4.0) +
           "\" text-anchor=\"end\">" + label_value(axes.rows[r]) + "</text>\n";
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = kHeatmapMargin + kHeatmapCell * static_cast<double>(c);
      out += "<rect class=\"cell\" x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(kHeatmapCell) +
             "\" height=\"" + fmt(kHeatmapCell) + "\" fill=\"" + hex_color(heatmap_color(grid[r][c])) + "\"/>\n";
      out += "<text x=\"" + fmt(x + 0.5 * kHeatmapCell) + "\" y=\"" + fmt(y + 0.5 * kHeatmapCell + 4.0) +
             "\" text-anchor=\"middle\">" + std::to_string(grid[r][c]) + "</text>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace roadwarp

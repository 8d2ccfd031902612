#pragma once

// Off-road measure, attack loss and dataset-level rates.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "roadwarp/error.hpp"
#include "roadwarp/scene.hpp"

namespace roadwarp {

inline constexpr double kDefaultCollisionRadius = 1.0;

struct PredictionSet {
  std::vector<Trajectory> modes;
  std::optional<std::vector<double>> probabilities;
};

struct EvalRecord {
  std::string scenario_id;
  double offroad_fraction{0.0};
  double loss{1.0};
  double ade{0.0};
  double fde{0.0};
  bool collided{false};
};

struct DatasetReport {
  int sor_percent{0};
  int hor_percent{0};
  double ade_mean{0.0};
  double fde_mean{0.0};
  std::size_t n{0};
  std::size_t errors{0};
};

/// Point membership in the union of the drivable polygons; boundary is on-road.
class DrivableArea {
 public:
  explicit DrivableArea(const Scene& scene) : scene_(&scene) {
    boxes_.reserve(scene.drivable.size());
    for (const auto& p : scene.drivable) boxes_.push_back(bounding_box(p.ring));
  }

  [[nodiscard]] bool contains(Point2 p) const {
    for (std::size_t i = 0; i < boxes_.size(); ++i)
      if (boxes_[i].contains(p, kCoincidentTol) && point_in_ring(p, scene_->drivable[i].ring)) return true;
    return false;
  }

 private:
  const Scene* scene_;
  std::vector<BoundingBox> boxes_;
};

inline double offroad_fraction(const Trajectory& traj, const Scene& scene) {
  if (traj.points.empty()) throw InvariantError("offroad_fraction: empty trajectory");
  if (scene.drivable.empty()) throw InvariantError("offroad_fraction: scene has no drivable polygons");
  const DrivableArea area(scene);
  std::size_t off = 0;
  for (const auto& p : traj.points) off += area.contains(p) ? 0 : 1;
  return static_cast<double>(off) / static_cast<double>(traj.points.size());
}

/// (1 - m)^2: 1 when fully on-road, 0 when fully off-road.
inline double loss_from_offroad(double m) { return (1.0 - m) * (1.0 - m); }

inline double attack_loss(const Trajectory& traj, const Scene& scene) {
  return loss_from_offroad(offroad_fraction(traj, scene));
}

struct DisplacementErrors {
  double ade{0.0};
  double fde{0.0};
};

inline DisplacementErrors displacement_errors(const Trajectory& pred, const Trajectory& gt) {
  if (pred.points.size() != gt.points.size())
    throw InvariantError("displacement_errors: length mismatch (" + std::to_string(pred.points.size()) + " vs " +
                         std::to_string(gt.points.size()) + ")");
  if (pred.points.empty()) throw InvariantError("displacement_errors: empty trajectories");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.points.size(); ++i) acc += distance(pred.points[i], gt.points[i]);
  return {acc / static_cast<double>(pred.points.size()), distance(pred.points.back(), gt.points.back())};
}

/// True iff at some shared timestep the prediction is closer than 2 * radius to an agent.
inline bool collision_flag(const Trajectory& pred, const std::vector<Trajectory>& agents,
                           double radius = kDefaultCollisionRadius) {
  for (const auto& a : agents) {
    const std::size_t n = std::min(pred.points.size(), a.points.size());
    for (std::size_t t = 0; t < n; ++t)
      if (distance(pred.points[t], a.points[t]) < 2.0 * radius) return true;
  }
  return false;
}

/// Highest-probability mode (ties to the lowest index), otherwise the mode
/// closest to the ground truth in ADE.
inline const Trajectory& select_mode(const PredictionSet& ps, const Trajectory* gt = nullptr) {
  if (ps.modes.empty()) throw InvariantError("select_mode: no modes");
  if (ps.modes.size() == 1) return ps.modes.front();
  if (ps.probabilities) {
    const auto& pr = *ps.probabilities;
    if (pr.size() != ps.modes.size()) throw InvariantError("select_mode: probabilities/modes length mismatch");
    std::size_t best = 0;
    for (std::size_t i = 1; i < pr.size(); ++i)
      if (pr[i] > pr[best]) best = i;
    return ps.modes[best];
  }
  if (gt == nullptr) throw InvariantError("select_mode: no probabilities and no ground truth");
  std::size_t best = 0;
  double best_ade = displacement_errors(ps.modes[0], *gt).ade;
  for (std::size_t i = 1; i < ps.modes.size(); ++i) {
    const double ade = displacement_errors(ps.modes[i], *gt).ade;
    if (ade < best_ade) {
      best_ade = ade;
      best = i;
    }
  }
  return ps.modes[best];
}

/// Integer percent, halves rounded up; values within 1e-9 of a half count as
/// the half so that 0.145 and 29 / 200 agree.
inline int round_percent(double fraction) {
  const double x = 100.0 * fraction;
  const double lo = std::floor(x);
  if (std::abs(x - lo - 0.5) <= 1e-9) return static_cast<int>(lo) + 1;
  return static_cast<int>(std::lround(x));
}

/// SOR = mean per-scenario off-road fraction, HOR = share of scenarios with any
/// off-road point; both as integer percent.
inline DatasetReport dataset_report(const std::vector<EvalRecord>& records, std::size_t errors = 0) {
  if (records.empty()) throw InvariantError("dataset_report: no records");
  double sum_m = 0.0, sum_ade = 0.0, sum_fde = 0.0;
  std::size_t hard = 0;
  for (const auto& r : records) {
    sum_m += r.offroad_fraction;
    sum_ade += r.ade;
    sum_fde += r.fde;
    hard += r.offroad_fraction > 0.0 ? 1 : 0;
  }
  const auto n = static_cast<double>(records.size());
  DatasetReport rep;
  rep.sor_percent = round_percent(sum_m / n);
  rep.hor_percent = round_percent(static_cast<double>(hard) / n);
  rep.ade_mean = sum_ade / n;
  rep.fde_mean = sum_fde / n;
  rep.n = records.size();
  rep.errors = errors;
  return rep;
}

}  // namespace roadwarp

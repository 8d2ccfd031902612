#pragma once

// Trajectory predictors g(h, S, a): a scene-blind constant-velocity baseline, a
// lane-following kinematic bicycle MPC, and a bridge to external processes that
// speak newline-delimited JSON.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "roadwarp/error.hpp"
#include "roadwarp/metrics.hpp"
#include "roadwarp/physics.hpp"
#include "roadwarp/process.hpp"
#include "roadwarp/scenario_io.hpp"
#include "roadwarp/scene.hpp"

namespace roadwarp {

/// Number of predicted points per mode (3 s at 10 Hz).
inline constexpr std::size_t kFutureSteps = 30;

struct MpcConfig {
  double wheelbase{2.8};
  int horizon_steps{30};
  double dt{0.1};
  double max_accel{4.0};
  double max_steer{0.6};
  /// Tire grip: steering is limited so that v^2 tan(steer) / wheelbase stays below this.
  double max_lateral_accel{8.0};
  int samples_per_step{7};
  /// Steps each candidate control is held for when scoring it.
  int lookahead_steps{8};
  double tracking_weight{1.0};
  double effort_weight{0.01};
};

inline void validate(const MpcConfig& c) {
  if (c.horizon_steps < 1) throw InvariantError("mpc: horizon_steps must be >= 1");
  if (c.samples_per_step < 2 || c.lookahead_steps < 1) throw InvariantError("mpc: samples_per_step >= 2, lookahead_steps >= 1");
  if (!(c.wheelbase > 0.0) || !(c.dt > 0.0) || c.max_accel < 0.0 || !(c.max_steer > 0.0) ||
      !(c.max_lateral_accel > 0.0))
    throw InvariantError("mpc: bounds must be positive");
}

enum class PredictorKind { constant_velocity, centerline_mpc, external };

struct PredictorHandle {
  PredictorKind kind{PredictorKind::constant_velocity};
  std::string external_command;
};

// ---------------------------------------------------------------------------
// Constant velocity

/// Extrapolates the mean velocity of the last five history steps for 30 steps.
inline PredictionSet predict_constant_velocity(const Scenario& scn) {
  const auto& h = scn.history.points;
  if (h.empty()) throw InvariantError("history empty");
  const std::size_t k = std::min<std::size_t>(5, h.size() - 1);
  const Point2 last = h.back();
  const Point2 step = k == 0 ? Point2{} : (1.0 / static_cast<double>(k)) * (last - h[h.size() - 1 - k]);
  Trajectory out{{}, scn.history.dt};
  out.points.reserve(kFutureSteps);
  for (std::size_t j = 1; j <= kFutureSteps; ++j) out.points.push_back(last + static_cast<double>(j) * step);
  return {{std::move(out)}, std::vector<double>{1.0}};
}

// ---------------------------------------------------------------------------
// Centerline MPC

/// Reference centerline followed by the MPC: a dense polyline starting at the
/// projection of the prediction origin, continued through successor lanes and
/// finally extended straight.
class ReferencePath {
 public:
  static constexpr double kSpacing = 0.5;
  static constexpr double kMaxStartDistance = 20.0;
  static constexpr double kSuccessorGap = 1.0;

  ReferencePath(const Scene& scene, Point2 origin, double heading, double min_length) {
    const Point2 dir{std::cos(heading), std::sin(heading)};
    struct Hit {
      std::size_t lane;
      std::size_t seg;
      double t;
      double dist;
      bool aligned;
    };
    std::optional<Hit> best;
    for (std::size_t l = 0; l < scene.lanes.size(); ++l) {
      const auto& pts = scene.lanes[l].points;
      for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const Point2 ab = pts[i + 1] - pts[i];
        const double t = std::clamp(dot(origin - pts[i], ab) / dot(ab, ab), 0.0, 1.0);
        const double d = distance(origin, pts[i] + t * ab);
        const bool aligned = dot(ab, dir) > 0.0;
        // aligned lanes win over opposing ones; then the nearest
        if (!best || (aligned && !best->aligned) || (aligned == best->aligned && d < best->dist))
          best = Hit{l, i, t, d, aligned};
      }
    }
    if (!best || best->dist > kMaxStartDistance) throw PredictorError("no reference lane");

    const auto& lane = scene.lanes[best->lane].points;
    std::vector<Point2> raw;
    raw.push_back(lane[best->seg] + best->t * (lane[best->seg + 1] - lane[best->seg]));
    for (std::size_t i = best->seg + 1; i < lane.size(); ++i)
      if (distance(raw.back(), lane[i]) > kCoincidentTol) raw.push_back(lane[i]);

    // follow successors: a lane starting where this one ends, heading the same way
    std::vector<bool> used(scene.lanes.size(), false);
    used[best->lane] = true;
    for (;;) {
      if (arc_length(raw) >= min_length || raw.size() < 2) break;
      const Point2 end = raw.back();
      const Point2 end_dir = raw.back() - raw[raw.size() - 2];
      std::optional<std::size_t> next;
      for (std::size_t l = 0; l < scene.lanes.size(); ++l) {
        if (used[l]) continue;
        const auto& pts = scene.lanes[l].points;
        if (distance(pts.front(), end) <= kSuccessorGap && dot(pts[1] - pts[0], end_dir) > 0.0) {
          next = l;
          break;
        }
      }
      if (!next) break;
      used[*next] = true;
      for (const auto& p : scene.lanes[*next].points)
        if (distance(raw.back(), p) > kCoincidentTol) raw.push_back(p);
    }
    if (raw.size() < 2) raw.push_back(raw.back() + dir);  // origin projects onto the lane end
    const double missing = min_length - arc_length(raw);
    if (missing > 0.0) {
      const Point2 d = raw.back() - raw[raw.size() - 2];
      raw.push_back(raw.back() + (missing / norm(d)) * d);
    }
    points_ = densify(raw, kSpacing);
  }

  [[nodiscard]] const std::vector<Point2>& points() const { return points_; }

  [[nodiscard]] double tangent_heading(std::size_t seg) const {
    seg = std::min(seg, points_.size() - 2);
    const Point2 d = points_[seg + 1] - points_[seg];
    return std::atan2(d.y, d.x);
  }

  /// Distance to the path, searching segments near `hint`; updates `hint`.
  double distance_near(Point2 p, std::size_t& hint, std::size_t forward_window) const {
    const std::size_t last_seg = points_.size() - 2;
    const std::size_t lo = hint >= 2 ? hint - 2 : 0;
    const std::size_t hi = std::min(last_seg, hint + forward_window);
    double best = kInfDistance;
    std::size_t best_seg = hint;
    for (std::size_t i = lo; i <= hi; ++i) {
      const double d = point_segment_distance(p, points_[i], points_[i + 1]);
      if (d < best) {
        best = d;
        best_seg = i;
      }
    }
    hint = best_seg;
    return best;
  }

 private:
  static constexpr double kInfDistance = 1e300;
  std::vector<Point2> points_;
};

namespace detail {

struct BicycleState {
  double x{0.0}, y{0.0}, heading{0.0}, speed{0.0};
};

inline BicycleState bicycle_step(const BicycleState& s, double accel, double steer, double wheelbase, double dt) {
  const double dpsi = s.speed / wheelbase * std::tan(steer) * dt;
  const double mid = s.heading + 0.5 * dpsi;
  return {s.x + s.speed * std::cos(mid) * dt, s.y + s.speed * std::sin(mid) * dt, s.heading + dpsi,
          std::max(0.0, s.speed + accel * dt)};
}

inline double steer_limit(const MpcConfig& cfg, double speed) {
  if (speed <= 0.0) return cfg.max_steer;
  return std::min(cfg.max_steer, std::atan(cfg.max_lateral_accel * cfg.wheelbase / (speed * speed)));
}

inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return v;
}

}  // namespace detail

/// Lane-following prediction in the frame of the given scenario. The vehicle is
/// a kinematic bicycle; at every step a grid of acceleration/steering pairs is
/// scored over a short lookahead (held constant), the steering grid is refined
/// twice around the best value, and the winner is applied for one step.
inline Trajectory mpc_rollout(const Scene& scene, Point2 origin, double heading, double speed, const MpcConfig& cfg) {
  using detail::BicycleState;
  const double reach = speed * cfg.dt * cfg.horizon_steps + cfg.max_accel * std::pow(cfg.dt * cfg.horizon_steps, 2) +
                       cfg.dt * cfg.lookahead_steps * (speed + cfg.max_accel * cfg.dt * cfg.horizon_steps) + 20.0;
  const ReferencePath ref(scene, origin, heading, reach);

  const auto accels = detail::linspace(-cfg.max_accel, cfg.max_accel, cfg.samples_per_step);
  BicycleState state{origin.x, origin.y, heading, speed};
  std::size_t hint = 0;
  Trajectory out{{}, cfg.dt};
  out.points.reserve(static_cast<std::size_t>(cfg.horizon_steps));

  const auto window = [&](double v) {
    return static_cast<std::size_t>((v + cfg.max_accel) * cfg.dt / ReferencePath::kSpacing) + 4;
  };
  const auto score = [&](double accel, double steer) {
    BicycleState s = state;
    std::size_t h = hint;
    double cost = 0.0;
    for (int k = 0; k < cfg.lookahead_steps; ++k) {
      const double lim = detail::steer_limit(cfg, s.speed);
      s = detail::bicycle_step(s, accel, std::clamp(steer, -lim, lim), cfg.wheelbase, cfg.dt);
      const double lat = ref.distance_near({s.x, s.y}, h, window(s.speed));
      cost += cfg.tracking_weight * lat * lat;
    }
    return cost + cfg.effort_weight * (accel * accel + steer * steer) * cfg.lookahead_steps;
  };

  for (int step = 0; step < cfg.horizon_steps; ++step) {
    const double lim = detail::steer_limit(cfg, state.speed);
    double best_cost = kInf;
    double best_accel = 0.0;
    double best_steer = 0.0;
    for (const double a : accels) {
      if (state.speed <= 0.0 && a < 0.0) continue;
      double lo = -lim, hi = lim;
      double steer_best = 0.0;
      double steer_cost = kInf;
      for (int level = 0; level < 3; ++level) {
        for (const double d : detail::linspace(lo, hi, cfg.samples_per_step)) {
          const double c = score(a, d);
          if (c < steer_cost) {
            steer_cost = c;
            steer_best = d;
          }
        }
        const double half = (hi - lo) / (cfg.samples_per_step - 1);
        lo = std::max(-lim, steer_best - half);
        hi = std::min(lim, steer_best + half);
      }
      if (steer_cost < best_cost) {
        best_cost = steer_cost;
        best_accel = a;
        best_steer = steer_best;
      }
    }
    state = detail::bicycle_step(state, best_accel, best_steer, cfg.wheelbase, cfg.dt);
    ref.distance_near({state.x, state.y}, hint, window(state.speed));
    out.points.push_back({state.x, state.y});
  }
  return out;
}

/// Runs the MPC in the normalized frame of the scenario and maps the result back.
inline PredictionSet predict_centerline_mpc(const Scenario& scn, const MpcConfig& cfg = {}) {
  validate(cfg);
  if (scn.scene.lanes.empty()) throw PredictorError("no reference lane");
  const auto& h = scn.history.points;
  if (h.empty()) throw InvariantError("history empty");

  const auto frame = history_frame(scn.history);
  const Pose to_world = frame ? *frame : Pose{h.back(), 0.0};
  const Scenario local = transformed(scn, to_world.inverse());
  const Point2 origin = local.history.points.back();

  double heading = 0.0;
  double speed = 0.0;
  if (h.size() >= 2 && distance(h[h.size() - 2], h.back()) > kCoincidentTol) {
    speed = distance(h[h.size() - 2], h.back()) / scn.history.dt;
  } else {
    const ReferencePath probe(local.scene, origin, 0.0, 1.0);
    heading = probe.tangent_heading(0);
  }
  auto traj = mpc_rollout(local.scene, origin, heading, speed, cfg);
  traj = transformed(std::move(traj), to_world);
  return {{std::move(traj)}, std::vector<double>{1.0}};
}

// ---------------------------------------------------------------------------
// External predictor bridge

inline constexpr std::chrono::milliseconds kDefaultExternalTimeout{30000};

inline json prediction_request(const Scenario& scn) {
  json j = json::object();
  j["id"] = scn.id;
  j["dt"] = scn.history.dt;
  j["history"] = io::to_json(scn.history.points);
  json agents = json::array();
  for (const auto& a : scn.agents) agents.push_back(io::to_json(a.points));
  j["agents"] = std::move(agents);
  json lanes = json::array();
  for (const auto& l : scn.scene.lanes) lanes.push_back(io::to_json(l.points));
  j["lanes"] = std::move(lanes);
  json rings = json::array();
  for (const auto& p : scn.scene.drivable) rings.push_back(io::to_json(p.ring));
  j["drivable"] = std::move(rings);
  return j;
}

/// Parses and validates a response line: matching id, every mode 30 points,
/// probabilities (if any) one per mode in [0, 1].
inline PredictionSet parse_prediction_response(const std::string& line, const std::string& expected_id, double dt) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed response: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("malformed response: not an object");
  if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>() != expected_id)
    throw ProtocolError("response id does not match request id \"" + expected_id + "\"");
  if (!j.contains("modes") || !j["modes"].is_array() || j["modes"].empty())
    throw ProtocolError("malformed response: missing \"modes\"");
  PredictionSet ps;
  try {
    for (const auto& mode : j["modes"]) {
      auto pts = io::points_from_json(mode, "modes");
      if (pts.size() != kFutureSteps)
        throw ProtocolError("mode has " + std::to_string(pts.size()) + " points, expected 30");
      for (const auto& p : pts)
        if (!is_finite(p)) throw ProtocolError("mode contains non-finite coordinates");
      ps.modes.push_back(Trajectory{std::move(pts), dt});
    }
  } catch (const ParseError& e) {
    throw ProtocolError(std::string("malformed response: ") + e.what());
  }
  if (j.contains("probabilities") && !j["probabilities"].is_null()) {
    const auto& pr = j["probabilities"];
    if (!pr.is_array() || pr.size() != ps.modes.size())
      throw ProtocolError("probabilities must have one entry per mode");
    std::vector<double> probs;
    for (const auto& p : pr) {
      if (!p.is_number()) throw ProtocolError("probabilities must be numbers");
      const double v = p.get<double>();
      if (!(v >= 0.0 && v <= 1.0)) throw ProtocolError("probability outside [0, 1]");
      probs.push_back(v);
    }
    ps.probabilities = std::move(probs);
  }
  return ps;
}

/// Common interface over built-in and external predictors.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual PredictionSet predict(const Scenario& scn) = 0;
  /// Whether concurrent predict() calls may run in parallel.
  [[nodiscard]] virtual bool parallel_safe() const { return true; }
  [[nodiscard]] virtual std::string name() const = 0;
};

class ConstantVelocityPredictor final : public Predictor {
 public:
  PredictionSet predict(const Scenario& scn) override { return predict_constant_velocity(scn); }
  [[nodiscard]] std::string name() const override { return "cv"; }
};

class CenterlineMpcPredictor final : public Predictor {
 public:
  explicit CenterlineMpcPredictor(MpcConfig cfg = {}) : cfg_(cfg) { validate(cfg_); }
  PredictionSet predict(const Scenario& scn) override { return predict_centerline_mpc(scn, cfg_); }
  [[nodiscard]] std::string name() const override { return "mpc"; }

 private:
  MpcConfig cfg_;
};

/// One child process per instance, started lazily; requests are serialized.
/// After any failure the process is discarded and restarted on the next call.
class ExternalPredictor final : public Predictor {
 public:
  explicit ExternalPredictor(std::string command, std::chrono::milliseconds timeout = kDefaultExternalTimeout)
      : command_(std::move(command)), timeout_(timeout) {
    if (command_.empty()) throw InvariantError("external predictor requires a command");
  }

  PredictionSet predict(const Scenario& scn) override {
    std::lock_guard lock(mutex_);
    try {
      if (!process_) process_ = std::make_unique<LineProcess>(command_);
      const auto reply = process_->round_trip(prediction_request(scn).dump(), timeout_);
      return parse_prediction_response(reply, scn.id, scn.history.dt);
    } catch (const PredictorError&) {
      process_.reset();
      throw;
    }
  }
  [[nodiscard]] bool parallel_safe() const override { return false; }
  [[nodiscard]] std::string name() const override { return "external"; }

 private:
  std::string command_;
  std::chrono::milliseconds timeout_;
  std::mutex mutex_;
  std::unique_ptr<LineProcess> process_;
};

inline std::unique_ptr<Predictor> make_predictor(const PredictorHandle& handle, const MpcConfig& mpc = {}) {
  switch (handle.kind) {
    case PredictorKind::constant_velocity: return std::make_unique<ConstantVelocityPredictor>();
    case PredictorKind::centerline_mpc: return std::make_unique<CenterlineMpcPredictor>(mpc);
    case PredictorKind::external: return std::make_unique<ExternalPredictor>(handle.external_command);
  }
  throw InvariantError("unknown predictor kind");
}

inline PredictorKind parse_predictor_kind(const std::string& s) {
  if (s == "cv" || s == "constant_velocity") return PredictorKind::constant_velocity;
  if (s == "mpc" || s == "centerline_mpc") return PredictorKind::centerline_mpc;
  if (s == "external") return PredictorKind::external;
  throw ParseError("unknown predictor: " + s);
}

}  // namespace roadwarp

#pragma once

// Scene search: for every scenario, try each candidate warp, slow the history
// down to a feasible speed, query the predictor and keep the scene whose
// prediction leaves the road the most. Dataset evaluation, parameter
// heatmaps, trivial-scene filtering, transfer replay and augmentation export
// are built on top of the same loop.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "roadwarp/error.hpp"
#include "roadwarp/metrics.hpp"
#include "roadwarp/parallel.hpp"
#include "roadwarp/physics.hpp"
#include "roadwarp/predictors.hpp"
#include "roadwarp/scenario_io.hpp"
#include "roadwarp/transforms.hpp"

namespace roadwarp {

enum class SamplerKind { brute_force, uniform_random };

/// Candidate parameter values of the default brute-force grid.
struct GridValues {
  std::vector<double> turn_lengths{10.0, 20.0};                  // alpha1
  std::vector<double> powers{1.0, 3.0, 5.0, 7.0, 9.0};           // |alpha2| * 3000, |beta12| * 3000
  double turn_exponent{3.0};                                     // alpha3, beta13
  double double_turn_length{10.0};                               // beta11
  std::vector<double> double_turn_gaps{10.0, 20.0};              // beta2
  std::vector<double> ripple_amplitudes{2.0, 4.0, 6.0, 8.0, 9.0};  // |gamma1|
  std::vector<double> ripple_frequencies{0.01, 0.017};           // gamma2
};

struct SearchConfig {
  int k_max{60};
  double border{kDefaultBorder};
  std::vector<Family> families{Family::smooth_turn, Family::double_turn, Family::ripple_road};
  GridValues grid{};
  SamplerKind sampler{SamplerKind::brute_force};
  PhysicsConfig physics{};
  bool enforce_physics{true};
  /// Keep only candidates with power_of(spec) <= this value.
  std::optional<double> max_power{};
  std::uint64_t seed{0};
  /// Worker threads for scenario-level parallelism (0 = hardware concurrency).
  unsigned threads{0};
};

// ---------------------------------------------------------------------------
// Candidate generation

/// Produces the ordered candidate list for a configuration.
class CandidateSampler {
 public:
  virtual ~CandidateSampler() = default;
  [[nodiscard]] virtual std::vector<TransformSpec> candidates(const SearchConfig& cfg) const = 0;
};

/// Deterministic grid, 20 candidates per family with both turn directions.
class BruteForceSampler final : public CandidateSampler {
 public:
  [[nodiscard]] static std::vector<TransformSpec> family_grid(Family f, const GridValues& g, double border) {
    std::vector<TransformSpec> out;
    switch (f) {
      case Family::smooth_turn:
        for (double len : g.turn_lengths)
          for (double p : g.powers)
            for (double sign : {1.0, -1.0})
              out.push_back({SmoothTurnParams{len, sign * p / kPowerScale, g.turn_exponent}, border});
        break;
      case Family::double_turn:
        for (double gap : g.double_turn_gaps)
          for (double p : g.powers)
            for (double sign : {1.0, -1.0})
              out.push_back(
                  {DoubleTurnParams{{g.double_turn_length, sign * p / kPowerScale, g.turn_exponent}, gap}, border});
        break;
      case Family::ripple_road:
        for (double freq : g.ripple_frequencies)
          for (double amp : g.ripple_amplitudes)
            for (double sign : {1.0, -1.0}) out.push_back({RippleParams{sign * amp, freq}, border});
        break;
    }
    return out;
  }

  [[nodiscard]] std::vector<TransformSpec> candidates(const SearchConfig& cfg) const override {
    std::vector<TransformSpec> out;
    for (Family f : cfg.families) {
      auto part = family_grid(f, cfg.grid, cfg.border);
      out.insert(out.end(), part.begin(), part.end());
    }
    if (static_cast<int>(out.size()) != cfg.k_max)
      throw InvariantError("k_max (" + std::to_string(cfg.k_max) + ") must equal the brute-force grid size (" +
                           std::to_string(out.size()) + ")");
    return out;
  }
};

/// k_max candidates drawn uniformly from the ranges spanned by the grid values;
/// families are visited round-robin.
class UniformRandomSampler final : public CandidateSampler {
 public:
  [[nodiscard]] std::vector<TransformSpec> candidates(const SearchConfig& cfg) const override {
    if (cfg.families.empty()) throw InvariantError("no transform families selected");
    const auto& g = cfg.grid;
    const auto range = [](const std::vector<double>& v) {
      return std::pair{*std::min_element(v.begin(), v.end()), *std::max_element(v.begin(), v.end())};
    };
    std::mt19937_64 rng(cfg.seed);
    const auto uniform = [&rng](std::pair<double, double> r) {
      return r.first + (r.second - r.first) * std::generate_canonical<double, 53>(rng);
    };
    const auto sign = [&rng] { return (rng() & 1U) != 0 ? 1.0 : -1.0; };
    std::vector<TransformSpec> out;
    for (int k = 0; k < cfg.k_max; ++k) {
      switch (cfg.families[static_cast<std::size_t>(k) % cfg.families.size()]) {
        case Family::smooth_turn:
          out.push_back({SmoothTurnParams{uniform(range(g.turn_lengths)), sign() * uniform(range(g.powers)) / kPowerScale,
                                          g.turn_exponent},
                         cfg.border});
          break;
        case Family::double_turn:
          out.push_back({DoubleTurnParams{{g.double_turn_length, sign() * uniform(range(g.powers)) / kPowerScale,
                                           g.turn_exponent},
                                          uniform(range(g.double_turn_gaps))},
                         cfg.border});
          break;
        case Family::ripple_road:
          out.push_back({RippleParams{sign() * uniform(range(g.ripple_amplitudes)), uniform(range(g.ripple_frequencies))},
                         cfg.border});
          break;
      }
    }
    return out;
  }
};

/// Candidate list for `cfg`, after the optional power filter.
inline std::vector<TransformSpec> build_grid(const SearchConfig& cfg) {
  if (cfg.k_max < 1) throw InvariantError("k_max must be >= 1");
  std::unique_ptr<CandidateSampler> sampler;
  if (cfg.sampler == SamplerKind::brute_force) sampler = std::make_unique<BruteForceSampler>();
  else sampler = std::make_unique<UniformRandomSampler>();
  auto specs = sampler->candidates(cfg);
  if (cfg.max_power) {
    std::erase_if(specs, [&](const TransformSpec& s) { return power_of(s) > *cfg.max_power + 1e-9; });
    if (specs.empty()) throw InvariantError("power filter removed every candidate");
  }
  return specs;
}

/// Default k_max for a family selection under brute force.
inline int grid_size(const SearchConfig& cfg) {
  std::size_t n = 0;
  for (Family f : cfg.families) n += BruteForceSampler::family_grid(f, cfg.grid, cfg.border).size();
  return static_cast<int>(n);
}

// ---------------------------------------------------------------------------
// Attack

struct CandidateOutcome {
  TransformSpec spec;
  double loss{1.0};
  bool failed{false};
};

struct AttackResult {
  std::string scenario_id;
  TransformSpec best_spec;
  double best_loss{1.0};
  double best_offroad{0.0};
  Scenario warped;
  std::vector<CandidateOutcome> per_candidate;
};

/// Frame in which warps are applied. Falls back to the tangent of the nearest
/// lane when the history never moves.
inline Pose attack_frame(const Scenario& scn) {
  if (auto f = history_frame(scn.history)) return *f;
  const Point2 origin = scn.history.points.back();
  double best = kInf;
  double heading = 0.0;
  for (const auto& lane : scn.scene.lanes)
    for (std::size_t i = 0; i + 1 < lane.points.size(); ++i) {
      const double d = point_segment_distance(origin, lane.points[i], lane.points[i + 1]);
      if (d < best) {
        best = d;
        const Point2 t = lane.points[i + 1] - lane.points[i];
        heading = std::atan2(t.y, t.x);
      }
    }
  return Pose{origin, wrap_angle(heading)};
}

/// The scenario a predictor sees for one candidate: warped in the attack frame,
/// mapped back to world coordinates and, if enabled, slowed to a feasible speed.
/// The identity transform returns the input untouched (before physics).
inline Scenario candidate_scenario(const Scenario& scn, const Pose& frame, const TransformSpec& spec,
                                   const SearchConfig& cfg) {
  Scenario world;
  if (is_identity(spec)) {
    world = scn;
  } else {
    const Scenario local = transformed(scn, frame.inverse());
    world = denormalize(warp_scenario(local, spec), frame);
  }
  return cfg.enforce_physics ? enforce_feasibility(world, cfg.physics) : world;
}

struct PredictionOutcome {
  Trajectory mode;
  double offroad{0.0};
};

inline PredictionOutcome predict_offroad(Predictor& predictor, const Scenario& scn) {
  const auto ps = predictor.predict(scn);
  const Trajectory* gt = scn.gt_future ? &*scn.gt_future : nullptr;
  Trajectory mode = select_mode(ps, gt);
  const double m = offroad_fraction(mode, scn.scene);
  return {std::move(mode), m};
}

/// Brute-force search over `candidates`; the earliest minimal-loss candidate wins.
/// Candidates whose warp degenerates or whose prediction fails are recorded
/// with loss 1 and skipped. Throws if no candidate could be evaluated.
inline AttackResult attack_scenario(const Scenario& scn, Predictor& predictor, const SearchConfig& cfg,
                                    const std::vector<TransformSpec>& candidates) {
  if (candidates.empty()) throw InvariantError("attack: no candidates");
  validate(scn);
  const Pose frame = attack_frame(scn);
  AttackResult res;
  res.scenario_id = scn.id;
  res.per_candidate.reserve(candidates.size());
  bool have_best = false;
  std::string last_error;
  for (const auto& spec : candidates) {
    CandidateOutcome outcome{spec, 1.0, false};
    try {
      Scenario cand = candidate_scenario(scn, frame, spec, cfg);
      const auto pred = predict_offroad(predictor, cand);
      outcome.loss = loss_from_offroad(pred.offroad);
      if (!have_best || outcome.loss < res.best_loss) {
        have_best = true;
        res.best_spec = spec;
        res.best_loss = outcome.loss;
        res.best_offroad = pred.offroad;
        res.warped = std::move(cand);
      }
    } catch (const DegenerateWarp& e) {
      outcome.failed = true;
      last_error = e.what();
    } catch (const PredictorError& e) {
      outcome.failed = true;
      last_error = e.what();
    }
    res.per_candidate.push_back(std::move(outcome));
  }
  if (!have_best) throw PredictorError("scenario " + scn.id + ": every candidate failed (" + last_error + ")");
  return res;
}

inline AttackResult attack_scenario(const Scenario& scn, Predictor& predictor, const SearchConfig& cfg = {}) {
  return attack_scenario(scn, predictor, cfg, build_grid(cfg));
}

// ---------------------------------------------------------------------------
// Dataset evaluation

enum class EvalMode { original, attacked };

struct ScenarioError {
  std::string scenario_id;
  std::string message;
};

struct EvaluationRun {
  DatasetReport report;
  std::vector<EvalRecord> records;
  /// Attack results in scenario order (attacked mode only).
  std::vector<AttackResult> results;
  std::vector<ScenarioError> errors;
};

inline EvalRecord make_record(const Scenario& scn, const Trajectory& mode, double offroad) {
  EvalRecord r;
  r.scenario_id = scn.id;
  r.offroad_fraction = offroad;
  r.loss = loss_from_offroad(offroad);
  if (scn.gt_future && scn.gt_future->points.size() == mode.points.size()) {
    const auto de = displacement_errors(mode, *scn.gt_future);
    r.ade = de.ade;
    r.fde = de.fde;
  }
  r.collided = collision_flag(mode, scn.agents);
  return r;
}

/// Evaluates every scenario (in parallel for built-in predictors) and reduces
/// in input order. Per-scenario failures are collected, not thrown.
inline EvaluationRun evaluate_dataset(const std::vector<Scenario>& scenarios, Predictor& predictor,
                                      const SearchConfig& cfg, EvalMode mode) {
  if (scenarios.empty()) throw InvariantError("evaluate: no scenarios");
  const auto candidates = mode == EvalMode::attacked ? build_grid(cfg) : std::vector<TransformSpec>{};
  struct Slot {
    std::optional<EvalRecord> record;
    std::optional<AttackResult> result;
    std::optional<std::string> error;
  };
  std::vector<Slot> slots(scenarios.size());
  const unsigned threads = predictor.parallel_safe() ? cfg.threads : 1;
  parallel_for(
      scenarios.size(),
      [&](std::size_t i) {
        const auto& scn = scenarios[i];
        try {
          if (mode == EvalMode::original) {
            const auto pred = predict_offroad(predictor, scn);
            slots[i].record = make_record(scn, pred.mode, pred.offroad);
          } else {
            auto res = attack_scenario(scn, predictor, cfg, candidates);
            const auto replay = predict_offroad(predictor, res.warped);
            slots[i].record = make_record(res.warped, replay.mode, res.best_offroad);
            slots[i].result = std::move(res);
          }
        } catch (const Error& e) {
          slots[i].error = e.what();
        }
      },
      threads);

  EvaluationRun run;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].error) run.errors.push_back({scenarios[i].id, *slots[i].error});
    if (slots[i].record) run.records.push_back(std::move(*slots[i].record));
    if (slots[i].result) run.results.push_back(std::move(*slots[i].result));
  }
  if (run.records.empty()) throw PredictorError("evaluate: every scenario failed");
  run.report = dataset_report(run.records, run.errors.size());
  return run;
}

// ---------------------------------------------------------------------------
// Trivial-scene filter, heatmaps, transfer, augmentation export

inline constexpr double kDefaultTrivialSpeed = 1.0;

/// Keeps scenarios whose fastest history step reaches `v_min` (m/s).
inline std::vector<Scenario> filter_trivial(const std::vector<Scenario>& scenarios, double v_min = kDefaultTrivialSpeed) {
  if (v_min < 0.0) throw InvariantError("v_min must be >= 0");
  std::vector<Scenario> out;
  for (const auto& s : scenarios)
    if (max_step_speed(s.history) >= v_min) out.push_back(s);
  return out;
}

/// Spec for one heatmap cell. The column parameter is the family's curvature
/// knob (alpha2, beta12, gamma1); the row parameter is alpha1, beta2 or gamma2.
inline TransformSpec heatmap_spec(Family family, double column_value, double row_value, const SearchConfig& cfg) {
  const auto& g = cfg.grid;
  switch (family) {
    case Family::smooth_turn: return {SmoothTurnParams{row_value, column_value, g.turn_exponent}, cfg.border};
    case Family::double_turn:
      return {DoubleTurnParams{{g.double_turn_length, column_value, g.turn_exponent}, row_value}, cfg.border};
    case Family::ripple_road: return {RippleParams{column_value, row_value}, cfg.border};
  }
  throw InvariantError("unknown family");
}

inline std::pair<std::string, std::string> heatmap_axis_names(Family family) {
  switch (family) {
    case Family::smooth_turn: return {"alpha2", "alpha1"};
    case Family::double_turn: return {"beta12", "beta2"};
    case Family::ripple_road: return {"gamma1", "gamma2"};
  }
  return {"?", "?"};
}

struct HeatmapGrid {
  Family family{Family::smooth_turn};
  std::vector<double> columns;  // curvature knob
  std::vector<double> rows;     // secondary parameter
  std::vector<std::vector<int>> hor;  // hor[row][column], percent
};

/// HOR of every scenario attacked with one fixed spec per cell.
inline HeatmapGrid heatmap(const std::vector<Scenario>& scenarios, Predictor& predictor, Family family,
                           const std::vector<double>& columns, const std::vector<double>& rows,
                           const SearchConfig& cfg) {
  if (columns.empty() || rows.empty()) throw InvariantError("heatmap axes must be non-empty");
  if (scenarios.empty()) throw InvariantError("heatmap: no scenarios");
  HeatmapGrid grid{family, columns, rows, std::vector<std::vector<int>>(rows.size(), std::vector<int>(columns.size(), 0))};
  const std::size_t cells = rows.size() * columns.size();
  std::vector<std::vector<double>> offroad(cells, std::vector<double>(scenarios.size(), -1.0));
  const unsigned threads = predictor.parallel_safe() ? cfg.threads : 1;
  parallel_for(
      cells * scenarios.size(),
      [&](std::size_t job) {
        const std::size_t cell = job / scenarios.size();
        const std::size_t s = job % scenarios.size();
        const auto spec = heatmap_spec(family, columns[cell % columns.size()], rows[cell / columns.size()], cfg);
        try {
          offroad[cell][s] = attack_scenario(scenarios[s], predictor, cfg, {spec}).best_offroad;
        } catch (const Error&) {
          // degenerate cell for this scenario: excluded from the rate
        }
      },
      threads);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::size_t n = 0, hard = 0;
    for (double m : offroad[cell]) {
      if (m < 0.0) continue;
      ++n;
      hard += m > 0.0 ? 1 : 0;
    }
    grid.hor[cell / columns.size()][cell % columns.size()] =
        n == 0 ? 0 : round_percent(static_cast<double>(hard) / static_cast<double>(n));
  }
  return grid;
}

/// Re-evaluates `target` on stored scenes that made their source predictor go
/// off-road; no new search is run.
inline EvaluationRun transfer_eval(const std::vector<AttackResult>& stored, Predictor& target) {
  EvaluationRun run;
  for (const auto& r : stored) {
    if (!(r.best_offroad > 0.0)) continue;
    try {
      const auto pred = predict_offroad(target, r.warped);
      run.records.push_back(make_record(r.warped, pred.mode, pred.offroad));
    } catch (const Error& e) {
      run.errors.push_back({r.scenario_id, e.what()});
    }
  }
  if (run.records.empty()) throw InvariantError("transfer: no stored off-road scenes to evaluate");
  run.report = dataset_report(run.records, run.errors.size());
  return run;
}

inline std::string sanitize_file_stem(const std::string& id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  return out.empty() ? std::string("scenario") : out;
}

/// Writes every searched scene (warped scene, feasible history, warped ground
/// truth) as a scenario file. Returns the written paths.
inline std::vector<std::filesystem::path> export_augmented(const std::vector<AttackResult>& results,
                                                           const std::filesystem::path& out_dir) {
  if (results.empty()) throw InvariantError("export: no results");
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto stem = sanitize_file_stem(results[i].scenario_id);
    auto path = out_dir / (stem + ".json");
    for (int k = 1; std::find(written.begin(), written.end(), path) != written.end(); ++k)
      path = out_dir / (stem + "_" + std::to_string(k) + ".json");
    save_scenario(results[i].warped, path);
    written.push_back(path);
  }
  return written;
}

// ---------------------------------------------------------------------------
// Result files

inline json result_to_json(const AttackResult& r) {
  json j = json::object();
  j["scenario_id"] = r.scenario_id;
  j["best_spec"] = spec_to_json(r.best_spec);
  j["best_loss"] = r.best_loss;
  j["best_offroad"] = r.best_offroad;
  json cands = json::array();
  for (const auto& c : r.per_candidate) {
    json e = json::object();
    e["spec"] = spec_to_json(c.spec);
    e["loss"] = c.loss;
    if (c.failed) e["failed"] = true;
    cands.push_back(std::move(e));
  }
  j["per_candidate"] = std::move(cands);
  j["warped"] = scenario_to_json(r.warped);
  return j;
}

inline AttackResult result_from_json(const json& j) {
  if (!j.is_object() || !j.contains("best_spec") || !j.contains("warped"))
    throw ParseError("attack result: missing best_spec or warped");
  AttackResult r;
  r.scenario_id = j.value("scenario_id", std::string{});
  r.best_spec = spec_from_json(j["best_spec"]);
  r.best_loss = io::number_field(j, "best_loss");
  r.best_offroad = io::number_field(j, "best_offroad");
  if (j.contains("per_candidate"))
    for (const auto& e : j["per_candidate"])
      r.per_candidate.push_back({spec_from_json(e.at("spec")), e.at("loss").get<double>(), e.value("failed", false)});
  r.warped = scenario_from_json(j["warped"]);
  return r;
}

inline void save_result(const AttackResult& r, const std::filesystem::path& path) {
  io::write_file(path, result_to_json(r).dump() + "\n");
}

inline AttackResult load_result(const std::filesystem::path& path) {
  try {
    return result_from_json(io::parse_text(io::read_file(path), path.string()));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline std::vector<AttackResult> load_results(const std::filesystem::path& path) {
  std::vector<AttackResult> out;
  for (const auto& f : json_files(path)) {
    if (f.filename() == "report.json") continue;
    out.push_back(load_result(f));
  }
  return out;
}

inline json record_to_json(const EvalRecord& r) {
  json j = json::object();
  j["scenario_id"] = r.scenario_id;
  j["offroad"] = r.offroad_fraction;
  j["loss"] = r.loss;
  j["ade"] = r.ade;
  j["fde"] = r.fde;
  j["collided"] = r.collided;
  return j;
}

/// {"sor", "hor", "ade", "fde", "n", "records": [...]} plus "errors" when any.
inline json report_to_json(const EvaluationRun& run) {
  json j = json::object();
  j["sor"] = run.report.sor_percent;
  j["hor"] = run.report.hor_percent;
  j["ade"] = run.report.ade_mean;
  j["fde"] = run.report.fde_mean;
  j["n"] = run.report.n;
  json recs = json::array();
  for (const auto& r : run.records) recs.push_back(record_to_json(r));
  j["records"] = std::move(recs);
  if (!run.errors.empty()) {
    json errs = json::array();
    for (const auto& e : run.errors) errs.push_back(json{{"scenario_id", e.scenario_id}, {"message", e.message}});
    j["errors"] = std::move(errs);
  }
  return j;
}

inline json heatmap_to_json(const HeatmapGrid& g) {
  const auto [col_name, row_name] = heatmap_axis_names(g.family);
  json j = json::object();
  j["family"] = std::string(family_name(g.family));
  j["column_param"] = col_name;
  j["row_param"] = row_name;
  j["columns"] = g.columns;
  j["rows"] = g.rows;
  j["hor"] = g.hor;
  return j;
}

inline HeatmapGrid heatmap_from_json(const json& j) {
  HeatmapGrid g;
  try {
    g.family = parse_family(j.at("family").get<std::string>());
    g.columns = j.at("columns").get<std::vector<double>>();
    g.rows = j.at("rows").get<std::vector<double>>();
    g.hor = j.at("hor").get<std::vector<std::vector<int>>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("heatmap grid: ") + e.what());
  }
  return g;
}

}  // namespace roadwarp

// roadwarp command-line entry point.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 external-predictor error.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "roadwarp/roadwarp.hpp"

namespace fs = std::filesystem;
using namespace roadwarp;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitExternal = 3;

struct UsageError : Error {
  using Error::Error;
};

struct PredictorOptions {
  std::string kind{"cv"};
  std::string external_cmd;
  int timeout_ms{static_cast<int>(kDefaultExternalTimeout.count())};
};

struct SearchOptions {
  int kmax{0};  // 0: size of the brute-force grid for the chosen families
  double border{kDefaultBorder};
  std::string families{"smooth_turn,double_turn,ripple_road"};
  double power{-1.0};
  double mu{0.7};
  double gravity{9.81};
  bool no_physics{false};
  std::uint64_t seed{0};
  std::string sampler{"brute_force"};
  unsigned threads{0};
};

void add_predictor_flags(CLI::App* cmd, PredictorOptions& p) {
  cmd->add_option("--predictor", p.kind, "cv | mpc | external")->check(CLI::IsMember({"cv", "mpc", "external"}));
  cmd->add_option("--external-cmd", p.external_cmd, "Shell command of an external predictor");
  cmd->add_option("--timeout-ms", p.timeout_ms, "External predictor timeout per request")->check(CLI::PositiveNumber);
}

void add_search_flags(CLI::App* cmd, SearchOptions& s) {
  cmd->add_option("--kmax", s.kmax, "Number of candidates (default: full grid)");
  cmd->add_option("--border", s.border, "Warp border b in meters");
  cmd->add_option("--families", s.families, "Comma-separated families");
  cmd->add_option("--power", s.power, "Keep only candidates with power <= P");
  cmd->add_option("--mu", s.mu, "Friction coefficient");
  cmd->add_option("--gravity", s.gravity, "Gravity (m/s^2)");
  cmd->add_flag("--no-physics", s.no_physics, "Skip the feasibility slow-down");
  cmd->add_option("--seed", s.seed, "Seed for the random sampler");
  cmd->add_option("--sampler", s.sampler, "brute_force | uniform_random")
      ->check(CLI::IsMember({"brute_force", "uniform_random"}));
  cmd->add_option("--threads", s.threads, "Worker threads (0 = all cores)");
}

std::vector<Family> parse_families(const std::string& list) {
  std::vector<Family> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(parse_family(item));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  if (out.empty()) throw UsageError("--families: no family given");
  return out;
}

SearchConfig make_config(const SearchOptions& s) {
  SearchConfig cfg;
  cfg.border = s.border;
  cfg.families = parse_families(s.families);
  cfg.physics = {s.mu, s.gravity};
  validate(cfg.physics);
  cfg.enforce_physics = !s.no_physics;
  cfg.seed = s.seed;
  cfg.threads = s.threads;
  cfg.sampler = s.sampler == "uniform_random" ? SamplerKind::uniform_random : SamplerKind::brute_force;
  cfg.k_max = s.kmax > 0 ? s.kmax : grid_size(cfg);
  if (s.power >= 0.0) cfg.max_power = s.power;
  return cfg;
}

std::unique_ptr<Predictor> make_cli_predictor(const PredictorOptions& p) {
  PredictorHandle h;
  h.kind = parse_predictor_kind(p.kind);
  if (h.kind == PredictorKind::external) {
    if (p.external_cmd.empty()) throw UsageError("--predictor external requires --external-cmd");
    return std::make_unique<ExternalPredictor>(p.external_cmd, std::chrono::milliseconds(p.timeout_ms));
  }
  return make_predictor(h);
}

void emit(const json& j, const std::string& out) {
  if (out.empty()) std::cout << j.dump(2) << "\n";
  else io::write_file(out, j.dump(2) + "\n");
}

void warn_errors(const EvaluationRun& run) {
  for (const auto& e : run.errors) std::cerr << "warning: scenario " << e.scenario_id << ": " << e.message << "\n";
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("not a number: " + item);
    }
  }
  if (out.empty()) throw UsageError("empty value list");
  return out;
}

PredictionSet load_prediction(const fs::path& path, const Scenario& scn) {
  json j = io::parse_text(io::read_file(path), path.string());
  if (!j.is_object()) throw ParseError(path.string() + ": expected a prediction object");
  if (!j.contains("id")) j["id"] = scn.id;
  try {
    return parse_prediction_response(j.dump(), j["id"].get<std::string>(), scn.history.dt);
  } catch (const ProtocolError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"roadwarp: adversarial road-scene warping, search and evaluation"};
  app.require_subcommand(1);

  PredictorOptions pred;
  SearchOptions search;
  std::string scenarios, out, results, corpus, index, scene_file, pred_file, grid_file, family{"smooth_turn"};
  std::string columns, rows, predict_kind, synth_kind{"corpus"};
  bool attacked = false;
  double v_min = kDefaultTrivialSpeed;
  int k = 10, branching = kDefaultBranching, depth = kDefaultDepth;
  std::uint64_t index_seed = 0, synth_seed = 1;
  std::size_t synth_n = 0;

  auto* attack = app.add_subcommand("attack", "Search the worst-case warp per scenario and store results");
  attack->add_option("--scenarios", scenarios, "Scenario file or directory")->required();
  attack->add_option("--out", out, "Output directory for result files")->required();
  add_predictor_flags(attack, pred);
  add_search_flags(attack, search);

  auto* evaluate = app.add_subcommand("evaluate", "SOR/HOR report on original or attacked scenes");
  evaluate->add_option("--scenarios", scenarios, "Scenario file or directory")->required();
  evaluate->add_flag("--attacked", attacked, "Evaluate the searched worst-case scenes");
  evaluate->add_option("--out", out, "Report file (default: stdout)");
  add_predictor_flags(evaluate, pred);
  add_search_flags(evaluate, search);

  auto* heat = app.add_subcommand("heatmap", "HOR grid over two parameters of one family");
  heat->add_option("--scenarios", scenarios, "Scenario file or directory")->required();
  heat->add_option("--family", family, "smooth_turn | double_turn | ripple_road");
  heat->add_option("--columns", columns, "Comma-separated curvature values (alpha2 / beta12 / gamma1)")->required();
  heat->add_option("--rows", rows, "Comma-separated secondary values (alpha1 / beta2 / gamma2)")->required();
  heat->add_option("--out", out, "Grid file (default: stdout)");
  add_predictor_flags(heat, pred);
  add_search_flags(heat, search);

  auto* filt = app.add_subcommand("filter-trivial", "Drop scenarios whose ego barely moves");
  filt->add_option("--scenarios", scenarios, "Scenario file or directory")->required();
  filt->add_option("--v-min", v_min, "Minimum history speed (m/s)");
  filt->add_option("--out", out, "Output directory")->required();

  auto* transfer = app.add_subcommand("transfer", "Evaluate a predictor on stored off-road successes");
  transfer->add_option("--results", results, "Result file or directory from `attack`")->required();
  transfer->add_option("--out", out, "Report file (default: stdout)");
  add_predictor_flags(transfer, pred);

  auto* exp = app.add_subcommand("export-aug", "Write searched scenes as scenario files");
  exp->add_option("--results", results, "Result file or directory from `attack`")->required();
  exp->add_option("--out", out, "Output directory")->required();

  auto* ibuild = app.add_subcommand("index-build", "Build a vocabulary-tree index over map tiles");
  ibuild->add_option("--corpus", corpus, "Tile file or directory")->required();
  ibuild->add_option("--out", out, "Index file")->required();
  ibuild->add_option("--branching", branching)->check(CLI::Range(2, 1000));
  ibuild->add_option("--depth", depth)->check(CLI::Range(1, 10));
  ibuild->add_option("--seed", index_seed);

  auto* iquery = app.add_subcommand("index-query", "Top-k most similar tiles to a scene");
  iquery->add_option("--index", index, "Index file")->required();
  iquery->add_option("--scene", scene_file, "Scene or scenario file")->required();
  iquery->add_option("-k", k, "Number of results")->check(CLI::PositiveNumber);
  iquery->add_option("--out", out, "Result file (default: stdout)");

  auto* render = app.add_subcommand("render", "Draw a scenario (and optional prediction) as SVG");
  render->add_option("--scenario", scene_file, "Scenario file")->required();
  render->add_option("--pred", pred_file, "Prediction file ({\"modes\": ..., \"probabilities\": ...})");
  render->add_option("--predict", predict_kind, "Run a built-in predictor and draw its output")
      ->check(CLI::IsMember({"cv", "mpc"}));
  render->add_option("--out", out, "SVG file")->required();

  auto* hrender = app.add_subcommand("heatmap-render", "Draw a heatmap grid as SVG");
  hrender->add_option("--grid", grid_file, "Grid file from `heatmap`")->required();
  hrender->add_option("--out", out, "SVG file")->required();

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic scenario corpus or tile set");
  synth_cmd->add_option("--kind", synth_kind, "corpus | mirror | tiles")->check(CLI::IsMember({"corpus", "mirror", "tiles"}));
  synth_cmd->add_option("--n", synth_n, "Number of items (mirror, tiles)");
  synth_cmd->add_option("--seed", synth_seed);
  synth_cmd->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  bool external = pred.kind == "external";
  try {
    if (attack->parsed()) {
      const auto cfg = make_config(search);
      auto predictor = make_cli_predictor(pred);
      const auto run = evaluate_dataset(load_scenarios(scenarios), *predictor, cfg, EvalMode::attacked);
      warn_errors(run);
      fs::create_directories(out);
      std::vector<std::string> used;
      for (const auto& r : run.results) {
        auto stem = sanitize_file_stem(r.scenario_id);
        std::string name = stem;
        for (int i = 1; std::find(used.begin(), used.end(), name) != used.end(); ++i) name = stem + "_" + std::to_string(i);
        used.push_back(name);
        save_result(r, fs::path(out) / (name + ".json"));
      }
      io::write_file(fs::path(out) / "report.json", report_to_json(run).dump(2) + "\n");
      std::cout << "SOR " << run.report.sor_percent << " HOR " << run.report.hor_percent << " n " << run.report.n
                << " errors " << run.errors.size() << "\n";
    } else if (evaluate->parsed()) {
      const auto cfg = make_config(search);
      auto predictor = make_cli_predictor(pred);
      const auto run = evaluate_dataset(load_scenarios(scenarios), *predictor, cfg,
                                        attacked ? EvalMode::attacked : EvalMode::original);
      warn_errors(run);
      emit(report_to_json(run), out);
    } else if (heat->parsed()) {
      const auto cfg = make_config(search);
      auto predictor = make_cli_predictor(pred);
      const Family fam = parse_family(family);
      const auto grid = heatmap(load_scenarios(scenarios), *predictor, fam, parse_list(columns), parse_list(rows), cfg);
      emit(heatmap_to_json(grid), out);
    } else if (filt->parsed()) {
      external = false;
      const auto kept = filter_trivial(load_scenarios(scenarios), v_min);
      fs::create_directories(out);
      for (const auto& s : kept) save_scenario(s, fs::path(out) / (sanitize_file_stem(s.id) + ".json"));
      std::cout << "kept " << kept.size() << "\n";
    } else if (transfer->parsed()) {
      auto predictor = make_cli_predictor(pred);
      const auto run = transfer_eval(load_results(results), *predictor);
      warn_errors(run);
      emit(report_to_json(run), out);
    } else if (exp->parsed()) {
      external = false;
      const auto files = export_augmented(load_results(results), out);
      std::cout << "wrote " << files.size() << " scenario files\n";
    } else if (ibuild->parsed()) {
      external = false;
      const auto tree = VocabTree::build(load_corpus(corpus), branching, depth, index_seed);
      save_index(tree, out);
      std::cout << "indexed " << tree.entries().size() << " tiles in " << tree.leaf_count() << " leaves\n";
    } else if (iquery->parsed()) {
      external = false;
      const auto tree = load_index(index);
      const auto hits = tree.query(load_scene(scene_file), static_cast<std::size_t>(k));
      json j = json::array();
      for (std::size_t r = 0; r < hits.size(); ++r) {
        const auto& e = tree.entries()[hits[r].entry];
        j.push_back(json{{"rank", r + 1}, {"id", e.id}, {"source", e.source}, {"distance", hits[r].distance}});
      }
      emit(j, out);
    } else if (render->parsed()) {
      external = false;
      const auto scn = load_scenario(scene_file);
      std::optional<PredictionSet> ps;
      if (!pred_file.empty()) ps = load_prediction(pred_file, scn);
      else if (predict_kind == "cv") ps = predict_constant_velocity(scn);
      else if (predict_kind == "mpc") ps = predict_centerline_mpc(scn);
      render_scene_file(scn, ps ? &*ps : nullptr, RenderStyle{}, out);
    } else if (hrender->parsed()) {
      external = false;
      const auto grid = heatmap_from_json(io::parse_text(io::read_file(grid_file), grid_file));
      const auto [cn, rn] = heatmap_axis_names(grid.family);
      io::write_file(out, render_heatmap(grid.hor, HeatmapAxes{cn, rn, grid.columns, grid.rows}));
    } else if (synth_cmd->parsed()) {
      external = false;
      fs::create_directories(out);
      std::size_t count = 0;
      if (synth_kind == "tiles") {
        for (const auto& t : synth::tile_corpus(synth_seed, synth_n ? synth_n : 2000)) {
          json j = scene_to_json(derive_drivable_area(t.tile));
          j["id"] = t.id;
          j["source"] = t.source;
          io::write_file(fs::path(out) / (t.id + ".json"), j.dump() + "\n");
          ++count;
        }
      } else {
        const auto scns = synth_kind == "mirror" ? synth::mirror_corpus(synth_seed, synth_n ? synth_n : 100)
                                                 : synth::scenario_corpus(synth_seed);
        for (const auto& s : scns) save_scenario(s, fs::path(out) / (s.id + ".json"));
        count = scns.size();
      }
      std::cout << "wrote " << count << " files\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const PredictorError& e) {
    std::cerr << "predictor error: " << e.what() << "\n";
    return external ? kExitExternal : kExitData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}

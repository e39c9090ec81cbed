#include "cli.hpp"

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "azsearch/dataset.hpp"
#include "azsearch/error.hpp"
#include "azsearch/eval.hpp"
#include "azsearch/io.hpp"
#include "azsearch/predictor.hpp"
#include "azsearch/sampling.hpp"
#include "azsearch/search.hpp"
#include "azsearch/training.hpp"
#include "manifest.hpp"

namespace azsearch::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::uint64_t seed = 0;
  int threads = 1;
  bool print_config = false;
};

void add_common(CLI::App& sub, Common& common) {
  sub.add_option("--seed", common.seed, "Global seed; all randomness derives from it");
  sub.add_option("--threads", common.threads, "Worker threads for per-scene work")
      ->check(CLI::PositiveNumber);
  sub.add_flag("--print-config", common.print_config,
               "Print the resolved configuration as JSON and exit");
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

// Rejects keys the default-constructed config would not write.
void check_keys(const json& given, const json& defaults, const std::string& what) {
  if (!given.is_object()) throw ConfigError(what + " must be a JSON object");
  for (const auto& [key, value] : given.items()) {
    if (!defaults.contains(key)) throw ConfigError(what + ": unknown key '" + key + "'");
  }
}

template <typename T>
T load_config(const std::string& path, const std::string& what) {
  if (path.empty()) return T{};
  json j;
  try {
    j = io::read_json(path);
  } catch (const DataError& e) {
    throw ConfigError(what + " file: " + e.what());
  }
  check_keys(j, json(T{}), what + " '" + path + "'");
  try {
    return j.get<T>();
  } catch (const Error&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(what + " '" + path + "': " + e.what());
  }
}

std::vector<Scene> load_scene_file(const std::string& path) {
  require(path, "--scenes");
  return load_scenes(path);
}

ModelParameters load_model(const std::string& path) {
  const json j = io::read_json(path);
  try {
    return j.get<ModelParameters>();
  } catch (const Error&) {
    throw;
  } catch (const json::exception& e) {
    throw DataError("model '" + path + "': " + e.what());
  }
}

fs::path manifest_path_for(const fs::path& output) {
  return fs::path(output.string() + ".manifest.json");
}

std::vector<SceneProposals> as_scene_proposals(const std::vector<SceneSearch>& runs) {
  std::vector<SceneProposals> out;
  out.reserve(runs.size());
  for (const auto& r : runs) out.push_back({r.scene_id, r.proposals});
  return out;
}

std::vector<SceneTrace> as_scene_traces(const std::vector<SceneSearch>& runs) {
  std::vector<SceneTrace> out;
  out.reserve(runs.size());
  for (const auto& r : runs) out.push_back({r.scene_id, r.trace});
  return out;
}

std::vector<std::size_t> anchor_counts(const std::vector<SceneSearch>& runs) {
  std::vector<std::size_t> out;
  out.reserve(runs.size());
  for (const auto& r : runs) out.push_back(r.trace.anchors_evaluated());
  return out;
}

// Files written by write_reports for a given report.
std::vector<fs::path> report_files(const fs::path& dir, const RecallReport& report, bool plots) {
  std::vector<fs::path> files = {dir / "recall_iou.csv", dir / "recall_topn.csv",
                                 dir / "recall_size.csv", dir / "matched_hist.csv"};
  if (report.anchors) files.push_back(dir / "anchor_hist.csv");
  files.push_back(dir / "summary.csv");
  if (plots) {
    files.push_back(dir / "recall_iou.svg");
    files.push_back(dir / "recall_topn.svg");
  }
  return files;
}

struct PredictorChoice {
  std::string kind;
  std::string model_path;
};

std::unique_ptr<Predictor> make_predictor(const PredictorChoice& choice, std::uint64_t seed) {
  std::string kind = choice.kind;
  if (kind.empty()) kind = choice.model_path.empty() ? "" : "model";
  if (kind == "oracle") return std::make_unique<OraclePredictor>();
  if (kind == "random") return std::make_unique<RandomPredictor>(seed);
  if (kind == "model") {
    if (choice.model_path.empty()) throw ConfigError("--predictor model needs --model");
    return std::make_unique<ModelPredictor>(load_model(choice.model_path));
  }
  if (kind.empty()) throw ConfigError("either --model or --predictor is required");
  throw ConfigError("unknown predictor '" + kind + "' (expected oracle, random or model)");
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string config;
  std::size_t n = 0;
  bool n_given = false;
  std::string out;
};

int cmd_gen(const GenArgs& a, const Common& c, std::ostream& out) {
  const auto config = a.config.empty() ? SceneConfig::defaults()
                                       : load_config<SceneConfig>(a.config, "scene config");
  if (c.print_config) {
    out << json(config).dump(2) << '\n';
    return 0;
  }
  if (!a.n_given) throw ConfigError("--n is required");
  require(a.out, "--out");
  const auto scenes = generate_scenes(config, a.n, c.seed, c.threads);
  save_scenes(scenes, a.out);

  RunManifest m;
  m.subcommand = "gen";
  m.seed = c.seed;
  m.config = {{"scene_config", config}, {"n", a.n}};
  if (!a.config.empty()) m.inputs["config"] = a.config;
  m.outputs = {a.out};
  m.write(manifest_path_for(a.out));
  return 0;
}

struct MineArgs {
  std::string scenes;
  std::string options;
  std::string out;
};

int cmd_mine(const MineArgs& a, const Common& c, std::ostream& out) {
  const auto options = load_config<TrainingSetOptions>(a.options, "mining options");
  if (c.print_config) {
    out << json(options).dump(2) << '\n';
    return 0;
  }
  const auto scenes = load_scene_file(a.scenes);
  require(a.out, "--out");
  const auto samples = build_training_set(scenes, options, c.seed, c.threads);

  std::string text;
  std::size_t mined = 0;
  std::size_t positive_zoom = 0;
  for (const auto& s : samples) {
    text += json(s).dump();
    text += '\n';
    if (s.source == SampleSource::mined) ++mined;
    positive_zoom += static_cast<std::size_t>(s.zoom_label);
  }
  io::write_text(a.out, text);

  RunManifest m;
  m.subcommand = "mine";
  m.seed = c.seed;
  m.config = options;
  m.inputs = {{"scenes", a.scenes}};
  if (!a.options.empty()) m.inputs["options"] = a.options;
  m.outputs = {a.out};
  m.extra = {{"samples", samples.size()},
             {"mined", mined},
             {"inverse_match", samples.size() - mined},
             {"zoom_positive", positive_zoom}};
  m.write(manifest_path_for(a.out));
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string scenes;
  std::string config;
  std::string out;
  std::string log;
  bool seed_given = false;
};

std::vector<TrainingSample> load_samples(const std::string& path) {
  require(path, "--data");
  const auto lines = io::read_json_lines(path);
  std::vector<TrainingSample> samples;
  samples.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      samples.push_back(lines[i].get<TrainingSample>());
      samples.back().validate();
    } catch (const Error& e) {
      throw DataError("sample on line " + std::to_string(i + 1) + " of '" + path +
                      "': " + e.what());
    } catch (const json::exception& e) {
      throw DataError("sample on line " + std::to_string(i + 1) + " of '" + path +
                      "': " + e.what());
    }
  }
  return samples;
}

int cmd_train(const TrainArgs& a, const Common& c, std::ostream& out) {
  auto config = load_config<TrainConfig>(a.config, "train config");
  if (a.seed_given) config.seed = c.seed;
  config.validate();
  if (c.print_config) {
    out << json(config).dump(2) << '\n';
    return 0;
  }
  const auto samples = load_samples(a.data);
  if (samples.empty()) throw DataError("training set '" + a.data + "' is empty");
  const auto scenes = load_scene_file(a.scenes);
  require(a.out, "--out");

  const auto data =
      featurize(samples, scenes, config.grid, config.noise_sigma, config.seed, c.threads);
  const auto result = sgd_train(data, config);
  io::write_json(a.out, json(result.params));

  RunManifest m;
  m.subcommand = "train";
  m.seed = config.seed;
  m.config = config;
  m.inputs = {{"data", a.data}, {"scenes", a.scenes}};
  if (!a.config.empty()) m.inputs["config"] = a.config;
  m.outputs = {a.out};
  if (!a.log.empty()) {
    io::write_text(a.log, loss_log_csv(result.log));
    m.outputs.emplace_back(a.log);
  }
  m.extra = {{"examples", data.size()},
             {"initial_loss", result.log.front().total()},
             {"final_loss", result.log.back().total()},
             {"zoom_accuracy_train", zoom_accuracy(result.params, data)}};
  m.write(manifest_path_for(a.out));
  return 0;
}

struct SearchArgs {
  std::string scenes;
  std::string params;
  std::string grid;
  PredictorChoice predictor;
  double noise_sigma = TrainConfig{}.noise_sigma;
};

json search_config(const SearchParams& params, const std::optional<GridConfig>& grid,
                   const SearchArgs& a) {
  json j = {{"search", params}, {"noise_sigma", a.noise_sigma}};
  if (grid) j["grid"] = *grid;
  return j;
}

struct ProposeArgs {
  SearchArgs search;
  std::string out;
  std::string trace;
};

int cmd_propose(const ProposeArgs& a, const Common& c, std::ostream& out) {
  const auto params = load_config<SearchParams>(a.search.params, "search params");
  std::optional<GridConfig> grid;
  if (!a.search.grid.empty()) grid = load_config<GridConfig>(a.search.grid, "grid config");
  if (c.print_config) {
    out << search_config(params, grid, a.search).dump(2) << '\n';
    return 0;
  }
  const auto scenes = load_scene_file(a.search.scenes);
  require(a.out, "--out");
  const auto predictor = make_predictor(a.search.predictor, c.seed);

  SearchRunOptions options;
  options.params = params;
  options.grid = grid;
  options.noise_sigma = a.search.noise_sigma;
  options.seed = c.seed;
  options.threads = c.threads;
  const auto runs = search_scenes(*predictor, scenes, options);

  io::write_text(a.out, proposals_to_jsonl(as_scene_proposals(runs)));
  RunManifest m;
  m.subcommand = "propose";
  m.seed = c.seed;
  m.config = search_config(params, grid, a.search);
  m.config["predictor"] = predictor->name();
  m.inputs = {{"scenes", a.search.scenes}};
  if (!a.search.predictor.model_path.empty()) m.inputs["model"] = a.search.predictor.model_path;
  m.outputs = {a.out};
  if (!a.trace.empty()) {
    io::write_json(a.trace, traces_to_json(as_scene_traces(runs)));
    m.outputs.emplace_back(a.trace);
  }
  const auto stats = anchor_stats(anchor_counts(runs));
  m.extra = {{"scenes", scenes.size()}, {"mean_anchors", stats.mean}};
  m.write(manifest_path_for(a.out));
  return 0;
}

struct EvalArgs {
  std::string props;
  std::string scenes;
  std::string trace;
  std::string outdir;
  bool no_plots = false;
};

int cmd_eval(const EvalArgs& a, const Common& c, std::ostream& out) {
  if (c.print_config) {
    out << json{{"iou_thresholds", iou_thresholds()},
                {"topn", topn_grid()},
                {"size_limits", {kSmallAreaLimit, kMediumAreaLimit}},
                {"plots", !a.no_plots}}
               .dump(2)
        << '\n';
    return 0;
  }
  require(a.props, "--props");
  require(a.outdir, "--outdir");
  const auto scenes = load_scene_file(a.scenes);
  const auto proposals = load_proposals(a.props);
  std::optional<std::vector<std::size_t>> anchors;
  if (!a.trace.empty()) anchors = anchor_counts_from_traces(io::read_json(a.trace), scenes);

  const auto report = evaluate(proposals, scenes, anchors);
  write_reports(report, a.outdir, !a.no_plots);

  RunManifest m;
  m.subcommand = "eval";
  m.seed = c.seed;
  m.inputs = {{"props", a.props}, {"scenes", a.scenes}};
  if (!a.trace.empty()) m.inputs["trace"] = a.trace;
  m.outputs = report_files(a.outdir, report, !a.no_plots);
  m.write(fs::path(a.outdir) / "manifest.json");
  return 0;
}

struct CompareArgs {
  SearchArgs search;
  std::string outdir;
  bool no_plots = false;
};

struct MethodRow {
  std::string method;
  double stride = 0.0;
  RecallReport report;
  double recall_top100 = 0.0;
};

std::string compare_csv(const std::vector<MethodRow>& rows) {
  using io::format_double;
  std::string csv =
      "method,stride,mean_anchors,median_anchors,recall_iou0.5_top300,recall_iou0.5_top100,"
      "recall_small,recall_medium,recall_large\n";
  for (const auto& r : rows) {
    csv += r.method + ',' + (r.stride > 0.0 ? format_double(r.stride) : std::string("n/a")) + ',' +
           format_double(r.report.anchors->mean) + ',' + format_double(r.report.anchors->median) +
           ',' + format_double(r.report.recall_iou.front().recall) + ',' +
           format_double(r.recall_top100);
    for (const auto& b : r.report.by_size) {
      csv += ',' + (b.recall ? format_double(*b.recall) : std::string("n/a"));
    }
    csv += '\n';
  }
  return csv;
}

int cmd_compare(const CompareArgs& a, const Common& c, std::ostream& out) {
  const auto params = load_config<SearchParams>(a.search.params, "search params");
  const GridConfig grid =
      a.search.grid.empty() ? GridConfig{} : load_config<GridConfig>(a.search.grid, "grid config");
  if (c.print_config) {
    out << search_config(params, grid, a.search).dump(2) << '\n';
    return 0;
  }
  const auto scenes = load_scene_file(a.search.scenes);
  require(a.outdir, "--outdir");
  PredictorChoice choice = a.search.predictor;
  if (choice.kind.empty() && choice.model_path.empty()) choice.kind = "oracle";
  const auto predictor = make_predictor(choice, c.seed);

  SearchRunOptions options;
  options.params = params;
  options.noise_sigma = a.search.noise_sigma;
  options.seed = c.seed;
  options.threads = c.threads;

  const fs::path outdir = a.outdir;
  RunManifest m;
  m.subcommand = "compare";
  m.seed = c.seed;
  m.inputs = {{"scenes", a.search.scenes}};
  if (!choice.model_path.empty()) m.inputs["model"] = choice.model_path;

  std::vector<MethodRow> rows;
  auto run_method = [&](const std::string& method, const std::optional<GridConfig>& g) {
    options.grid = g;
    const auto runs = search_scenes(*predictor, scenes, options);
    const auto proposals = as_scene_proposals(runs);
    MethodRow row{method, g ? g->stride : 0.0, evaluate(proposals, scenes, anchor_counts(runs)),
                  recall_at(proposals, scenes, 0.5, 100)};
    write_reports(row.report, outdir / method, !a.no_plots);
    for (auto& f : report_files(outdir / method, row.report, !a.no_plots)) {
      m.outputs.push_back(std::move(f));
    }
    rows.push_back(std::move(row));
  };

  run_method("adaptive", std::nullopt);
  run_method("grid", grid);
  const auto budget = resize_grid(grid, scenes.empty() ? 1.0 : scenes.front().width,
                                  scenes.empty() ? 1.0 : scenes.front().height,
                                  std::max(1.0, rows.front().report.anchors->mean));
  run_method("grid_equal_budget", budget);

  io::write_text(outdir / "compare.csv", compare_csv(rows));
  m.outputs.push_back(outdir / "compare.csv");
  m.config = search_config(params, grid, a.search);
  m.config["predictor"] = predictor->name();
  m.config["equal_budget_grid"] = budget;
  m.write(outdir / "manifest.json");
  return 0;
}

void emit_error(std::ostream& err, int code, const std::string& category,
                const std::string& message) {
  err << json{{"error", {{"code", code}, {"category", category}, {"message", message}}}}.dump()
      << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive zoom region-proposal search", "azsearch"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);

  Common common;

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate synthetic scenes");
  gen_cmd->add_option("--config", gen.config, "Scene config JSON");
  gen_cmd->add_option("--n", gen.n, "Number of scenes")->each([&](const std::string&) {
    gen.n_given = true;
  });
  gen_cmd->add_option("--out", gen.out, "Output scenes JSON");
  add_common(*gen_cmd, common);

  MineArgs mine;
  auto* mine_cmd = app.add_subcommand("mine", "Build a training set from scenes");
  mine_cmd->add_option("--scenes", mine.scenes, "Scenes JSON");
  mine_cmd->add_option("--options", mine.options, "Training-set options JSON");
  mine_cmd->add_option("--out", mine.out, "Output samples (JSON lines)");
  add_common(*mine_cmd, common);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the zoom/adjacency model");
  train_cmd->add_option("--data", train.data, "Training samples (JSON lines)");
  train_cmd->add_option("--scenes", train.scenes, "Scenes JSON the samples refer to");
  train_cmd->add_option("--config", train.config, "Training config JSON");
  train_cmd->add_option("--out", train.out, "Output model JSON");
  train_cmd->add_option("--log", train.log, "Loss log CSV");
  add_common(*train_cmd, common);
  train_cmd->get_option("--seed")->each([&](const std::string&) { train.seed_given = true; });

  auto add_search = [](CLI::App& sub, SearchArgs& s) {
    sub.add_option("--scenes", s.scenes, "Scenes JSON");
    sub.add_option("--params", s.params, "Search params JSON");
    sub.add_option("--grid", s.grid, "Fixed-grid config JSON");
    sub.add_option("--model", s.predictor.model_path, "Model JSON");
    sub.add_option("--predictor", s.predictor.kind, "oracle, random or model");
    sub.add_option("--noise-sigma", s.noise_sigma, "Feature noise used when rendering scenes");
  };

  ProposeArgs propose;
  auto* propose_cmd = app.add_subcommand("propose", "Run the search and write proposals");
  add_search(*propose_cmd, propose.search);
  propose_cmd->add_option("--out", propose.out, "Output proposals (JSON lines)");
  propose_cmd->add_option("--trace", propose.trace, "Output search traces JSON");
  add_common(*propose_cmd, common);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Recall analyses for a proposal file");
  eval_cmd->add_option("--props", eval.props, "Proposals (JSON lines)");
  eval_cmd->add_option("--scenes", eval.scenes, "Ground-truth scenes JSON");
  eval_cmd->add_option("--trace", eval.trace, "Search traces JSON");
  eval_cmd->add_option("--outdir", eval.outdir, "Report directory");
  eval_cmd->add_flag("--no-plots", eval.no_plots, "Skip SVG charts");
  add_common(*eval_cmd, common);

  CompareArgs compare;
  auto* compare_cmd =
      app.add_subcommand("compare", "Adaptive search against fixed grids on the same scenes");
  add_search(*compare_cmd, compare.search);
  compare_cmd->add_option("--outdir", compare.outdir, "Report directory");
  compare_cmd->add_flag("--no-plots", compare.no_plots, "Skip SVG charts");
  add_common(*compare_cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    emit_error(err, static_cast<int>(ErrorCategory::config), "config", e.what());
    return static_cast<int>(ErrorCategory::config);
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, common, out);
    if (*mine_cmd) return cmd_mine(mine, common, out);
    if (*train_cmd) return cmd_train(train, common, out);
    if (*propose_cmd) return cmd_propose(propose, common, out);
    if (*eval_cmd) return cmd_eval(eval, common, out);
    if (*compare_cmd) return cmd_compare(compare, common, out);
  } catch (const Error& e) {
    const int code = static_cast<int>(e.category());
    emit_error(err, code, to_string(e.category()), e.what());
    return code;
  } catch (const json::exception& e) {
    emit_error(err, static_cast<int>(ErrorCategory::data), "data", e.what());
    return static_cast<int>(ErrorCategory::data);
  } catch (const std::filesystem::filesystem_error& e) {
    emit_error(err, static_cast<int>(ErrorCategory::data), "data", e.what());
    return static_cast<int>(ErrorCategory::data);
  }
  return 0;
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace azsearch::cli

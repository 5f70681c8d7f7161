#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sentinel/sentinel.hpp"

namespace sentinel::cli {
namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config files: every flag of a subcommand may also be given as a top-level
// key of a JSON object. Flags given on the command line win.

class ConfigBindings {
 public:
  template <class T>
  void bind(CLI::Option* opt, std::string key, T& target) {
    bindings_.push_back({std::move(key), opt, [&target](const json& v) { assign(v, target); }});
  }

  void bind_flag(CLI::Option* opt, std::string key, bool& target) { bind(opt, std::move(key), target); }

  void apply(const fs::path& path) const {
    const json cfg = read_json_file(path);
    if (!cfg.is_object()) throw ConfigError(path.string() + ": config must be a JSON object");
    for (const auto& [key, value] : cfg.items()) {
      auto it = std::find_if(bindings_.begin(), bindings_.end(), [&](const Binding& b) { return b.key == key; });
      if (it == bindings_.end()) throw ConfigError(path.string() + ": unknown key '" + key + "'");
      if (it->opt->count() > 0) continue;
      try {
        it->apply(value);
      } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": bad value for '" + key + "': " + e.what());
      }
    }
  }

 private:
  template <class T>
  static void assign(const json& v, T& target) {
    target = v.get<T>();
  }
  template <class T>
  static void assign(const json& v, std::optional<T>& target) {
    if (v.is_null()) {
      target.reset();
    } else {
      target = v.get<T>();
    }
  }

  struct Binding {
    std::string key;
    CLI::Option* opt;
    std::function<void(const json&)> apply;
  };
  std::vector<Binding> bindings_;
};

struct Common {
  std::string configPath;
  unsigned jobs = 1;
};

// ---------------------------------------------------------------------------
// Helpers

std::vector<fs::path> trace_files(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".atrc") out.push_back(entry.path());
  }
  if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw InputError("no .atrc traces in " + dir.string());
  return out;
}

fs::path sidecar(const fs::path& dir, const fs::path& trace, const char* suffix) {
  return dir / (trace.stem().string() + suffix);
}

std::vector<double> parse_numbers(const std::string& text, std::size_t minCount, std::size_t maxCount,
                                  const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": '" + part + "' is not a number");
    }
  }
  if (out.size() < minCount || out.size() > maxCount) {
    throw ConfigError(std::string(what) + " expects " + std::to_string(minCount) +
                      (maxCount > minCount ? "-" + std::to_string(maxCount) : "") + " comma-separated numbers");
  }
  return out;
}

void emit(std::ostream& out, const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

LabeledEpisode labels_for(const EpisodeTrace& trace, const fs::path& traceFile, const fs::path& labelDir,
                          const LabelerConfig& cfg) {
  const fs::path side = sidecar(labelDir, traceFile, ".labels.json");
  if (fs::exists(side)) return labels_from_json(read_json_file(side));
  return label_episode(trace, cfg);
}

struct Reduced {
  EpisodeHeadFeatures features;
  LabeledEpisode labels;
};

// Reads, labels and reduces every trace; the traces themselves are dropped.
std::vector<Reduced> reduce_dir(const fs::path& dir, const fs::path& labelDir, const LabelerConfig& lab,
                                const SelectionConfig& sel, unsigned jobs) {
  const auto files = trace_files(dir);
  std::vector<Reduced> out(files.size());
  parallel_for(files.size(), jobs, [&](std::size_t i) {
    const auto trace = read_trace_file(files[i]);
    out[i].labels = labels_for(trace, files[i], labelDir, lab);
    out[i].features = extract_features(trace, sel);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands

struct SynthArgs {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a, const Common& c, std::ostream& out) {
  SynthSpec spec;
  if (!a.spec.empty()) spec = synth_spec_from_json(read_json_file(a.spec));
  if (a.seed) spec.seed = *a.seed;
  spec.validate();
  const auto plan = dataset_plan(spec);
  const fs::path dir = a.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::vector<json> entries(plan.size());
  parallel_for(plan.size(), c.jobs, [&](std::size_t i) {
    const auto ep = gen_episode(spec, i);
    const std::string file = plan[i].episodeId + ".atrc";
    write_trace_file(ep.trace, dir / file);
    entries[i] = {{"episodeId", plan[i].episodeId},
                  {"file", file},
                  {"split", to_string(plan[i].split)},
                  {"gtCategory", to_string(ep.gtCategory)},
                  {"gtOnset", ep.gtOnset ? json(*ep.gtOnset) : json(nullptr)}};
  });
  write_json_file(dir / "manifest.json", {{"spec", synth_spec_to_json(spec)}, {"episodes", entries}});
  out << "wrote " << plan.size() << " episodes to " << dir.string() << "\n";
  return 0;
}

struct LabelArgs {
  std::string dir;
  std::string out;
  int p = 3;
  bool rotationsBreakRun = false;
};

int cmd_label(const LabelArgs& a, const Common& c, std::ostream& out) {
  LabelerConfig cfg{a.p, a.rotationsBreakRun};
  if (cfg.patience < 1) throw ConfigError("--p must be >= 1");
  const auto files = trace_files(a.dir);
  const fs::path outDir = a.out.empty() ? fs::path(a.dir) : fs::path(a.out);
  std::vector<EpisodeCategory> cats(files.size());
  parallel_for(files.size(), c.jobs, [&](std::size_t i) {
    const auto labeled = label_episode(read_trace_file(files[i]), cfg);
    cats[i] = labeled.category;
    write_json_file(sidecar(outDir, files[i], ".labels.json"), labels_to_json(labeled));
  });
  std::map<std::string, int> counts{{"OnlyN", 0}, {"OnlyA", 0}, {"NtoA", 0}};
  for (auto cat : cats) ++counts[to_string(cat)];
  out << "labeled " << files.size() << " episodes: OnlyN=" << counts["OnlyN"] << " OnlyA=" << counts["OnlyA"]
      << " NtoA=" << counts["NtoA"] << "\n";
  return 0;
}

struct ScoreArgs {
  std::string dir;
  std::string labels;
  std::string out;
  double lambda = 0.5;
  std::optional<int> r;
  int p = 3;
};

int cmd_score(const ScoreArgs& a, const Common& c, std::ostream& out) {
  SelectionConfig sel;
  sel.lambda = a.lambda;
  sel.peakWindowHalfWidth = a.r;
  if (sel.lambda < 0.0 || sel.lambda > 1.0) throw ConfigError("--lambda must lie in [0, 1]");
  const auto reduced = reduce_dir(a.dir, a.labels.empty() ? a.dir : a.labels, {a.p, false}, sel, c.jobs);
  std::vector<EpisodeHeadFeatures> f;
  std::vector<LabeledEpisode> l;
  for (const auto& r : reduced) {
    f.push_back(r.features);
    l.push_back(r.labels);
  }
  const auto scores = score_heads(f, l, c.jobs);
  emit(out, a.out, head_scores_to_json(scores, sel).dump(2) + "\n");
  return 0;
}

struct SelectArgs {
  std::string scores;
  std::string out;
  std::size_t m = 32;
  std::size_t k = 3;
};

int cmd_select(const SelectArgs& a, std::ostream& out) {
  SelectionConfig sel;
  sel.candidatePoolSize = a.m;
  sel.k = a.k;
  const auto heads = select_nav_heads(head_scores_from_json(read_json_file(a.scores)), sel);
  const json j = {{"M", a.m}, {"K", a.k}, {"heads", heads}, {"spec", format_heads(heads)}};
  emit(out, a.out, j.dump(2) + "\n");
  return 0;
}

std::vector<HeadId> resolve_heads(const std::string& heads, const std::string& selection) {
  if (!heads.empty() && !selection.empty()) throw ConfigError("give either --heads or --selection, not both");
  if (!heads.empty()) return parse_heads(heads);
  if (!selection.empty()) return selection_from_json(read_json_file(selection));
  return {};
}

struct DetectArgs {
  std::string dir;
  std::string out;
  std::string heads;
  std::string selection;
  int window = 10;
  int patience = 9;
  double tau = 0.95;
  double epsilon = 1e-8;
};

int cmd_detect(const DetectArgs& a, const Common& c, std::ostream& out) {
  DetectorConfig cfg;
  cfg.heads = resolve_heads(a.heads, a.selection);
  if (cfg.heads.empty()) throw ConfigError("detect needs --heads or --selection");
  cfg.window = a.window;
  cfg.patience = a.patience;
  cfg.tau = a.tau;
  cfg.epsilon = a.epsilon;
  cfg.validate();
  const auto files = trace_files(a.dir);
  std::vector<std::string> streams(files.size());
  parallel_for(files.size(), c.jobs, [&](std::size_t i) {
    const auto trace = read_trace_file(files[i]);
    SafeCheckpoint cp;
    const auto steps = run_detector(trace, cfg, &cp);
    std::string text;
    for (const auto& s : steps) {
      json line = detector_step_to_json(s);
      if (a.out.empty()) line["episodeId"] = trace.episodeId;
      text += line.dump() + "\n";
    }
    if (!a.out.empty()) {
      write_text_file(sidecar(a.out, files[i], ".detect.jsonl"), text);
      write_json_file(sidecar(a.out, files[i], ".checkpoint.json"), checkpoint_to_json(cp));
    } else {
      streams[i] = std::move(text);
    }
  });
  for (const auto& s : streams) out << s;
  return 0;
}

std::vector<PhaseLabel> read_detections(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<PhaseLabel> flags;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto phase = json::parse(line).at("phase").get<std::string>();
      if (phase != "N" && phase != "A") throw FormatError("bad phase '" + phase + "'");
      flags.push_back(phase == "A" ? PhaseLabel::Anomaly : PhaseLabel::Normal);
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  return flags;
}

struct EvaluateArgs {
  std::string detections;
  std::string labels;
  std::string traces;
  std::string out;
  double stagnationThreshold = 0.1;
  int stagnationPatience = 3;
  double moveEpsilon = 0.05;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  std::error_code ec;
  if (!fs::is_directory(a.labels, ec)) throw IoError("not a directory: " + a.labels);
  std::vector<fs::path> labelFiles;
  for (const auto& e : fs::directory_iterator(a.labels, ec)) {
    const auto name = e.path().filename().string();
    if (name.size() > 12 && name.ends_with(".labels.json")) labelFiles.push_back(e.path());
  }
  std::sort(labelFiles.begin(), labelFiles.end());
  if (labelFiles.empty()) throw InputError("no .labels.json sidecars in " + a.labels);

  std::vector<StepSequence> det, stag, fail;
  for (const auto& lf : labelFiles) {
    const auto name = lf.filename().string();
    const std::string stem = name.substr(0, name.size() - std::string(".labels.json").size());
    const auto labeled = labels_from_json(read_json_file(lf));
    const std::size_t n = labeled.labels.size();
    auto trim = [&](std::vector<PhaseLabel> flags, const std::string& src) {
      if (flags.size() < n) {
        throw InputError(stem + ": " + src + " has " + std::to_string(flags.size()) + " steps, labels have " +
                         std::to_string(n));
      }
      flags.resize(n);
      return flags;
    };
    det.push_back({labeled.category, labeled.labels,
                   latch(trim(read_detections(fs::path(a.detections) / (stem + ".detect.jsonl")), "detections"))});
    if (!a.traces.empty()) {
      const auto trace = read_trace_file(fs::path(a.traces) / (stem + ".atrc"));
      std::vector<Pose> poses;
      std::vector<Action> actions;
      for (const auto& r : trace.records) {
        poses.push_back(r.pose);
        actions.push_back(r.action);
      }
      stag.push_back({labeled.category, labeled.labels,
                      trim(baseline_stagnation(poses, a.stagnationThreshold, a.stagnationPatience), "trace")});
      fail.push_back({labeled.category, labeled.labels,
                      trim(baseline_action_failure(actions, poses, a.moveEpsilon), "trace")});
    }
  }
  json j = {{"episodes", det.size()}, {"detector", metrics_to_json(summarize(det))}};
  if (!a.traces.empty()) {
    j["baselines"] = {{"stagnation", metrics_to_json(summarize(stag))},
                      {"actionFailure", metrics_to_json(summarize(fail))}};
  }
  emit(out, a.out, j.dump(2) + "\n");
  return 0;
}

struct SweepArgs {
  std::string dir;
  std::string spec;
  std::string labels;
  std::string heads;
  std::string selection;
  std::string scores;
  std::string out;
  std::string summary;
  std::size_t m = 32;
  double lambda = 0.5;
  std::optional<int> r;
  int p = 3;
  std::optional<double> ferCap;
};

int cmd_sweep(const SweepArgs& a, const Common& c, std::ostream& out) {
  SweepSpec spec = SweepSpec::full_grid();
  if (!a.spec.empty()) spec = sweep_spec_from_json(read_json_file(a.spec));
  if (a.ferCap) spec.ferCap = *a.ferCap;
  spec.validate();
  const auto maxK = static_cast<std::size_t>(*std::max_element(spec.k.begin(), spec.k.end()));

  SelectionConfig sel;
  sel.lambda = a.lambda;
  sel.peakWindowHalfWidth = a.r;
  const auto reduced = reduce_dir(a.dir, a.labels.empty() ? a.dir : a.labels, {a.p, false}, sel, c.jobs);

  auto ranked = resolve_heads(a.heads, a.selection);
  if (ranked.empty()) {
    std::vector<HeadScore> scores;
    if (!a.scores.empty()) {
      scores = head_scores_from_json(read_json_file(a.scores));
    } else {
      std::vector<EpisodeHeadFeatures> f;
      std::vector<LabeledEpisode> l;
      for (const auto& r : reduced) {
        f.push_back(r.features);
        l.push_back(r.labels);
      }
      scores = score_heads(f, l, c.jobs);
    }
    SelectionConfig pick = sel;
    pick.k = maxK;
    pick.candidatePoolSize = std::max(a.m, maxK);
    ranked = select_nav_heads(scores, pick);
  }

  std::vector<SweepEpisode> episodes;
  for (const auto& r : reduced) episodes.push_back(make_sweep_episode(r.features, r.labels, ranked, maxK));

  auto finish = [&](const std::vector<SweepRow>& table, const SweepRow* best) {
    std::ostringstream csv;
    write_sweep_csv(csv, table);
    emit(out, a.out, csv.str());
    if (!a.summary.empty()) {
      json s = {{"combinations", table.size()}, {"heads", ranked}, {"ferCap", spec.ferCap}};
      s["best"] = best ? sweep_row_to_json(*best) : json(nullptr);
      write_json_file(a.summary, s);
    }
  };
  try {
    const auto result = grid_sweep(episodes, spec, c.jobs);
    finish(result.table, &result.best);
  } catch (const NoFeasibleConfig& e) {
    finish(e.table(), nullptr);
    throw;
  }
  return 0;
}

struct RollbackArgs {
  std::string world;
  std::optional<std::uint64_t> seed;
  std::string checkpoint;
  std::string goal;
  std::string start;
  double budget = 60.0;
  std::string out;
  std::string pgm;
};

int cmd_rollback(const RollbackArgs& a, std::ostream& out) {
  if (a.world.empty() == !a.seed) throw ConfigError("give exactly one of --world or --seed");
  sim::World world;
  sim::RobotState start;
  double gx = 0.0, gy = 0.0, gth = 0.0;
  bool haveGoal = false;
  if (a.seed) {
    const auto sc = sim::random_scenario(*a.seed);
    world = sc.world;
    start = sc.start;
    gx = sc.goalX;
    gy = sc.goalY;
    haveGoal = true;
  } else {
    world = world_from_json(read_json_file(a.world));
  }
  if (!a.checkpoint.empty() && !a.goal.empty()) throw ConfigError("give either --checkpoint or --goal, not both");
  if (!a.checkpoint.empty()) {
    const auto cp = checkpoint_from_json(read_json_file(a.checkpoint));
    gx = cp.pose.x;
    gy = cp.pose.y;
    gth = cp.pose.theta;
    haveGoal = true;
  } else if (!a.goal.empty()) {
    const auto g = parse_numbers(a.goal, 2, 3, "--goal");
    gx = g[0];
    gy = g[1];
    gth = g.size() > 2 ? g[2] : 0.0;
    haveGoal = true;
  }
  if (!haveGoal) throw ConfigError("rollback needs --checkpoint, --goal or --seed");
  if (!a.start.empty()) {
    const auto s = parse_numbers(a.start, 2, 3, "--start");
    start = {s[0], s[1], s.size() > 2 ? normalize_angle(s[2]) : 0.0, 0.0, 0.0};
  } else if (!a.seed) {
    throw ConfigError("rollback needs --start unless --seed generates the scenario");
  }
  if (!(a.budget >= 0.0)) throw ConfigError("--budget must be >= 0");

  const auto result = sim::run_rollback(gx, gy, gth, start, world, a.budget);
  std::ostringstream csv;
  sim::write_trajectory_csv(csv, result);
  if (!a.pgm.empty()) {
    std::ostringstream pgm;
    sim::write_pgm(pgm, result.finalCostmap);
    write_text_file(a.pgm, pgm.str());
  }
  const json summary = {{"outcome", to_string(result.status)},
                        {"elapsed", result.elapsed},
                        {"pathLength", result.pathLength},
                        {"finalDistance", result.finalDistance},
                        {"finalHeadingError", result.finalHeadingError},
                        {"totalReward", result.totalReward}};
  if (a.out.empty() || a.out == "-") {
    out << csv.str();
  } else {
    write_text_file(a.out, csv.str());
    out << summary.dump() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

std::string error_kind(const Error& e) {
  if (e.is_io_error()) return "io";
  if (dynamic_cast<const ValidationError*>(&e)) return "validation";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const TruncationError*>(&e)) return "truncation";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const NoFeasibleConfig*>(&e)) return "no-feasible-config";
  if (dynamic_cast<const MissingHeadError*>(&e)) return "missing-head";
  return "input";
}

void diagnose(std::ostream& err, const std::string& kind, const std::string& message) {
  err << json({{"level", "error"}, {"kind", kind}, {"message", message}}).dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Training-free path-deviation toolkit", "sentinel"};
  app.require_subcommand(1);
  Common common;
  common.jobs = 1;

  auto addCommon = [&](CLI::App* sub, ConfigBindings& cfg) {
    sub->add_option("--config", common.configPath, "JSON file with defaults for any flag");
    cfg.bind(sub->add_option("--jobs", common.jobs, "Worker threads (results do not depend on it)"), "jobs",
             common.jobs);
  };

  SynthArgs synth;
  ConfigBindings synthCfg;
  auto* synthCmd = app.add_subcommand("synth", "Generate a synthetic trace dataset");
  synthCfg.bind(synthCmd->add_option("--spec", synth.spec, "Synthetic dataset spec (JSON)"), "spec", synth.spec);
  synthCfg.bind(synthCmd->add_option("--out", synth.out, "Output directory")->required(), "out", synth.out);
  synthCfg.bind(synthCmd->add_option("--seed", synth.seed, "Override the spec seed"), "seed", synth.seed);
  addCommon(synthCmd, synthCfg);

  LabelArgs label;
  ConfigBindings labelCfg;
  auto* labelCmd = app.add_subcommand("label", "Write phase-label sidecars for every trace");
  labelCmd->add_option("traces", label.dir, "Trace directory")->required();
  labelCfg.bind(labelCmd->add_option("--p", label.p, "Labeler patience"), "p", label.p);
  labelCfg.bind_flag(labelCmd->add_flag("--rotations-break-run", label.rotationsBreakRun,
                                        "Turns and stops reset the patience counter"),
                     "rotationsBreakRun", label.rotationsBreakRun);
  labelCfg.bind(labelCmd->add_option("--out", label.out, "Sidecar directory (default: trace directory)"), "out",
                label.out);
  addCommon(labelCmd, labelCfg);

  ScoreArgs score;
  ConfigBindings scoreCfg;
  auto* scoreCmd = app.add_subcommand("score-heads", "Alignment and effect-size scores for every stored head");
  scoreCmd->add_option("traces", score.dir, "Trace directory")->required();
  scoreCfg.bind(scoreCmd->add_option("--lambda", score.lambda, "Diagonal vs shift weight"), "lambda", score.lambda);
  scoreCfg.bind(scoreCmd->add_option("--r", score.r, "Peak window half-width in tokens"), "r", score.r);
  scoreCfg.bind(scoreCmd->add_option("--p", score.p, "Labeler patience when a sidecar is missing"), "p", score.p);
  scoreCfg.bind(scoreCmd->add_option("--labels", score.labels, "Label sidecar directory"), "labels", score.labels);
  scoreCfg.bind(scoreCmd->add_option("--out", score.out, "Output JSON (default: stdout)"), "out", score.out);
  addCommon(scoreCmd, scoreCfg);

  SelectArgs select;
  ConfigBindings selectCfg;
  auto* selectCmd = app.add_subcommand("select-heads", "Pick navigation heads from a score report");
  selectCmd->add_option("scores", select.scores, "Head score JSON")->required();
  selectCfg.bind(selectCmd->add_option("--M", select.m, "Candidate pool size"), "M", select.m);
  selectCfg.bind(selectCmd->add_option("--K", select.k, "Heads to keep"), "K", select.k);
  selectCfg.bind(selectCmd->add_option("--out", select.out, "Output JSON (default: stdout)"), "out", select.out);
  addCommon(selectCmd, selectCfg);

  DetectArgs detect;
  ConfigBindings detectCfg;
  auto* detectCmd = app.add_subcommand("detect", "Run the streaming detector over every trace");
  detectCmd->add_option("traces", detect.dir, "Trace directory")->required();
  detectCfg.bind(detectCmd->add_option("--heads", detect.heads, "Heads as layer:head,layer:head,..."), "heads",
                 detect.heads);
  detectCfg.bind(detectCmd->add_option("--selection", detect.selection, "Selection JSON from select-heads"),
                 "selection", detect.selection);
  detectCfg.bind(detectCmd->add_option("--W", detect.window, "Window length"), "W", detect.window);
  detectCfg.bind(detectCmd->add_option("--P", detect.patience, "Patience"), "P", detect.patience);
  detectCfg.bind(detectCmd->add_option("--tau", detect.tau, "Ratio threshold"), "tau", detect.tau);
  detectCfg.bind(detectCmd->add_option("--eps", detect.epsilon, "Ratio stabilizer"), "eps", detect.epsilon);
  detectCfg.bind(detectCmd->add_option("--out", detect.out, "Directory for per-episode JSONL and checkpoints"),
                 "out", detect.out);
  addCommon(detectCmd, detectCfg);

  EvaluateArgs evaluate;
  ConfigBindings evaluateCfg;
  auto* evaluateCmd = app.add_subcommand("evaluate", "Episode and step metrics for stored detections");
  evaluateCmd->add_option("detections", evaluate.detections, "Directory of .detect.jsonl files")->required();
  evaluateCmd->add_option("labels", evaluate.labels, "Directory of .labels.json sidecars")->required();
  evaluateCfg.bind(evaluateCmd->add_option("--traces", evaluate.traces, "Trace directory, enables baselines"),
                   "traces", evaluate.traces);
  evaluateCfg.bind(evaluateCmd->add_option("--stagnation-threshold", evaluate.stagnationThreshold),
                   "stagnationThreshold", evaluate.stagnationThreshold);
  evaluateCfg.bind(evaluateCmd->add_option("--stagnation-patience", evaluate.stagnationPatience),
                   "stagnationPatience", evaluate.stagnationPatience);
  evaluateCfg.bind(evaluateCmd->add_option("--move-eps", evaluate.moveEpsilon), "moveEps", evaluate.moveEpsilon);
  evaluateCfg.bind(evaluateCmd->add_option("--out", evaluate.out, "Output JSON (default: stdout)"), "out",
                   evaluate.out);
  addCommon(evaluateCmd, evaluateCfg);

  SweepArgs sweep;
  ConfigBindings sweepCfg;
  auto* sweepCmd = app.add_subcommand("sweep", "Grid-search detector settings under an FER cap");
  sweepCmd->add_option("traces", sweep.dir, "Trace directory")->required();
  sweepCfg.bind(sweepCmd->add_option("--spec", sweep.spec, "Sweep grid JSON (default: 9,000-point grid)"), "spec",
                sweep.spec);
  sweepCfg.bind(sweepCmd->add_option("--heads", sweep.heads, "Ranked heads, at least max K of them"), "heads",
                sweep.heads);
  sweepCfg.bind(sweepCmd->add_option("--selection", sweep.selection, "Ranked selection JSON"), "selection",
                sweep.selection);
  sweepCfg.bind(sweepCmd->add_option("--scores", sweep.scores, "Head score JSON to rank from"), "scores",
                sweep.scores);
  sweepCfg.bind(sweepCmd->add_option("--M", sweep.m, "Candidate pool size when ranking"), "M", sweep.m);
  sweepCfg.bind(sweepCmd->add_option("--lambda", sweep.lambda), "lambda", sweep.lambda);
  sweepCfg.bind(sweepCmd->add_option("--r", sweep.r), "r", sweep.r);
  sweepCfg.bind(sweepCmd->add_option("--p", sweep.p, "Labeler patience when a sidecar is missing"), "p", sweep.p);
  sweepCfg.bind(sweepCmd->add_option("--labels", sweep.labels, "Label sidecar directory"), "labels", sweep.labels);
  sweepCfg.bind(sweepCmd->add_option("--fer-cap", sweep.ferCap, "Override the spec's FER cap"), "ferCap",
                sweep.ferCap);
  sweepCfg.bind(sweepCmd->add_option("--out", sweep.out, "Result table CSV (default: stdout)"), "out", sweep.out);
  sweepCfg.bind(sweepCmd->add_option("--summary", sweep.summary, "Best-configuration JSON"), "summary",
                sweep.summary);
  addCommon(sweepCmd, sweepCfg);

  RollbackArgs rollback;
  ConfigBindings rollbackCfg;
  auto* rollbackCmd = app.add_subcommand("rollback", "Simulate a return to a safe checkpoint");
  rollbackCfg.bind(rollbackCmd->add_option("--world", rollback.world, "World JSON"), "world", rollback.world);
  rollbackCfg.bind(rollbackCmd->add_option("--seed", rollback.seed, "Generate a random world, start and goal"),
                   "seed", rollback.seed);
  rollbackCfg.bind(rollbackCmd->add_option("--checkpoint", rollback.checkpoint, "Checkpoint JSON from detect"),
                   "checkpoint", rollback.checkpoint);
  rollbackCfg.bind(rollbackCmd->add_option("--goal", rollback.goal, "Goal as x,y[,theta]"), "goal", rollback.goal);
  rollbackCfg.bind(rollbackCmd->add_option("--start", rollback.start, "Start as x,y[,theta]"), "start",
                   rollback.start);
  rollbackCfg.bind(rollbackCmd->add_option("--budget", rollback.budget, "Time budget in seconds"), "budget",
                   rollback.budget);
  rollbackCfg.bind(rollbackCmd->add_option("--out", rollback.out, "Trajectory CSV (default: stdout)"), "out",
                   rollback.out);
  rollbackCfg.bind(rollbackCmd->add_option("--pgm", rollback.pgm, "Dump the final costmap as PGM"), "pgm",
                   rollback.pgm);
  addCommon(rollbackCmd, rollbackCfg);

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    diagnose(err, "usage", e.what());
    CLI::App* failing = &app;
    for (auto* sub : app.get_subcommands()) failing = sub;
    err << failing->help();
    return 1;
  }

  try {
    auto withConfig = [&](const ConfigBindings& cfg) {
      if (!common.configPath.empty()) cfg.apply(common.configPath);
      if (common.jobs == 0) common.jobs = default_jobs();
    };
    if (synthCmd->parsed()) return withConfig(synthCfg), cmd_synth(synth, common, out);
    if (labelCmd->parsed()) return withConfig(labelCfg), cmd_label(label, common, out);
    if (scoreCmd->parsed()) return withConfig(scoreCfg), cmd_score(score, common, out);
    if (selectCmd->parsed()) return withConfig(selectCfg), cmd_select(select, out);
    if (detectCmd->parsed()) return withConfig(detectCfg), cmd_detect(detect, common, out);
    if (evaluateCmd->parsed()) return withConfig(evaluateCfg), cmd_evaluate(evaluate, out);
    if (sweepCmd->parsed()) return withConfig(sweepCfg), cmd_sweep(sweep, common, out);
    if (rollbackCmd->parsed()) return withConfig(rollbackCfg), cmd_rollback(rollback, out);
  } catch (const Error& e) {
    diagnose(err, error_kind(e), e.what());
    return e.is_io_error() ? 2 : 1;
  } catch (const fs::filesystem_error& e) {
    diagnose(err, "io", e.what());
    return 2;
  } catch (const std::exception& e) {
    diagnose(err, "internal", e.what());
    return 1;
  }
  diagnose(err, "usage", "no subcommand given");
  err << app.help();
  return 1;
}

}  // namespace sentinel::cli

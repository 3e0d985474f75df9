#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vstack/io.hpp"
#include "vstack/pipeline.hpp"
#include "vstack/voting.hpp"

namespace fs = std::filesystem;
using namespace vstack;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  std::optional<double> test_frac;
  std::optional<std::string> mode;
  std::optional<std::size_t> levels;
  std::optional<std::size_t> jobs;
  std::string out = "vstack-out";
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Run configuration (JSON); defaults to the bundled synthetic table");
  cmd->add_option("--seed", o.seed, "Master seed for splits, folds and model fitting");
  cmd->add_option("--k", o.k, "Number of cross-validation folds")->check(CLI::Range(2, 1000));
  cmd->add_option("--test-frac", o.test_frac, "Fraction of samples held out for testing");
  cmd->add_option("--mode", o.mode, "Routing mode for the meta-learner")
      ->check(CLI::IsMember({"guided", "disagreement", "both"}));
  cmd->add_option("--levels", o.levels, "Stacking levels (2, or 3 with a super learner)")
      ->check(CLI::IsMember({2, 3}));
  cmd->add_option("--jobs", o.jobs, "Worker threads for fold-model training (0 = automatic)");
  cmd->add_option("--out", o.out, "Output directory for artifacts")->capture_default_str();
}

RunConfig load_config(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : read_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.k) c.k = *o.k;
  if (o.test_frac) c.test_fraction = *o.test_frac;
  if (o.mode) {
    if (*o.mode == "both") {
      c.modes = {RoutingMode::LabelGuided, RoutingMode::Disagreement};
    } else {
      c.modes = {parse_routing_mode(*o.mode)};
    }
  }
  if (o.levels) c.levels = *o.levels;
  if (o.jobs) c.jobs = *o.jobs;
  c.validate();
  return c;
}

fs::path prepare_out(const Overrides& o) {
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) fail(ErrorKind::Io, "cannot create output directory '" + o.out + "': " + ec.message());
  return fs::path(o.out);
}

void log(const std::string& stage, const std::string& message) { std::cerr << stage << ": " << message << '\n'; }

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::map<std::string, std::map<SampleId, ClassIndex>> prediction_columns(const RunResult& r) {
  std::map<std::string, std::map<SampleId, ClassIndex>> cols;
  cols["vote"] = r.vote_predictions;
  for (const auto& [mode, routed] : r.routed) cols[std::string(to_string(mode))] = routed.predicted;
  return cols;
}

LabelMap test_labels(const LevelOne& l1) {
  LabelMap labels;
  for (const auto& id : l1.test) {
    if (auto y = l1.table.label(id)) labels[id] = *y;
  }
  return labels;
}

void print_summary(const EvaluationReport& r) {
  for (const auto& b : r.base_learners) {
    std::cout << b.name << ": accuracy " << percent(b.accuracy.mean) << " +- " << percent(b.accuracy.std)
              << " over folds, " << percent(b.averaged.metrics.accuracy) << " fold-averaged\n";
  }
  if (r.voting) std::cout << "soft vote: accuracy " << percent(r.voting->metrics.accuracy) << '\n';
  std::cout << "meta-dataset: " << r.stack.provenance.retained << " of " << r.stack.provenance.source_size
            << " samples" << (r.stack.meta_skipped ? " (meta stage skipped)" : "") << '\n';
  for (const auto& m : r.stack.modes) {
    std::cout << "voting-stacking [" << to_string(m.mode) << "]: routed " << m.routed;
    if (m.evaluation) std::cout << ", accuracy " << percent(m.evaluation->metrics.accuracy);
    std::cout << '\n';
  }
}

void print_ablation(const EvaluationReport& r) {
  std::cout << "learners  voting  meta  ";
  for (auto mode : r.config.modes) std::cout << to_string(mode) << "  ";
  std::cout << '\n';
  for (const auto& row : r.ablation) {
    std::cout << row.learners << "         " << (row.voting ? "yes" : "no ") << "     " << (row.meta ? "yes" : "no ")
              << "   ";
    for (const auto& m : row.modes) {
      std::cout << (m.evaluation ? percent(m.evaluation->metrics.accuracy) : std::string("-")) << "  ";
    }
    std::cout << '\n';
  }
}

// Commands ------------------------------------------------------------------------

int cmd_split(const Overrides& o, std::string& stage) {
  stage = "config";
  auto config = load_config(o);
  stage = "split";
  const auto plan = plan_folds(config);
  stage = "write";
  const auto out = prepare_out(o) / "fold_plan.json";
  write_fold_plan(plan, out);
  log("split", "wrote " + out.string() + " (" + std::to_string(plan.pool().size()) + " pool, " +
                   std::to_string(plan.test_ids.size()) + " test, k=" + std::to_string(plan.k) + ")");
  return 0;
}

int cmd_run(const Overrides& o, std::string& stage, bool grids) {
  stage = "config";
  auto config = load_config(o);
  if (!grids) {
    config.ablation = false;
    config.meta_comparison = false;
  }
  stage = "pipeline";
  auto result = run_pipeline(config);
  stage = "write";
  const auto out = prepare_out(o);
  write_text(out / "report.json", report_to_json(result.report));
  write_predictions(prediction_columns(result), test_labels(result.level1), out / "predictions.csv");
  write_probability_table(result.level1.table, out / "level1.csv");
  if (result.level1.plan) write_fold_plan(*result.level1.plan, out / "fold_plan.json");
  if (result.meta) write_text(out / "model.json", model_to_json(*result.meta));
  print_summary(result.report);
  log(grids ? "run" : "stack", "wrote artifacts to " + out.string());
  return 0;
}

int cmd_vote(const Overrides& o, std::string& stage) {
  stage = "config";
  auto config = load_config(o);
  stage = "level1";
  const auto level1 = build_level_one(config);
  stage = "vote";
  const auto test = average_test_probabilities(level1.table, level1.test);
  std::map<SampleId, ClassIndex> votes;
  for (const auto& [id, v] : vote_table(test, level1.test)) votes[id] = v.predicted;
  const auto labels = test_labels(level1);
  stage = "write";
  const auto out = prepare_out(o);
  write_predictions({{"vote", votes}}, labels, out / "predictions.csv");
  if (labels.size() == level1.test.size()) {
    const auto e = evaluate(votes, labels, level1.table.class_count(), config.averaging);
    std::cout << "soft vote: accuracy " << percent(e.metrics.accuracy) << " on " << e.metrics.total << " samples\n";
  }
  log("vote", "wrote " + (out / "predictions.csv").string());
  return 0;
}

int cmd_eval(const Overrides& o, const std::string& predictions, const std::string& column,
             const std::string& averaging, std::string& stage) {
  stage = "config";
  const auto avg = parse_averaging(averaging);
  stage = "eval";
  const auto p = read_predictions(predictions, column);
  std::size_t c = 0;
  for (const auto& [_, y] : p.labels) c = std::max(c, y + 1);
  for (const auto& [_, y] : p.predicted) c = std::max(c, y + 1);
  c = std::max<std::size_t>(c, 2);
  const auto e = evaluate(p.predicted, p.labels, c, avg);
  std::cout << column << ": accuracy " << percent(e.metrics.accuracy) << ", precision " << percent(e.metrics.precision)
            << ", recall " << percent(e.metrics.recall) << ", F1 " << percent(e.metrics.f1) << " ("
            << to_string(e.metrics.averaging) << ", " << e.metrics.total << " samples)\n";
  for (const auto& w : e.metrics.warnings) log("eval", "warning: " + w);
  (void)o;
  return 0;
}

int cmd_ablate(const Overrides& o, std::string& stage) {
  stage = "config";
  auto config = load_config(o);
  config.ablation = true;
  stage = "pipeline";
  const auto result = run_pipeline(config);
  if (result.report.ablation.empty()) fail(ErrorKind::Mode, "ablation needs labeled test samples");
  stage = "write";
  const auto out = prepare_out(o);
  write_text(out / "ablation.json", report_to_json(result.report));
  print_ablation(result.report);
  log("ablate", "wrote " + (out / "ablation.json").string());
  return 0;
}

int cmd_gen(const Overrides& o, const std::string& kind, std::string& stage) {
  stage = "config";
  auto config = load_config(o);
  stage = "gen";
  const auto out = prepare_out(o);
  if (kind == "table") {
    write_probability_table(make_synthetic_table(config.synthetic_table).table, out / "synthetic_table.csv");
    log("gen", "wrote " + (out / "synthetic_table.csv").string());
  } else {
    const auto data = make_synthetic(config.synthetic);
    DatasetManifest m;
    m.name = "synthetic";
    m.class_count = data.class_count();
    m.class_names = data.class_names();
    m.feature_dim = data.feature_dim();
    m.sample_count = data.size();
    m.notes = "Gaussian blobs, one 2-D view per base learner";
    write_manifest(m, out / "manifest.json");
    write_features(data, out / "features.csv");
    log("gen", "wrote " + (out / "manifest.json").string() + " and " + (out / "features.csv").string());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voting-stacking ensembles over base-learner probability tables"};
  app.require_subcommand(1);

  Overrides o;
  auto* split = app.add_subcommand("split", "Write the train/test split and fold plan");
  auto* run = app.add_subcommand("run", "Full pipeline: folds, voting, meta-learner, ablation grid, report");
  auto* vote = app.add_subcommand("vote", "Soft-vote the base learners on the test set");
  auto* stack = app.add_subcommand("stack", "Train the meta stack and route test samples (no grids)");
  auto* eval = app.add_subcommand("eval", "Metrics for one prediction column of a predictions CSV");
  auto* ablate = app.add_subcommand("ablate", "Ablation grid over learner count and voting/meta toggles");
  auto* gen = app.add_subcommand("gen", "Write the bundled synthetic data to disk");
  for (auto* cmd : {split, run, vote, stack, ablate, gen}) add_common(cmd, o);

  std::string predictions;
  std::string column = "vote";
  std::string averaging = "auto";
  eval->add_option("--predictions", predictions, "Predictions CSV (sample_id,label,...)")->required();
  eval->add_option("--column", column, "Prediction column to score")->capture_default_str();
  eval->add_option("--averaging", averaging, "auto, binary, macro, micro or weighted")->capture_default_str();
  std::string gen_kind = "table";
  gen->add_option("--kind", gen_kind, "table (probability table) or features (manifest + feature CSV)")
      ->check(CLI::IsMember({"table", "features"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  std::string stage = "cli";
  try {
    if (*split) return cmd_split(o, stage);
    if (*run) return cmd_run(o, stage, true);
    if (*vote) return cmd_vote(o, stage);
    if (*stack) return cmd_run(o, stage, false);
    if (*eval) return cmd_eval(o, predictions, column, averaging, stage);
    if (*ablate) return cmd_ablate(o, stage);
    if (*gen) return cmd_gen(o, gen_kind, stage);
  } catch (const Error& e) {
    std::cerr << stage << ": " << to_string(e.kind()) << " error: " << e.what() << '\n';
    return e.kind() == ErrorKind::Config || e.kind() == ErrorKind::Mode ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << stage << ": " << e.what() << '\n';
    return 1;
  }
  return 2;
}

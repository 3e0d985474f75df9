#include "vstack/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include "vstack/io.hpp"
#include "vstack/random.hpp"
#include "vstack/voting.hpp"

namespace vstack {

std::string_view to_string(InputKind kind) noexcept {
  switch (kind) {
    case InputKind::Features: return "features";
    case InputKind::ProbabilityTable: return "probability_table";
    case InputKind::SyntheticFeatures: return "synthetic_features";
    case InputKind::SyntheticTable: return "synthetic_table";
  }
  return "unknown";
}

InputKind parse_input_kind(std::string_view name) {
  for (auto kind : {InputKind::Features, InputKind::ProbabilityTable, InputKind::SyntheticFeatures,
                    InputKind::SyntheticTable}) {
    if (to_string(kind) == name) return kind;
  }
  fail(ErrorKind::Config, "unknown input kind '" + std::string(name) + "'");
}

TrainConfig RunConfig::default_base_train() {
  TrainConfig t;
  t.learning_rate = 0.01;
  return t;
}

LearnerSpec RunConfig::default_meta() {
  LearnerSpec spec;
  spec.name = "meta_softmax";
  spec.kind = LearnerKind::Softmax;
  spec.train.learning_rate = 0.01;
  return spec;
}

std::vector<LearnerSpec> RunConfig::default_level2() {
  LearnerSpec knn;
  knn.name = "meta_knn";
  knn.kind = LearnerKind::Knn;
  LearnerSpec gnb;
  gnb.name = "meta_gnb";
  gnb.kind = LearnerKind::GaussianNb;
  return {default_meta(), knn, gnb};
}

void RunConfig::validate() const {
  const auto bad = [](const std::string& what) { fail(ErrorKind::Config, "config: " + what); };
  switch (input) {
    case InputKind::Features:
      if (manifest_path.empty() || features_path.empty()) bad("features input needs manifest_path and features_path");
      break;
    case InputKind::ProbabilityTable:
      if (table_path.empty()) bad("probability_table input needs table_path");
      break;
    default:
      break;
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) bad("test_fraction must lie in (0, 1)");
  if (!(fold_val_fraction >= 0.0 && fold_val_fraction < 1.0)) bad("fold_val_fraction must lie in [0, 1)");
  if (k < 2) bad("k must be at least 2");
  if (levels != 2 && levels != 3) bad("levels must be 2 or 3");
  if (levels == 3 && level2.empty()) bad("three levels need at least one level-2 learner");
  if (!(meta_val_fraction >= 0.0 && meta_val_fraction < 1.0)) bad("meta_val_fraction must lie in [0, 1)");
  if (modes.empty()) bad("at least one routing mode is required");
  for (std::size_t i = 0; i < modes.size(); ++i) {
    for (std::size_t j = i + 1; j < modes.size(); ++j) {
      if (modes[i] == modes[j]) bad("routing mode listed twice");
    }
  }
  base_train.validate();
  for (const auto& l : learners) l.train.validate();
  meta.train.validate();
  for (const auto& l : level2) l.train.validate();
  super_learner.train.validate();
}

StackConfig RunConfig::stack_config() const {
  StackConfig sc;
  if (levels == 3) {
    sc.level2 = level2;
    sc.super_learner = super_learner;
  } else {
    sc.level2 = {meta};
  }
  sc.meta_val_fraction = meta_val_fraction;
  return sc;
}

Evaluation evaluate(const std::map<SampleId, ClassIndex>& predictions, const LabelMap& labels,
                    std::size_t class_count, Averaging averaging) {
  Evaluation e;
  e.confusion = compute_confusion(predictions, labels, class_count);
  e.metrics = compute_metrics(e.confusion, averaging);
  return e;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

RunSeeds seeds_for(std::uint64_t seed) {
  return {derive_seed(seed, 1), derive_seed(seed, 2), derive_seed(seed, 3), derive_seed(seed, 4)};
}

Dataset load_features(const RunConfig& config, bool& rebalance) {
  rebalance = config.rebalance;
  if (config.input == InputKind::SyntheticFeatures) return make_synthetic(config.synthetic);
  const auto manifest = read_manifest(config.manifest_path);
  rebalance = rebalance || manifest.rebalance;
  return read_dataset(manifest, config.features_path);
}

std::vector<LearnerSpec> roster_for(const RunConfig& config) {
  if (!config.learners.empty()) return config.learners;
  if (config.input == InputKind::SyntheticFeatures) return synthetic_roster(config.synthetic, config.base_train);
  fail(ErrorKind::Config, "config: no base learners configured");
}

FoldPlan plan_for(const RunConfig& config, const Dataset& data, std::vector<std::string>& warnings) {
  const auto seeds = seeds_for(config.seed);
  auto split = stratified_split(data, config.test_fraction, 0.0, seeds.split);
  auto plan = make_folds(data, split.train, config.k, seeds.folds, config.stratified, config.fold_val_fraction);
  plan.test_ids = split.test;
  warnings.insert(warnings.end(), split.warnings.begin(), split.warnings.end());
  warnings.insert(warnings.end(), plan.warnings.begin(), plan.warnings.end());
  return plan;
}

std::map<SampleId, ClassIndex> argmax_of(const ProbabilityTable& table, std::size_t learner, FoldSlot fold,
                                         std::span<const SampleId> ids) {
  std::map<SampleId, ClassIndex> out;
  for (const auto& id : ids) out[id] = argmax_label(table.at(TableKey{id, learner, fold}));
  return out;
}

struct MetaFit {
  std::optional<MetaStack> stack;
  MetaProvenance provenance;
  std::string skip_reason;
};

MetaFit fit_meta(const ProbabilityTable& oof, const LabelMap& pool_labels, bool filtered,
                 const StackConfig& config) {
  std::vector<SampleId> ids;
  for (const auto& [id, _] : pool_labels) ids.push_back(id);
  const auto meta = build_meta_training_set(oof, pool_labels, vote_table(oof, ids), filtered);
  MetaFit out;
  out.provenance = meta.provenance;
  if (meta.empty()) {
    out.skip_reason = "no contradictory samples in the training pool";
    return out;
  }
  try {
    out.stack = multilevel_stack(meta, config);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateSplit) throw;
    out.skip_reason = e.what();
  }
  return out;
}

ModeResult mode_result(RoutingMode mode, const RoutedPrediction& routed, const LabelMap& labels, bool labeled,
                       std::size_t class_count, Averaging averaging) {
  ModeResult r;
  r.mode = mode;
  r.routed = routed.routed.size();
  if (labeled) r.evaluation = evaluate(routed.predicted, labels, class_count, averaging);
  return r;
}

std::vector<ModeResult> route_all(const RunConfig& config, const ProbabilityTable& test, const MetaStack* stack,
                                  const LabelMap& labels, bool labeled,
                                  std::map<RoutingMode, RoutedPrediction>* keep = nullptr) {
  std::vector<ModeResult> out;
  for (auto mode : config.modes) {
    auto routed = voting_stacking_predict(test, stack, mode, &labels);
    out.push_back(mode_result(mode, routed, labels, labeled, test.class_count(), config.averaging));
    if (keep != nullptr) (*keep)[mode] = std::move(routed);
  }
  return out;
}

}  // namespace

FoldPlan plan_folds(const RunConfig& config) {
  config.validate();
  if (config.input != InputKind::Features && config.input != InputKind::SyntheticFeatures) {
    fail(ErrorKind::Config, "config: fold plans are made for feature inputs");
  }
  bool rebalance = false;
  const Dataset data = load_features(config, rebalance);
  std::vector<std::string> warnings;
  return plan_for(config, data, warnings);
}

LevelOne build_level_one(const RunConfig& config) {
  config.validate();
  LevelOne out;
  switch (config.input) {
    case InputKind::SyntheticTable: {
      auto st = make_synthetic_table(config.synthetic_table);
      out.table = std::move(st.table);
      out.pool = std::move(st.pool);
      out.test = std::move(st.test);
      break;
    }
    case InputKind::ProbabilityTable: {
      out.table = read_probability_table(config.table_path);
      auto roles = infer_table_roles(out.table);
      out.pool = std::move(roles.pool);
      out.test = std::move(roles.test);
      break;
    }
    case InputKind::Features:
    case InputKind::SyntheticFeatures: {
      bool rebalance = false;
      const Dataset data = load_features(config, rebalance);
      const auto roster = roster_for(config);
      auto plan = plan_for(config, data, out.warnings);
      CollectOptions options;
      options.seed = seeds_for(config.seed).base;
      options.rebalance = rebalance;
      options.jobs = config.jobs;
      if (options.jobs == 0) {
        options.jobs = std::max<std::size_t>(1, std::min<std::size_t>(roster.size() * config.k,
                                                                     std::thread::hardware_concurrency()));
      }
      out.table = collect_fold_probabilities(plan, roster, data, options);
      out.pool = plan.pool();
      std::sort(out.pool.begin(), out.pool.end());
      out.test = plan.test_ids;
      std::sort(out.test.begin(), out.test.end());
      out.plan = std::move(plan);
      break;
    }
  }
  if (out.pool.empty()) fail(ErrorKind::EmptyInput, "level-1 table has no out-of-fold samples");
  if (out.test.empty()) fail(ErrorKind::EmptyInput, "level-1 table has no test samples");
  return out;
}

RunResult run_pipeline(const RunConfig& config) {
  const auto start = Clock::now();
  auto level1 = build_level_one(config);
  const double level1_seconds = seconds_since(start);
  auto result = run_pipeline(config, std::move(level1));
  result.report.timing["level1"] = level1_seconds;
  result.report.timing["total"] = seconds_since(start);
  return result;
}

RunResult run_pipeline(const RunConfig& config, LevelOne level1) {
  config.validate();
  const auto start = Clock::now();
  RunResult result;
  auto& report = result.report;
  const auto& table = level1.table;
  const std::size_t c = table.class_count();
  const std::size_t T = table.learner_count();

  report.config = config;
  report.seeds = seeds_for(config.seed);
  report.class_count = c;
  report.learner_names = table.learner_names();
  report.fold_count = table.fold_count();
  report.pool_size = level1.pool.size();
  report.test_size = level1.test.size();
  report.warnings = level1.warnings;

  LabelMap pool_labels;
  for (const auto& id : level1.pool) {
    auto y = table.label(id);
    if (!y) fail(ErrorKind::Schema, "training-pool sample '" + id + "' has no label");
    pool_labels[id] = *y;
  }
  LabelMap test_labels;
  for (const auto& id : level1.test) {
    if (auto y = table.label(id)) test_labels[id] = *y;
  }
  const bool labeled = test_labels.size() == level1.test.size();
  report.test_labeled = labeled;
  if (!labeled) report.warnings.push_back("test samples without labels: metrics omitted");

  const auto oof = out_of_fold_table(table, level1.pool);
  const auto test = average_test_probabilities(table, level1.test);

  // Base learners: each fold model alone, then the fold-averaged learner.
  auto stage = Clock::now();
  if (labeled) {
    for (std::size_t t = 0; t < T; ++t) {
      BaseLearnerSummary s;
      s.name = table.learner_names()[t];
      std::vector<double> precision, recall, f1;
      for (std::size_t j = 0; j < table.fold_count(); ++j) {
        const auto e = evaluate(argmax_of(table, t, j, level1.test), test_labels, c, config.averaging);
        s.fold_accuracy.push_back(e.metrics.accuracy);
        precision.push_back(e.metrics.precision);
        recall.push_back(e.metrics.recall);
        f1.push_back(e.metrics.f1);
      }
      s.accuracy = mean_std(s.fold_accuracy);
      s.precision = mean_std(precision);
      s.recall = mean_std(recall);
      s.f1 = mean_std(f1);
      s.averaged = evaluate(argmax_of(test, t, kSingleFold, level1.test), test_labels, c, config.averaging);
      report.base_learners.push_back(std::move(s));
    }
  }

  const auto votes = vote_table(test, level1.test);
  for (const auto& [id, v] : votes) result.vote_predictions[id] = v.predicted;
  if (labeled) report.voting = evaluate(result.vote_predictions, test_labels, c, config.averaging);
  report.timing["voting"] = seconds_since(stage);

  // Main ensemble.
  stage = Clock::now();
  auto stack_config = config.stack_config();
  stack_config.seed = report.seeds.meta;
  auto fit = fit_meta(oof, pool_labels, true, stack_config);
  report.stack.levels = config.levels;
  report.stack.provenance = fit.provenance;
  report.stack.meta_skipped = !fit.stack;
  report.stack.skip_reason = fit.skip_reason;
  if (fit.stack) report.stack.warnings = fit.stack->warnings;
  if (!fit.stack) report.warnings.push_back("meta stage skipped (" + fit.skip_reason + "): predictions are the soft vote");
  report.timing["meta"] = seconds_since(stage);

  stage = Clock::now();
  const MetaStack* stack = fit.stack ? &*fit.stack : nullptr;
  report.stack.modes = route_all(config, test, stack, test_labels, labeled, &result.routed);
  if (stack != nullptr && config.levels == 3) {
    for (std::size_t i = 0; i < stack->level2.size(); ++i) {
      MetaStack alone;
      alone.level2 = {stack->level2[i]};
      report.stack.level2.emplace_back(stack_config.level2[i].name,
                                       route_all(config, test, &alone, test_labels, labeled));
    }
  }
  result.meta = std::move(fit.stack);
  report.timing["routing"] = seconds_since(stage);

  auto two_level = StackConfig::two_level(config.meta);
  two_level.meta_val_fraction = config.meta_val_fraction;
  two_level.seed = report.seeds.meta;

  if (config.ablation && labeled) {
    stage = Clock::now();
    const auto vm_row = [&](std::size_t n) {
      const auto sub_oof = oof.first_learners(n);
      const auto sub_test = test.first_learners(n);
      auto f = fit_meta(sub_oof, pool_labels, true, two_level);
      AblationRow row{n, true, true, !f.stack, f.provenance.retained, {}};
      row.modes = route_all(config, sub_test, f.stack ? &*f.stack : nullptr, test_labels, labeled);
      return row;
    };
    for (std::size_t n = 1; n < T; ++n) report.ablation.push_back(vm_row(n));

    AblationRow vote_only{T, true, false, false, 0, {}};
    vote_only.modes = route_all(config, test, nullptr, test_labels, labeled);
    report.ablation.push_back(std::move(vote_only));

    // Plain stacking: meta trained on every out-of-fold sample and applied to
    // every test sample.
    auto plain = fit_meta(oof, pool_labels, false, two_level);
    AblationRow meta_only{T, false, true, !plain.stack, plain.provenance.retained, {}};
    std::map<SampleId, ClassIndex> plain_pred;
    for (const auto& [id, v] : votes) {
      plain_pred[id] = plain.stack ? argmax_label(plain.stack->predict(build_meta_features(v.per_learner)))
                                   : v.predicted;
    }
    for (auto mode : config.modes) {
      ModeResult r;
      r.mode = mode;
      r.routed = plain.stack ? plain_pred.size() : 0;
      r.evaluation = evaluate(plain_pred, test_labels, c, config.averaging);
      meta_only.modes.push_back(std::move(r));
    }
    report.ablation.push_back(std::move(meta_only));

    report.ablation.push_back(vm_row(T));
    report.timing["ablation"] = seconds_since(stage);
  } else if (config.ablation) {
    report.warnings.push_back("ablation grid skipped: test labels are missing");
  }

  if (config.meta_comparison) {
    stage = Clock::now();
    for (auto kind : {LearnerKind::Softmax, LearnerKind::Knn, LearnerKind::GaussianNb}) {
      auto cfg = two_level;
      cfg.level2.front().kind = kind;
      cfg.level2.front().name = std::string(to_string(kind));
      auto f = fit_meta(oof, pool_labels, true, cfg);
      MetaComparisonRow row{std::string(to_string(kind)), !f.stack, {}};
      row.modes = route_all(config, test, f.stack ? &*f.stack : nullptr, test_labels, labeled);
      report.meta_comparison.push_back(std::move(row));
    }
    report.timing["meta_comparison"] = seconds_since(stage);
  }

  result.level1 = std::move(level1);
  report.timing["total"] = seconds_since(start);
  return result;
}

}  // namespace vstack

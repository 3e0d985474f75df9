#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vstack/core.hpp"
#include "vstack/evaluation.hpp"
#include "vstack/learners.hpp"
#include "vstack/metrics.hpp"
#include "vstack/stacking.hpp"
#include "vstack/synthetic.hpp"

namespace vstack {

/// Where the level-1 probabilities come from.
enum class InputKind {
  Features,           // manifest + feature CSV; base learners are fitted here
  ProbabilityTable,   // cross-validated table written by an external exporter
  SyntheticFeatures,  // make_synthetic
  SyntheticTable,     // make_synthetic_table
};

std::string_view to_string(InputKind kind) noexcept;
InputKind parse_input_kind(std::string_view name);

struct RunConfig {
  InputKind input = InputKind::SyntheticTable;
  std::string manifest_path;
  std::string features_path;
  std::string table_path;
  SyntheticConfig synthetic{};
  SyntheticTableConfig synthetic_table{};

  double test_fraction = 0.2;
  double fold_val_fraction = kDefaultFoldValFraction;
  std::size_t k = 5;
  std::uint64_t seed = 0;
  bool stratified = true;
  bool rebalance = false;

  /// Base learners (feature inputs only). Empty with synthetic features means
  /// one softmax learner per view.
  std::vector<LearnerSpec> learners;
  TrainConfig base_train = default_base_train();

  std::size_t levels = 2;
  LearnerSpec meta = default_meta();
  std::vector<LearnerSpec> level2 = default_level2();  // used when levels == 3
  LearnerSpec super_learner = default_meta();
  double meta_val_fraction = 0.2;

  std::vector<RoutingMode> modes{RoutingMode::LabelGuided, RoutingMode::Disagreement};
  bool ablation = true;
  bool meta_comparison = false;
  Averaging averaging = Averaging::Auto;
  /// Worker threads for fold-model training; 0 picks min(T * k, hardware).
  std::size_t jobs = 0;

  void validate() const;
  StackConfig stack_config() const;

  static TrainConfig default_base_train();
  static LearnerSpec default_meta();
  static std::vector<LearnerSpec> default_level2();

  bool operator==(const RunConfig&) const = default;
};

struct Evaluation {
  MetricsReport metrics;
  ConfusionMatrix confusion;

  bool operator==(const Evaluation&) const = default;
};

Evaluation evaluate(const std::map<SampleId, ClassIndex>& predictions, const LabelMap& labels,
                    std::size_t class_count, Averaging averaging);

struct BaseLearnerSummary {
  std::string name;
  std::vector<double> fold_accuracy;  // one per fold model
  MeanStd accuracy;
  MeanStd precision;
  MeanStd recall;
  MeanStd f1;
  Evaluation averaged;  // on fold-averaged probabilities

  bool operator==(const BaseLearnerSummary&) const = default;
};

struct ModeResult {
  RoutingMode mode = RoutingMode::LabelGuided;
  std::size_t routed = 0;
  std::optional<Evaluation> evaluation;  // absent when test labels are missing

  bool operator==(const ModeResult&) const = default;
};

struct StackSummary {
  bool meta_skipped = false;
  std::string skip_reason;
  MetaProvenance provenance;
  std::size_t levels = 2;
  std::vector<ModeResult> modes;
  /// Levels == 3: each level-2 learner used alone in place of the stack.
  std::vector<std::pair<std::string, std::vector<ModeResult>>> level2;
  std::vector<std::string> warnings;

  bool operator==(const StackSummary&) const = default;
};

struct AblationRow {
  std::size_t learners = 0;
  bool voting = false;
  bool meta = false;
  bool meta_skipped = false;
  std::size_t meta_size = 0;
  std::vector<ModeResult> modes;

  bool operator==(const AblationRow&) const = default;
};

struct MetaComparisonRow {
  std::string learner;
  bool meta_skipped = false;
  std::vector<ModeResult> modes;

  bool operator==(const MetaComparisonRow&) const = default;
};

struct RunSeeds {
  std::uint64_t split = 0;
  std::uint64_t folds = 0;
  std::uint64_t base = 0;
  std::uint64_t meta = 0;

  bool operator==(const RunSeeds&) const = default;
};

struct EvaluationReport {
  RunConfig config;
  RunSeeds seeds;
  std::size_t class_count = 0;
  std::vector<std::string> learner_names;
  std::size_t fold_count = 0;
  std::size_t pool_size = 0;
  std::size_t test_size = 0;
  bool test_labeled = true;

  std::vector<BaseLearnerSummary> base_learners;
  std::optional<Evaluation> voting;
  StackSummary stack;
  std::vector<AblationRow> ablation;
  std::vector<MetaComparisonRow> meta_comparison;
  std::vector<std::string> warnings;
  /// Wall-clock seconds per stage; the only nondeterministic part.
  std::map<std::string, double> timing;

  bool operator==(const EvaluationReport&) const = default;
};

/// Level-1 outputs ready for voting and stacking.
struct LevelOne {
  ProbabilityTable table;  // with fold structure
  std::vector<SampleId> pool;
  std::vector<SampleId> test;
  std::optional<FoldPlan> plan;  // feature inputs only
  std::vector<std::string> warnings;
};

/// Loads or builds the configured input and, for feature inputs, fits the
/// T * k fold models.
LevelOne build_level_one(const RunConfig& config);

/// Everything a run produces besides the report.
struct RunResult {
  EvaluationReport report;
  LevelOne level1;
  std::map<SampleId, ClassIndex> vote_predictions;
  std::map<RoutingMode, RoutedPrediction> routed;
  std::optional<MetaStack> meta;
};

/// Split, folds, base training, voting, meta construction and training,
/// routing in each configured mode, metrics, and the optional grids.
RunResult run_pipeline(const RunConfig& config);
RunResult run_pipeline(const RunConfig& config, LevelOne level1);

/// The fold plan a feature-input run would use (what an exporter needs).
FoldPlan plan_folds(const RunConfig& config);

}  // namespace vstack

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "vstack/core.hpp"
#include "vstack/learners.hpp"
#include "vstack/voting.hpp"

namespace vstack {

/// One meta-learner training row: the T base-learner vectors of a sample laid
/// end to end (length T * c), with the sample's label.
struct MetaSample {
  SampleId source_id;
  std::vector<double> features;
  ClassIndex label = 0;

  bool operator==(const MetaSample&) const = default;
};

struct MetaProvenance {
  bool filtered = true;
  std::size_t source_size = 0;  // m
  std::size_t retained = 0;     // m'

  bool operator==(const MetaProvenance&) const = default;
};

struct MetaDataset {
  std::vector<MetaSample> samples;
  std::size_t learner_count = 0;
  std::size_t class_count = 0;
  MetaProvenance provenance;

  bool empty() const noexcept { return samples.empty(); }
  std::size_t size() const noexcept { return samples.size(); }
  std::size_t feature_dim() const noexcept { return learner_count * class_count; }
  Dataset to_dataset() const;
};

enum class RoutingMode {
  /// Test samples whose vote disagrees with the ground-truth label go to the
  /// meta-learner, mirroring how the meta-training set is built.
  LabelGuided,
  /// Test samples on which the base learners' argmax labels are not
  /// unanimous go to the meta-learner. Uses no labels.
  Disagreement,
};

std::string_view to_string(RoutingMode mode) noexcept;
RoutingMode parse_routing_mode(std::string_view name);

/// Concatenation in learner order.
std::vector<double> build_meta_features(std::span<const ProbabilityVector> per_learner);

/// Meta-training rows for every sample in `labels`. With `filtered`, only
/// samples whose soft vote mispredicts the label are kept; without it every
/// sample is kept (plain stacking).
MetaDataset build_meta_training_set(const ProbabilityTable& table, const LabelMap& labels,
                                    const std::map<SampleId, VoteResult>& votes, bool filtered);

/// Seeded stratified split of meta rows into (train, validation).
std::pair<MetaDataset, MetaDataset> split_meta(const MetaDataset& meta, double val_fraction,
                                               std::uint64_t seed);

FittedLearner train_meta(const MetaDataset& meta, const MetaDataset& meta_val, const LearnerSpec& spec);

/// Level-2 and optional level-3 layout.
struct StackConfig {
  std::vector<LearnerSpec> level2;
  std::optional<LearnerSpec> super_learner;
  double meta_val_fraction = 0.2;
  std::uint64_t seed = 0;

  std::size_t levels() const noexcept { return super_learner ? 3 : 2; }
  static StackConfig two_level(LearnerSpec meta);
};

/// The fitted part of the ensemble above the base learners. With a super
/// learner, the level-2 outputs are concatenated and fed to it; otherwise the
/// single level-2 learner predicts directly.
struct MetaStack {
  std::vector<FittedLearner> level2;
  std::optional<FittedLearner> super_learner;
  std::vector<std::string> warnings;

  ProbabilityVector predict(std::span<const double> meta_features) const;
  std::vector<double> level3_features(std::span<const double> meta_features) const;
};

/// Fits level-2 learners (and the super learner when configured) on `meta`.
/// Throws EmptyMeta on an empty meta-dataset.
MetaStack multilevel_stack(const MetaDataset& meta, const StackConfig& config);

struct RoutedPrediction {
  std::map<SampleId, ClassIndex> predicted;
  std::set<SampleId> routed;
};

/// Routing with labels. `meta == nullptr` means the meta stage was skipped
/// and every sample keeps its vote.
RoutedPrediction predict_label_guided(const ProbabilityTable& test, const MetaStack* meta,
                                        const LabelMap& labels);
/// Routing without labels.
RoutedPrediction predict_disagreement(const ProbabilityTable& test, const MetaStack* meta);

/// Dispatches on `mode`; LabelGuided without `labels` is a Mode error.
RoutedPrediction voting_stacking_predict(const ProbabilityTable& test, const MetaStack* meta,
                                         RoutingMode mode, const LabelMap* labels);

/// Plain two-level stacking fitted in-sample: H(x) = h'(h_1(x), ..., h_T(x)).
struct StackedModel {
  std::vector<FittedLearner> base;
  FittedLearner meta;

  std::vector<double> meta_features(std::span<const double> features) const;
  ProbabilityVector predict_proba(std::span<const double> features) const;
  ClassIndex predict(std::span<const double> features) const;
};

/// Trains each base learner on `train`, builds the unfiltered meta-dataset
/// from their in-sample outputs and trains `meta_spec` on it. `val` feeds
/// softmax model selection at both levels.
StackedModel general_stacking(const Dataset& train, const Dataset& val,
                              std::span<const LearnerSpec> base_specs, const LearnerSpec& meta_spec);

}  // namespace vstack

#include "vstack/stacking.hpp"

#include <algorithm>

#include "vstack/evaluation.hpp"
#include "vstack/random.hpp"

namespace vstack {

Dataset MetaDataset::to_dataset() const {
  std::vector<LabeledSample> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) rows.push_back(LabeledSample{s.source_id, s.features, s.label});
  return Dataset(std::move(rows), class_count, feature_dim());
}

std::string_view to_string(RoutingMode mode) noexcept {
  switch (mode) {
    case RoutingMode::LabelGuided: return "guided";
    case RoutingMode::Disagreement: return "disagreement";
  }
  return "unknown";
}

RoutingMode parse_routing_mode(std::string_view name) {
  if (name == "guided" || name == "label_guided") return RoutingMode::LabelGuided;
  if (name == "disagreement") return RoutingMode::Disagreement;
  fail(ErrorKind::Config, "unknown routing mode '" + std::string(name) + "'");
}

std::vector<double> build_meta_features(std::span<const ProbabilityVector> per_learner) {
  if (per_learner.empty()) fail(ErrorKind::EmptyInput, "meta features: no learner vectors");
  const std::size_t c = per_learner.front().size();
  std::vector<double> out;
  out.reserve(per_learner.size() * c);
  for (const auto& p : per_learner) {
    if (p.size() != c) fail(ErrorKind::Shape, "meta features: learners disagree on class count");
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

MetaDataset build_meta_training_set(const ProbabilityTable& table, const LabelMap& labels,
                                    const std::map<SampleId, VoteResult>& votes, bool filtered) {
  MetaDataset meta;
  meta.learner_count = table.learner_count();
  meta.class_count = table.class_count();
  meta.provenance.filtered = filtered;
  meta.provenance.source_size = labels.size();
  for (const auto& [id, label] : labels) {
    auto vote = votes.find(id);
    if (vote == votes.end()) fail(ErrorKind::IncompleteTable, "meta set: no vote for sample '" + id + "'");
    if (filtered && vote->second.predicted == label) continue;
    const auto vectors = learner_vectors(table, id);
    meta.samples.push_back(MetaSample{id, build_meta_features(vectors), label});
  }
  meta.provenance.retained = meta.samples.size();
  return meta;
}

std::pair<MetaDataset, MetaDataset> split_meta(const MetaDataset& meta, double val_fraction,
                                               std::uint64_t seed) {
  MetaDataset train{{}, meta.learner_count, meta.class_count, meta.provenance};
  MetaDataset val = train;
  std::vector<std::vector<std::size_t>> by_class(meta.class_count);
  for (std::size_t i = 0; i < meta.samples.size(); ++i) by_class[meta.samples[i].label].push_back(i);
  std::vector<std::size_t> counts;
  for (const auto& rows : by_class) counts.push_back(rows.size());
  const auto quota = largest_remainder_quota(counts, val_fraction);

  Rng rng(seed);
  std::vector<bool> to_val(meta.samples.size(), false);
  for (std::size_t r = 0; r < by_class.size(); ++r) {
    rng.shuffle(std::span<std::size_t>(by_class[r]));
    for (std::size_t i = 0; i < quota[r]; ++i) to_val[by_class[r][i]] = true;
  }
  for (std::size_t i = 0; i < meta.samples.size(); ++i) {
    (to_val[i] ? val : train).samples.push_back(meta.samples[i]);
  }
  train.provenance.retained = train.samples.size();
  val.provenance.retained = val.samples.size();
  return {std::move(train), std::move(val)};
}

FittedLearner train_meta(const MetaDataset& meta, const MetaDataset& meta_val, const LearnerSpec& spec) {
  if (meta.empty()) fail(ErrorKind::EmptyMeta, "meta-learner: empty meta-training set");
  if (meta_val.learner_count != meta.learner_count || meta_val.class_count != meta.class_count) {
    fail(ErrorKind::Shape, "meta-learner: validation set shape differs from training set");
  }
  const Dataset train = meta.to_dataset();
  const Dataset val = meta_val.empty() ? Dataset() : meta_val.to_dataset();
  return fit_learner(spec, train, val);
}

StackConfig StackConfig::two_level(LearnerSpec meta) {
  StackConfig cfg;
  cfg.level2.push_back(std::move(meta));
  return cfg;
}

std::vector<double> MetaStack::level3_features(std::span<const double> meta_features) const {
  std::vector<ProbabilityVector> outs;
  outs.reserve(level2.size());
  for (const auto& learner : level2) outs.push_back(learner.predict(meta_features));
  return build_meta_features(outs);
}

ProbabilityVector MetaStack::predict(std::span<const double> meta_features) const {
  if (level2.empty()) fail(ErrorKind::Config, "meta stack has no level-2 learner");
  if (!super_learner) return level2.front().predict(meta_features);
  return super_learner->predict(level3_features(meta_features));
}

namespace {

MetaDataset lift_to_level3(const MetaStack& stack, const MetaDataset& meta) {
  MetaDataset out{{}, stack.level2.size(), meta.class_count, meta.provenance};
  out.samples.reserve(meta.samples.size());
  for (const auto& s : meta.samples) {
    out.samples.push_back(MetaSample{s.source_id, stack.level3_features(s.features), s.label});
  }
  return out;
}

}  // namespace

MetaStack multilevel_stack(const MetaDataset& meta, const StackConfig& config) {
  if (meta.empty()) fail(ErrorKind::EmptyMeta, "meta stack: empty meta-training set");
  if (config.level2.empty()) fail(ErrorKind::Config, "meta stack: no level-2 learner configured");
  if (!config.super_learner && config.level2.size() > 1) {
    fail(ErrorKind::Config, "meta stack: several level-2 learners need a super learner");
  }

  MetaStack stack;
  if (config.super_learner && config.level2.size() == 1) {
    stack.warnings.push_back("single level-2 learner under a super learner: degenerates to identity stacking");
  }

  auto [train, val] = split_meta(meta, config.meta_val_fraction, config.seed);
  const auto shares_class = [&] {
    std::vector<bool> seen(meta.class_count, false);
    for (const auto& s : train.samples) seen[s.label] = true;
    return std::any_of(val.samples.begin(), val.samples.end(), [&](const auto& s) { return seen[s.label]; });
  };
  if (train.empty() || val.empty() || !shares_class()) {
    stack.warnings.push_back("meta-validation split unusable for " + std::to_string(meta.size()) +
                             " rows; validating on the full meta-training set");
    train = meta;
    val = meta;
  }

  for (std::size_t i = 0; i < config.level2.size(); ++i) {
    LearnerSpec spec = config.level2[i];
    spec.train.seed = derive_seed(config.seed, 2, i);
    stack.level2.push_back(train_meta(train, val, spec));
  }
  if (config.super_learner) {
    LearnerSpec spec = *config.super_learner;
    spec.train.seed = derive_seed(config.seed, 3);
    stack.super_learner = train_meta(lift_to_level3(stack, train), lift_to_level3(stack, val), spec);
  }
  return stack;
}

// Routing -----------------------------------------------------------------------------

namespace {

ClassIndex meta_label(const MetaStack& meta, const VoteResult& vote) {
  return argmax_label(meta.predict(build_meta_features(vote.per_learner)));
}

}  // namespace

RoutedPrediction predict_label_guided(const ProbabilityTable& test, const MetaStack* meta,
                                        const LabelMap& labels) {
  const auto ids = test.sample_ids();
  const auto votes = vote_table(test, ids);
  RoutedPrediction out;
  for (const auto& [id, vote] : votes) {
    auto label = labels.find(id);
    if (label == labels.end()) {
      fail(ErrorKind::Mode, "label-guided routing needs a label for test sample '" + id + "'");
    }
    if (meta != nullptr && vote.predicted != label->second) {
      out.routed.insert(id);
      out.predicted[id] = meta_label(*meta, vote);
    } else {
      out.predicted[id] = vote.predicted;
    }
  }
  return out;
}

RoutedPrediction predict_disagreement(const ProbabilityTable& test, const MetaStack* meta) {
  const auto ids = test.sample_ids();
  const auto votes = vote_table(test, ids);
  RoutedPrediction out;
  for (const auto& [id, vote] : votes) {
    const ClassIndex first = argmax_label(vote.per_learner.front());
    const bool unanimous = std::all_of(vote.per_learner.begin(), vote.per_learner.end(),
                                       [&](const auto& p) { return argmax_label(p) == first; });
    if (unanimous) {
      out.predicted[id] = first;
    } else if (meta != nullptr) {
      out.routed.insert(id);
      out.predicted[id] = meta_label(*meta, vote);
    } else {
      out.predicted[id] = vote.predicted;
    }
  }
  return out;
}

RoutedPrediction voting_stacking_predict(const ProbabilityTable& test, const MetaStack* meta,
                                         RoutingMode mode, const LabelMap* labels) {
  switch (mode) {
    case RoutingMode::LabelGuided:
      if (labels == nullptr) fail(ErrorKind::Mode, "label-guided routing requires test labels");
      return predict_label_guided(test, meta, *labels);
    case RoutingMode::Disagreement:
      return predict_disagreement(test, meta);
  }
  fail(ErrorKind::Mode, "unknown routing mode");
}

// Plain stacking ------------------------------------------------------------------------

std::vector<double> StackedModel::meta_features(std::span<const double> features) const {
  std::vector<ProbabilityVector> outs;
  outs.reserve(base.size());
  for (const auto& h : base) outs.push_back(h.predict(features));
  return build_meta_features(outs);
}

ProbabilityVector StackedModel::predict_proba(std::span<const double> features) const {
  return meta.predict(meta_features(features));
}

ClassIndex StackedModel::predict(std::span<const double> features) const {
  return argmax_label(predict_proba(features));
}

StackedModel general_stacking(const Dataset& train, const Dataset& val,
                              std::span<const LearnerSpec> base_specs, const LearnerSpec& meta_spec) {
  if (base_specs.empty()) fail(ErrorKind::Config, "general stacking: no base learners");
  StackedModel model;
  for (const auto& spec : base_specs) model.base.push_back(fit_learner(spec, train, val));

  const auto lift = [&](const Dataset& data) {
    std::vector<LabeledSample> rows;
    rows.reserve(data.size());
    for (const auto& s : data.samples()) rows.push_back({s.id, model.meta_features(s.features), s.label});
    return Dataset(std::move(rows), data.class_count(), base_specs.size() * data.class_count());
  };
  const Dataset meta_train = lift(train);
  const Dataset meta_val = val.empty() ? Dataset() : lift(val);
  model.meta = fit_learner(meta_spec, meta_train, meta_val);
  return model;
}

}  // namespace vstack

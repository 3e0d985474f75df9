#pragma once

#include <cstdint>
#include <vector>

#include "vstack/core.hpp"
#include "vstack/learners.hpp"

namespace vstack {

/// Seeded Gaussian-blob dataset whose features are T concatenated 2-D views,
/// one per base learner. Each learner has its own error region (disjoint
/// across learners, `error_fraction` of the samples each). Inside learner t's
/// region, view t shows the next class's blob (a confident mistake) while the
/// other views place the sample `ambiguity` of the way from its own class
/// centroid toward that next class.
struct SyntheticConfig {
  std::size_t class_count = 3;
  std::size_t learner_count = 3;
  std::size_t samples_per_class = 200;
  double error_fraction = 0.2;
  double ambiguity = 0.45;
  double radius = 4.0;
  double noise = 0.6;
  std::uint64_t seed = 7;

  bool operator==(const SyntheticConfig&) const = default;
};

Dataset make_synthetic(const SyntheticConfig& config);

/// Error region of every sample in a synthetic dataset: the index of the
/// learner whose view lies about it, or -1. Same order as the samples.
std::vector<int> synthetic_error_regions(const SyntheticConfig& config);

/// Softmax learners, learner t restricted to view t.
std::vector<LearnerSpec> synthetic_roster(const SyntheticConfig& config, const TrainConfig& train);

/// Engineered level-1 outputs: a cross-validated probability table as an
/// external exporter would emit it, for T learners with disjoint error
/// regions of `error_fraction` each. Outside its region a learner is
/// confidently right. Inside learner t's region it is confidently wrong
/// (it names the next class), and each of the other learners is either
/// confidently right or, for a `hesitant_fraction` of the region, only
/// marginally right, leaning toward the same wrong class.
struct SyntheticTableConfig {
  std::size_t class_count = 3;
  std::size_t learner_count = 3;
  std::size_t samples_per_class = 200;
  std::size_t folds = 5;
  double test_fraction = 0.2;
  double error_fraction = 0.2;
  double hesitant_fraction = 0.5;
  double confident_logit = 3.0;
  double hesitant_logit = 1.0;
  double hesitant_gap = 0.25;
  double noise = 0.35;
  std::uint64_t seed = 7;

  bool operator==(const SyntheticTableConfig&) const = default;
};

struct SyntheticTable {
  ProbabilityTable table;  // labels set for every sample
  std::vector<SampleId> pool;
  std::vector<SampleId> test;
};

SyntheticTable make_synthetic_table(const SyntheticTableConfig& config);

}  // namespace vstack

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vstack/core.hpp"
#include "vstack/learners.hpp"

namespace vstack {

/// Hamilton apportionment: floor(n_c * fraction) per class, then the seats
/// left to reach round(n * fraction) go to the largest fractional parts
/// (ties to the lower class index).
std::vector<std::size_t> largest_remainder_quota(std::span<const std::size_t> class_counts, double fraction);

struct SplitPlan {
  std::vector<SampleId> train;
  std::vector<SampleId> val;
  std::vector<SampleId> test;
  std::vector<std::string> warnings;
};

/// Per-class stratified split with seeded in-class shuffles. `val_fraction`
/// may be 0 (no validation part).
SplitPlan stratified_split(const Dataset& data, double test_fraction, double val_fraction,
                           std::uint64_t seed);

struct Fold {
  std::vector<SampleId> heldout;  // D_j
  std::vector<SampleId> train;    // D_j complement minus `val`; what the fold models fit on
  std::vector<SampleId> val;      // carved from the D_j complement

  bool operator==(const Fold&) const = default;
};

struct FoldPlan {
  std::vector<SampleId> test_ids;
  std::vector<Fold> folds;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  bool stratified = true;
  std::vector<std::string> warnings;

  /// Every id in the cross-validation pool (union of the heldout sets).
  std::vector<SampleId> pool() const;

  bool operator==(const FoldPlan&) const = default;
};

inline constexpr double kDefaultFoldValFraction = 0.1;

/// Partitions `pool` into k heldout folds. Stratified plans deal each
/// class's shuffled ids round-robin, continuing the fold cursor across
/// classes, so per-class and total fold sizes each differ by at most one.
FoldPlan make_folds(const Dataset& data, std::span<const SampleId> pool, std::size_t k,
                    std::uint64_t seed, bool stratified,
                    double val_fraction = kDefaultFoldValFraction);

/// Duplicates minority-class samples (cycling in dataset order) until every
/// present class matches the largest one. Copies get ids "<id>#dup<n>".
Dataset rebalance_by_duplication(const Dataset& data);

struct CollectOptions {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool rebalance = false;
};

/// Fits every learner on every fold (T * k models). Records out-of-fold
/// vectors for heldout samples under their fold index and every fold model's
/// vector for each test sample.
ProbabilityTable collect_fold_probabilities(const FoldPlan& plan, std::span<const LearnerSpec> learners,
                                            const Dataset& data, const CollectOptions& options);

/// Collapses the fold dimension for `ids` by entrywise averaging across all
/// k fold models. Every fold slice must be present.
ProbabilityTable average_test_probabilities(const ProbabilityTable& table, std::span<const SampleId> ids);

/// Collapses the fold dimension for `ids` by taking the single out-of-fold
/// entry of each (sample, learner).
ProbabilityTable out_of_fold_table(const ProbabilityTable& table, std::span<const SampleId> ids);

/// Sample ids split by fold structure: one entry per learner -> out-of-fold
/// pool; all k entries per learner -> test.
struct TableRoles {
  std::vector<SampleId> pool;
  std::vector<SampleId> test;
};
TableRoles infer_table_roles(const ProbabilityTable& table);

}  // namespace vstack

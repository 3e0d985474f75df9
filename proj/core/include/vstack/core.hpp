#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "vstack/error.hpp"

namespace vstack {

using ClassIndex = std::size_t;
using SampleId = std::string;
using LabelMap = std::map<SampleId, ClassIndex>;

/// Sum tolerance for vectors produced inside the engine.
inline constexpr double kSimplexTolerance = 1e-9;
/// Looser tolerance for tables ingested from external exporters.
inline constexpr double kIngestTolerance = 1e-6;

struct LabeledSample {
  SampleId id;
  std::vector<double> features;
  ClassIndex label = 0;

  bool operator==(const LabeledSample&) const = default;
};

/// An ordered collection of labeled samples sharing one class count and one
/// feature dimension. Construction validates labels, dimensions and id
/// uniqueness.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<LabeledSample> samples, std::size_t class_count,
          std::size_t feature_dim,
          std::vector<std::string> class_names = {});

  const std::vector<LabeledSample>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t class_count() const noexcept { return class_count_; }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }

  const LabeledSample& operator[](std::size_t i) const { return samples_[i]; }
  const LabeledSample& at(const SampleId& id) const;
  bool contains(const SampleId& id) const { return index_.contains(id); }

  /// Samples whose ids are listed, in the listed order.
  Dataset subset(std::span<const SampleId> ids) const;
  /// Same samples with features restricted to columns [first, first + count).
  Dataset project(std::size_t first, std::size_t count) const;

  std::vector<std::size_t> class_counts() const;
  std::size_t distinct_labels() const;
  LabelMap labels() const;

 private:
  std::vector<LabeledSample> samples_;
  std::size_t class_count_ = 0;
  std::size_t feature_dim_ = 0;
  std::vector<std::string> class_names_;
  std::map<SampleId, std::size_t> index_;
};

/// A point on the probability simplex. Only obtainable through validation or
/// through library routines that produce simplex points analytically.
class ProbabilityVector {
 public:
  ProbabilityVector() = default;

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> values() const noexcept { return probs_; }
  auto begin() const noexcept { return probs_.begin(); }
  auto end() const noexcept { return probs_.end(); }

  bool operator==(const ProbabilityVector&) const = default;

  /// One-hot vector of length `size` at `index`.
  static ProbabilityVector one_hot(std::size_t size, std::size_t index);
  /// Uniform vector of length `size`.
  static ProbabilityVector uniform(std::size_t size);

 private:
  friend ProbabilityVector validate_probability_vector(std::span<const double>, double);
  friend ProbabilityVector renormalize_probability_vector(std::span<const double>, double);
  explicit ProbabilityVector(std::vector<double> probs) : probs_(std::move(probs)) {}

  std::vector<double> probs_;
};

/// Accepts `raw` unchanged if every entry is finite and nonnegative and the
/// entries sum to one within `tolerance`. Never renormalizes.
ProbabilityVector validate_probability_vector(std::span<const double> raw,
                                              double tolerance = kSimplexTolerance);

/// Validates against `tolerance`, then divides by the observed sum.
ProbabilityVector renormalize_probability_vector(std::span<const double> raw,
                                                 double tolerance);

/// Lowest index attaining the maximum.
ClassIndex argmax_label(std::span<const double> scores);
inline ClassIndex argmax_label(const ProbabilityVector& p) { return argmax_label(p.values()); }

/// Fold coordinate of a table entry; `std::nullopt` is the "single" slot used
/// by tables that carry no cross-validation structure (or have had the fold
/// dimension collapsed).
using FoldSlot = std::optional<std::size_t>;
inline constexpr FoldSlot kSingleFold = std::nullopt;

struct TableKey {
  SampleId sample_id;
  std::size_t learner = 0;
  FoldSlot fold;

  auto operator<=>(const TableKey& other) const {
    return std::tie(sample_id, learner, fold) <=> std::tie(other.sample_id, other.learner, other.fold);
  }
  bool operator==(const TableKey&) const = default;
};

/// Probability vectors indexed by (sample, learner, fold), together with the
/// optional ground-truth label of each sample.
class ProbabilityTable {
 public:
  ProbabilityTable() = default;
  ProbabilityTable(std::size_t class_count, std::vector<std::string> learner_names,
                   std::size_t fold_count);

  std::size_t class_count() const noexcept { return class_count_; }
  std::size_t learner_count() const noexcept { return learner_names_.size(); }
  std::size_t fold_count() const noexcept { return fold_count_; }
  const std::vector<std::string>& learner_names() const noexcept { return learner_names_; }

  /// Inserts an entry; throws DuplicateRow if the key is present.
  void insert(const TableKey& key, ProbabilityVector p);
  const ProbabilityVector* find(const TableKey& key) const;
  const ProbabilityVector& at(const TableKey& key) const;
  const std::map<TableKey, ProbabilityVector>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  void set_label(const SampleId& id, ClassIndex label);
  std::optional<ClassIndex> label(const SampleId& id) const;
  const LabelMap& labels() const noexcept { return labels_; }

  /// Distinct sample ids in ascending order.
  std::vector<SampleId> sample_ids() const;
  /// Fold slots present for (sample, learner), ascending with "single" first.
  std::vector<FoldSlot> folds_of(const SampleId& id, std::size_t learner) const;

  /// Entries (and labels) restricted to the listed samples.
  ProbabilityTable subset(std::span<const SampleId> ids) const;
  /// Entries restricted to the first `count` learners.
  ProbabilityTable first_learners(std::size_t count) const;

  bool operator==(const ProbabilityTable&) const = default;

 private:
  std::size_t class_count_ = 0;
  std::vector<std::string> learner_names_;
  std::size_t fold_count_ = 0;
  std::map<TableKey, ProbabilityVector> entries_;
  LabelMap labels_;
};

}  // namespace vstack

#include "vstack/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace vstack {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidProbability: return "invalid-probability";
    case ErrorKind::Normalization: return "normalization";
    case ErrorKind::Range: return "range";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::DegenerateSplit: return "degenerate-split";
    case ErrorKind::Config: return "config";
    case ErrorKind::IncompleteTable: return "incomplete-table";
    case ErrorKind::Mode: return "mode";
    case ErrorKind::EmptyMeta: return "empty-meta";
    case ErrorKind::Stratification: return "stratification";
    case ErrorKind::DuplicateRow: return "duplicate-row";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

// Dataset --------------------------------------------------------------------

Dataset::Dataset(std::vector<LabeledSample> samples, std::size_t class_count,
                 std::size_t feature_dim, std::vector<std::string> class_names)
    : samples_(std::move(samples)),
      class_count_(class_count),
      feature_dim_(feature_dim),
      class_names_(std::move(class_names)) {
  if (class_count_ < 2) fail(ErrorKind::Config, "dataset needs at least 2 classes");
  if (!class_names_.empty() && class_names_.size() != class_count_) {
    fail(ErrorKind::Schema, "class_names has " + std::to_string(class_names_.size()) +
                                " entries, expected " + std::to_string(class_count_));
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (s.label >= class_count_) {
      fail(ErrorKind::Range, "sample '" + s.id + "' has label " + std::to_string(s.label) +
                                 " outside [0, " + std::to_string(class_count_) + ")");
    }
    if (s.features.size() != feature_dim_) {
      fail(ErrorKind::Shape, "sample '" + s.id + "' has " + std::to_string(s.features.size()) +
                                 " features, expected " + std::to_string(feature_dim_));
    }
    if (!index_.emplace(s.id, i).second) {
      fail(ErrorKind::DuplicateRow, "duplicate sample id '" + s.id + "'");
    }
  }
}

const LabeledSample& Dataset::at(const SampleId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) fail(ErrorKind::Range, "unknown sample id '" + id + "'");
  return samples_[it->second];
}

Dataset Dataset::subset(std::span<const SampleId> ids) const {
  std::vector<LabeledSample> picked;
  picked.reserve(ids.size());
  for (const auto& id : ids) picked.push_back(at(id));
  return Dataset(std::move(picked), class_count_, feature_dim_, class_names_);
}

Dataset Dataset::project(std::size_t first, std::size_t count) const {
  if (first + count > feature_dim_ || count == 0) {
    fail(ErrorKind::Shape, "feature view [" + std::to_string(first) + ", " +
                               std::to_string(first + count) + ") outside dimension " +
                               std::to_string(feature_dim_));
  }
  std::vector<LabeledSample> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) {
    LabeledSample p{s.id, {}, s.label};
    p.features.assign(s.features.begin() + static_cast<std::ptrdiff_t>(first),
                      s.features.begin() + static_cast<std::ptrdiff_t>(first + count));
    out.push_back(std::move(p));
  }
  return Dataset(std::move(out), class_count_, count, class_names_);
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_count_, 0);
  for (const auto& s : samples_) ++counts[s.label];
  return counts;
}

std::size_t Dataset::distinct_labels() const {
  const auto counts = class_counts();
  return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](auto n) { return n > 0; }));
}

LabelMap Dataset::labels() const {
  LabelMap out;
  for (const auto& s : samples_) out.emplace(s.id, s.label);
  return out;
}

// ProbabilityVector ----------------------------------------------------------

ProbabilityVector ProbabilityVector::one_hot(std::size_t size, std::size_t index) {
  std::vector<double> v(size, 0.0);
  v.at(index) = 1.0;
  return ProbabilityVector(std::move(v));
}

ProbabilityVector ProbabilityVector::uniform(std::size_t size) {
  if (size == 0) fail(ErrorKind::Shape, "uniform vector of size 0");
  return ProbabilityVector(std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

namespace {

double checked_sum(std::span<const double> raw) {
  if (raw.empty()) fail(ErrorKind::Shape, "empty probability vector");
  double sum = 0.0;
  for (std::size_t j = 0; j < raw.size(); ++j) {
    if (!std::isfinite(raw[j])) {
      fail(ErrorKind::InvalidProbability, "non-finite probability at index " + std::to_string(j));
    }
    if (raw[j] < 0.0) {
      std::ostringstream os;
      os << "negative probability " << raw[j] << " at index " << j;
      fail(ErrorKind::Range, os.str());
    }
    sum += raw[j];
  }
  return sum;
}

[[noreturn]] void throw_sum(double sum, double tolerance) {
  std::ostringstream os;
  os.precision(17);
  os << "probabilities sum to " << sum << " (tolerance " << tolerance << ")";
  throw NormalizationError(sum, os.str());
}

}  // namespace

ProbabilityVector validate_probability_vector(std::span<const double> raw, double tolerance) {
  const double sum = checked_sum(raw);
  if (std::abs(sum - 1.0) > tolerance) throw_sum(sum, tolerance);
  return ProbabilityVector(std::vector<double>(raw.begin(), raw.end()));
}

ProbabilityVector renormalize_probability_vector(std::span<const double> raw, double tolerance) {
  const double sum = checked_sum(raw);
  if (std::abs(sum - 1.0) > tolerance) throw_sum(sum, tolerance);
  std::vector<double> v(raw.begin(), raw.end());
  for (auto& x : v) x /= sum;
  return ProbabilityVector(std::move(v));
}

ClassIndex argmax_label(std::span<const double> scores) {
  if (scores.empty()) fail(ErrorKind::Shape, "argmax of an empty vector");
  ClassIndex best = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (!std::isfinite(scores[j])) {
      fail(ErrorKind::InvalidProbability, "non-finite score at index " + std::to_string(j));
    }
    if (scores[j] > scores[best]) best = j;
  }
  return best;
}

// ProbabilityTable -----------------------------------------------------------

ProbabilityTable::ProbabilityTable(std::size_t class_count, std::vector<std::string> learner_names,
                                   std::size_t fold_count)
    : class_count_(class_count), learner_names_(std::move(learner_names)), fold_count_(fold_count) {
  if (class_count_ < 2) fail(ErrorKind::Config, "probability table needs at least 2 classes");
}

namespace {
std::string describe(const TableKey& key) {
  return "(" + key.sample_id + ", learner " + std::to_string(key.learner) + ", fold " +
         (key.fold ? std::to_string(*key.fold) : std::string("single")) + ")";
}
}  // namespace

void ProbabilityTable::insert(const TableKey& key, ProbabilityVector p) {
  if (p.size() != class_count_) {
    fail(ErrorKind::Shape, "vector for " + describe(key) + " has length " + std::to_string(p.size()) +
                               ", table has " + std::to_string(class_count_) + " classes");
  }
  if (key.learner >= learner_names_.size()) {
    fail(ErrorKind::Range, "learner index out of range in " + describe(key));
  }
  if (key.fold && *key.fold >= fold_count_) {
    fail(ErrorKind::Range, "fold index out of range in " + describe(key));
  }
  if (!entries_.emplace(key, std::move(p)).second) {
    fail(ErrorKind::DuplicateRow, "duplicate table entry " + describe(key));
  }
}

const ProbabilityVector* ProbabilityTable::find(const TableKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

const ProbabilityVector& ProbabilityTable::at(const TableKey& key) const {
  if (const auto* p = find(key)) return *p;
  fail(ErrorKind::IncompleteTable, "missing table entry " + describe(key));
}

void ProbabilityTable::set_label(const SampleId& id, ClassIndex label) {
  if (label >= class_count_) {
    fail(ErrorKind::Range, "label " + std::to_string(label) + " for '" + id + "' outside [0, " +
                               std::to_string(class_count_) + ")");
  }
  auto [it, inserted] = labels_.emplace(id, label);
  if (!inserted && it->second != label) {
    fail(ErrorKind::Schema, "conflicting labels for sample '" + id + "'");
  }
}

std::optional<ClassIndex> ProbabilityTable::label(const SampleId& id) const {
  auto it = labels_.find(id);
  if (it == labels_.end()) return std::nullopt;
  return it->second;
}

std::vector<SampleId> ProbabilityTable::sample_ids() const {
  std::vector<SampleId> ids;
  for (const auto& [key, _] : entries_) {
    if (ids.empty() || ids.back() != key.sample_id) ids.push_back(key.sample_id);
  }
  return ids;
}

std::vector<FoldSlot> ProbabilityTable::folds_of(const SampleId& id, std::size_t learner) const {
  std::vector<FoldSlot> out;
  auto it = entries_.lower_bound(TableKey{id, learner, kSingleFold});
  for (; it != entries_.end() && it->first.sample_id == id && it->first.learner == learner; ++it) {
    out.push_back(it->first.fold);
  }
  return out;
}

ProbabilityTable ProbabilityTable::subset(std::span<const SampleId> ids) const {
  ProbabilityTable out(class_count_, learner_names_, fold_count_);
  const std::set<SampleId> wanted(ids.begin(), ids.end());
  for (const auto& [key, p] : entries_) {
    if (wanted.contains(key.sample_id)) out.entries_.emplace(key, p);
  }
  for (const auto& [id, y] : labels_) {
    if (wanted.contains(id)) out.labels_.emplace(id, y);
  }
  return out;
}

ProbabilityTable ProbabilityTable::first_learners(std::size_t count) const {
  if (count == 0 || count > learner_names_.size()) {
    fail(ErrorKind::Config, "cannot take " + std::to_string(count) + " of " +
                                std::to_string(learner_names_.size()) + " learners");
  }
  ProbabilityTable out(class_count_,
                       std::vector<std::string>(learner_names_.begin(),
                                                learner_names_.begin() + static_cast<std::ptrdiff_t>(count)),
                       fold_count_);
  for (const auto& [key, p] : entries_) {
    if (key.learner < count) out.entries_.emplace(key, p);
  }
  out.labels_ = labels_;
  return out;
}

}  // namespace vstack

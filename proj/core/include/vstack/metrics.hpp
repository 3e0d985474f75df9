#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "vstack/core.hpp"

namespace vstack {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t class_count)
      : class_count_(class_count), counts_(class_count * class_count, 0) {}

  std::size_t class_count() const noexcept { return class_count_; }
  std::size_t at(ClassIndex truth, ClassIndex predicted) const {
    return counts_.at(truth * class_count_ + predicted);
  }
  void add(ClassIndex truth, ClassIndex predicted, std::size_t n = 1) {
    counts_.at(truth * class_count_ + predicted) += n;
  }
  std::size_t total() const noexcept;
  std::size_t trace() const noexcept;
  const std::vector<std::size_t>& counts() const noexcept { return counts_; }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t class_count_ = 0;
  std::vector<std::size_t> counts_;
};

/// Evaluates every id in `predictions`; each must have a label.
ConfusionMatrix compute_confusion(const std::map<SampleId, ClassIndex>& predictions, const LabelMap& labels,
                                  std::size_t class_count);

/// How the headline precision/recall/F1 are formed. Auto means Binary (class
/// 1 as the positive class) for two classes and Macro otherwise.
enum class Averaging { Auto, Binary, Macro, Micro, Weighted };

std::string_view to_string(Averaging a) noexcept;
Averaging parse_averaging(std::string_view name);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;

  bool operator==(const ClassMetrics&) const = default;
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Averaging averaging = Averaging::Auto;
  std::vector<ClassMetrics> per_class;
  std::size_t total = 0;
  std::size_t correct = 0;
  std::vector<std::string> warnings;

  bool operator==(const MetricsReport&) const = default;
};

/// One-vs-rest per-class metrics plus averaged headline figures. Undefined
/// ratios (zero denominators) are reported as 0 with a warning.
MetricsReport compute_metrics(const ConfusionMatrix& cm, Averaging averaging = Averaging::Auto);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;

  bool operator==(const MeanStd&) const = default;
};

/// Mean and population standard deviation (divisor n).
MeanStd mean_std(std::span<const double> values);

}  // namespace vstack

#include "vstack/metrics.hpp"

#include <cmath>

namespace vstack {

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t n = 0;
  for (auto v : counts_) n += v;
  return n;
}

std::size_t ConfusionMatrix::trace() const noexcept {
  std::size_t n = 0;
  for (std::size_t r = 0; r < class_count_; ++r) n += counts_[r * class_count_ + r];
  return n;
}

ConfusionMatrix compute_confusion(const std::map<SampleId, ClassIndex>& predictions, const LabelMap& labels,
                                  std::size_t class_count) {
  if (predictions.empty()) fail(ErrorKind::EmptyInput, "confusion: no predictions to evaluate");
  ConfusionMatrix cm(class_count);
  for (const auto& [id, predicted] : predictions) {
    auto it = labels.find(id);
    if (it == labels.end()) fail(ErrorKind::Schema, "confusion: no label for sample '" + id + "'");
    if (predicted >= class_count || it->second >= class_count) {
      fail(ErrorKind::Range, "confusion: class index out of range for sample '" + id + "'");
    }
    cm.add(it->second, predicted);
  }
  return cm;
}

std::string_view to_string(Averaging a) noexcept {
  switch (a) {
    case Averaging::Auto: return "auto";
    case Averaging::Binary: return "binary";
    case Averaging::Macro: return "macro";
    case Averaging::Micro: return "micro";
    case Averaging::Weighted: return "weighted";
  }
  return "unknown";
}

Averaging parse_averaging(std::string_view name) {
  if (name == "auto") return Averaging::Auto;
  if (name == "binary") return Averaging::Binary;
  if (name == "macro") return Averaging::Macro;
  if (name == "micro") return Averaging::Micro;
  if (name == "weighted") return Averaging::Weighted;
  fail(ErrorKind::Config, "unknown averaging '" + std::string(name) + "'");
}

namespace {

double ratio(std::size_t num, std::size_t den, const std::string& what, std::vector<std::string>& warnings) {
  if (den == 0) {
    warnings.push_back(what + " undefined (zero denominator), reported as 0");
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsReport compute_metrics(const ConfusionMatrix& cm, Averaging averaging) {
  const std::size_t c = cm.class_count();
  const std::size_t n = cm.total();
  if (n == 0) fail(ErrorKind::EmptyInput, "metrics: empty evaluation set");
  if (averaging == Averaging::Auto) averaging = c == 2 ? Averaging::Binary : Averaging::Macro;
  if (averaging == Averaging::Binary && c != 2) fail(ErrorKind::Config, "binary averaging needs exactly 2 classes");

  MetricsReport report;
  report.averaging = averaging;
  report.total = n;
  report.correct = cm.trace();
  report.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(n);

  for (std::size_t r = 0; r < c; ++r) {
    std::size_t tp = cm.at(r, r);
    std::size_t predicted = 0;
    std::size_t actual = 0;
    for (std::size_t s = 0; s < c; ++s) {
      predicted += cm.at(s, r);
      actual += cm.at(r, s);
    }
    const std::string cls = "class " + std::to_string(r);
    ClassMetrics m;
    m.support = actual;
    m.precision = ratio(tp, predicted, cls + " precision", report.warnings);
    m.recall = ratio(tp, actual, cls + " recall", report.warnings);
    if (m.precision + m.recall > 0.0) {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
      report.warnings.push_back(cls + " F1 undefined (precision + recall = 0), reported as 0");
    }
    report.per_class.push_back(m);
  }

  switch (averaging) {
    case Averaging::Binary: {
      const auto& pos = report.per_class[1];
      report.precision = pos.precision;
      report.recall = pos.recall;
      report.f1 = pos.f1;
      break;
    }
    case Averaging::Micro:
      // Single-label multiclass: micro precision = micro recall = accuracy.
      report.precision = report.recall = report.f1 = report.accuracy;
      break;
    case Averaging::Macro:
    case Averaging::Weighted: {
      double wsum = 0.0;
      for (const auto& m : report.per_class) {
        const double w = averaging == Averaging::Macro ? 1.0 : static_cast<double>(m.support);
        report.precision += w * m.precision;
        report.recall += w * m.recall;
        report.f1 += w * m.f1;
        wsum += w;
      }
      report.precision /= wsum;
      report.recall /= wsum;
      report.f1 /= wsum;
      break;
    }
    case Averaging::Auto:
      break;
  }
  return report;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::EmptyInput, "mean_std of no values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

}  // namespace vstack

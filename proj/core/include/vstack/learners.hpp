#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vstack/core.hpp"
#include "vstack/optim.hpp"

namespace vstack {

/// Multinomial logistic regression. `weights` is row-major c x (d + 1); the
/// last column of each row is the bias, applied to an implicit constant 1.
struct SoftmaxModel {
  std::size_t class_count = 0;
  std::size_t feature_dim = 0;
  std::vector<double> weights;

  static SoftmaxModel zeros(std::size_t class_count, std::size_t feature_dim);

  std::size_t cols() const noexcept { return feature_dim + 1; }
  double& w(std::size_t r, std::size_t j) { return weights[r * cols() + j]; }
  double w(std::size_t r, std::size_t j) const { return weights[r * cols() + j]; }

  bool operator==(const SoftmaxModel&) const = default;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 60;
  double weight_decay = 0.01;
  PlateauParams scheduler{};
  std::uint64_t seed = 0;

  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

/// Per-epoch trace of a softmax fit.
struct FitHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> learning_rate;
  std::optional<std::size_t> best_epoch;
};

std::vector<double> softmax_logits(const SoftmaxModel& model, std::span<const double> features);
ProbabilityVector softmax_predict(const SoftmaxModel& model, std::span<const double> features);

/// Sum over samples of -log P(y_i | x_i).
double cross_entropy_loss(const SoftmaxModel& model, const Dataset& data);

/// Gradient of cross_entropy_loss with respect to `weights`, same layout.
std::vector<double> loss_gradient(const SoftmaxModel& model, const Dataset& batch);
std::vector<double> loss_gradient(const SoftmaxModel& model, const Dataset& batch,
                                  std::span<const std::size_t> rows);

/// Mini-batch AdamW from zero weights with seeded per-epoch shuffling and a
/// plateau scheduler on validation loss. Returns the lowest-validation-loss
/// snapshot.
SoftmaxModel fit_softmax(const Dataset& train, const Dataset& val, const TrainConfig& config,
                         FitHistory* history = nullptr);

struct KnnModel {
  std::size_t class_count = 0;
  std::size_t neighbors = 5;
  std::vector<LabeledSample> samples;

  bool operator==(const KnnModel&) const = default;
};

KnnModel fit_knn(const Dataset& train, std::size_t neighbors);
/// Label frequencies among the K nearest stored samples (Euclidean; equal
/// distances ordered by sample id).
ProbabilityVector knn_predict(const KnnModel& model, std::span<const double> features);

struct GaussianNbModel {
  std::size_t class_count = 0;
  std::size_t feature_dim = 0;
  std::vector<double> priors;     // c
  std::vector<double> means;      // c x d
  std::vector<double> variances;  // c x d, floored

  bool operator==(const GaussianNbModel&) const = default;
};

GaussianNbModel fit_gaussian_nb(const Dataset& train, double variance_floor = 1e-9);
ProbabilityVector gnb_predict(const GaussianNbModel& model, std::span<const double> features);

// Learner roster --------------------------------------------------------------

enum class LearnerKind { Softmax, Knn, GaussianNb };

std::string_view to_string(LearnerKind kind) noexcept;
LearnerKind parse_learner_kind(std::string_view name);

/// Contiguous block of input columns a learner is restricted to.
struct FeatureView {
  std::size_t first = 0;
  std::size_t count = 0;

  bool operator==(const FeatureView&) const = default;
};

/// What to fit: learner family, its hyperparameters and an optional view.
struct LearnerSpec {
  std::string name;
  LearnerKind kind = LearnerKind::Softmax;
  TrainConfig train{};
  std::size_t neighbors = 5;
  double variance_floor = 1e-9;
  std::optional<FeatureView> view;

  bool operator==(const LearnerSpec&) const = default;
};

/// A fitted learner of any built-in family, plus the view it was fitted on.
struct FittedLearner {
  std::variant<SoftmaxModel, KnnModel, GaussianNbModel> model;
  std::optional<FeatureView> view;

  std::size_t class_count() const;
  ProbabilityVector predict(std::span<const double> features) const;

  bool operator==(const FittedLearner&) const = default;
};

/// Fits `spec` on `train`; `val` drives model selection for softmax and is
/// ignored by the other families. `seed_override` replaces the configured seed.
FittedLearner fit_learner(const LearnerSpec& spec, const Dataset& train, const Dataset& val,
                          std::optional<std::uint64_t> seed_override = std::nullopt);

}  // namespace vstack

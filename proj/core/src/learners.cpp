#include "vstack/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vstack/random.hpp"

namespace vstack {

SoftmaxModel SoftmaxModel::zeros(std::size_t class_count, std::size_t feature_dim) {
  return SoftmaxModel{class_count, feature_dim,
                      std::vector<double>(class_count * (feature_dim + 1), 0.0)};
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorKind::Config, "learning_rate must be positive");
  }
  if (batch_size == 0) fail(ErrorKind::Config, "batch_size must be positive");
  if (weight_decay < 0.0) fail(ErrorKind::Config, "weight_decay must be nonnegative");
  if (!(scheduler.factor > 0.0 && scheduler.factor < 1.0)) {
    fail(ErrorKind::Config, "plateau factor must lie in (0, 1)");
  }
  if (scheduler.min_lr > learning_rate) fail(ErrorKind::Config, "min_lr exceeds learning_rate");
  if (scheduler.patience < 1) fail(ErrorKind::Config, "plateau patience must be >= 1");
}

namespace {

void check_dim(const SoftmaxModel& model, std::span<const double> features) {
  if (features.size() != model.feature_dim) {
    fail(ErrorKind::Shape, "softmax: got " + std::to_string(features.size()) + " features, model expects " +
                               std::to_string(model.feature_dim));
  }
}

void check_dataset(const SoftmaxModel& model, const Dataset& data) {
  if (data.empty()) fail(ErrorKind::EmptyInput, "softmax: empty dataset");
  if (data.feature_dim() != model.feature_dim || data.class_count() != model.class_count) {
    fail(ErrorKind::Shape, "softmax: dataset shape does not match the model");
  }
}

// Writes softmax probabilities into `out` and returns log-sum-exp of the logits.
double softmax_into(const SoftmaxModel& model, std::span<const double> x, std::vector<double>& out) {
  const std::size_t c = model.class_count;
  const std::size_t d = model.feature_dim;
  out.assign(c, 0.0);
  for (std::size_t r = 0; r < c; ++r) {
    const double* row = &model.weights[r * (d + 1)];
    double z = row[d];
    for (std::size_t j = 0; j < d; ++j) z += row[j] * x[j];
    out[r] = z;
  }
  const double peak = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (auto& z : out) {
    z = std::exp(z - peak);
    total += z;
  }
  for (auto& z : out) z /= total;
  return peak + std::log(total);
}

}  // namespace

std::vector<double> softmax_logits(const SoftmaxModel& model, std::span<const double> features) {
  check_dim(model, features);
  const std::size_t d = model.feature_dim;
  std::vector<double> logits(model.class_count);
  for (std::size_t r = 0; r < model.class_count; ++r) {
    double z = model.w(r, d);
    for (std::size_t j = 0; j < d; ++j) z += model.w(r, j) * features[j];
    logits[r] = z;
  }
  return logits;
}

ProbabilityVector softmax_predict(const SoftmaxModel& model, std::span<const double> features) {
  check_dim(model, features);
  std::vector<double> probs;
  softmax_into(model, features, probs);
  return validate_probability_vector(probs);
}

double cross_entropy_loss(const SoftmaxModel& model, const Dataset& data) {
  check_dataset(model, data);
  std::vector<double> scratch;
  double loss = 0.0;
  for (const auto& s : data.samples()) {
    const auto logits = softmax_logits(model, s.features);
    const double peak = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double z : logits) total += std::exp(z - peak);
    loss += peak + std::log(total) - logits[s.label];
  }
  return std::max(loss, 0.0);
}

std::vector<double> loss_gradient(const SoftmaxModel& model, const Dataset& batch,
                                  std::span<const std::size_t> rows) {
  check_dataset(model, batch);
  if (rows.empty()) fail(ErrorKind::EmptyInput, "softmax: empty batch");
  const std::size_t c = model.class_count;
  const std::size_t d = model.feature_dim;
  std::vector<double> grad(model.weights.size(), 0.0);
  std::vector<double> probs;
  for (std::size_t i : rows) {
    const auto& s = batch[i];
    softmax_into(model, s.features, probs);
    probs[s.label] -= 1.0;
    for (std::size_t r = 0; r < c; ++r) {
      double* g = &grad[r * (d + 1)];
      const double residual = probs[r];
      for (std::size_t j = 0; j < d; ++j) g[j] += residual * s.features[j];
      g[d] += residual;
    }
  }
  return grad;
}

std::vector<double> loss_gradient(const SoftmaxModel& model, const Dataset& batch) {
  std::vector<std::size_t> rows(batch.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return loss_gradient(model, batch, rows);
}

SoftmaxModel fit_softmax(const Dataset& train, const Dataset& val, const TrainConfig& config,
                         FitHistory* history) {
  config.validate();
  if (train.empty() || val.empty()) fail(ErrorKind::EmptyInput, "fit_softmax: empty train or validation set");
  if (train.class_count() != val.class_count() || train.feature_dim() != val.feature_dim()) {
    fail(ErrorKind::Shape, "fit_softmax: train and validation shapes differ");
  }
  if (train.distinct_labels() < 2) {
    fail(ErrorKind::DegenerateSplit, "fit_softmax: training set contains a single class");
  }
  {
    const auto tc = train.class_counts();
    const auto vc = val.class_counts();
    bool shared = false;
    for (std::size_t r = 0; r < tc.size(); ++r) shared = shared || (tc[r] > 0 && vc[r] > 0);
    if (!shared) fail(ErrorKind::DegenerateSplit, "fit_softmax: validation set shares no class with training set");
  }

  SoftmaxModel model = SoftmaxModel::zeros(train.class_count(), train.feature_dim());
  if (history) *history = FitHistory{};
  if (config.max_epochs == 0) return model;

  OptimizerState state = OptimizerState::zeros(model.weights.size(), config.learning_rate);
  PlateauScheduler scheduler(config.learning_rate, config.scheduler);
  const AdamWParams hp{.weight_decay = config.weight_decay};
  Rng rng(config.seed);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  SoftmaxModel best = model;
  double best_loss = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const auto grad = loss_gradient(model, train, std::span<const std::size_t>(order).subspan(begin, end - begin));
      adamw_step(state, model.weights, grad, hp);
    }
    const double val_loss = cross_entropy_loss(model, val);
    if (history) {
      history->train_loss.push_back(cross_entropy_loss(model, train));
      history->val_loss.push_back(val_loss);
      history->learning_rate.push_back(state.learning_rate);
    }
    if (val_loss < best_loss) {
      best_loss = val_loss;
      best = model;
      if (history) history->best_epoch = epoch;
    }
    state.learning_rate = scheduler.update(val_loss);
  }
  return best;
}

// k-NN --------------------------------------------------------------------------

KnnModel fit_knn(const Dataset& train, std::size_t neighbors) {
  if (neighbors == 0) fail(ErrorKind::Config, "knn: K must be >= 1");
  if (neighbors > train.size()) {
    fail(ErrorKind::Config, "knn: K = " + std::to_string(neighbors) + " exceeds training size " +
                                std::to_string(train.size()));
  }
  return KnnModel{train.class_count(), neighbors, train.samples()};
}

ProbabilityVector knn_predict(const KnnModel& model, std::span<const double> features) {
  if (model.neighbors == 0 || model.neighbors > model.samples.size()) {
    fail(ErrorKind::Config, "knn: model is not fitted for K = " + std::to_string(model.neighbors));
  }
  struct Candidate {
    double dist;
    const LabeledSample* sample;
  };
  std::vector<Candidate> cands;
  cands.reserve(model.samples.size());
  for (const auto& s : model.samples) {
    if (s.features.size() != features.size()) fail(ErrorKind::Shape, "knn: feature dimension mismatch");
    double dist = 0.0;
    for (std::size_t j = 0; j < features.size(); ++j) {
      const double diff = s.features[j] - features[j];
      dist += diff * diff;
    }
    cands.push_back({dist, &s});
  }
  const auto closer = [](const Candidate& a, const Candidate& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.sample->id < b.sample->id;
  };
  const auto kth = cands.begin() + static_cast<std::ptrdiff_t>(model.neighbors);
  std::partial_sort(cands.begin(), kth, cands.end(), closer);

  std::vector<double> counts(model.class_count, 0.0);
  for (auto it = cands.begin(); it != kth; ++it) counts[it->sample->label] += 1.0;
  for (auto& v : counts) v /= static_cast<double>(model.neighbors);
  return validate_probability_vector(counts);
}

// Gaussian naive Bayes -------------------------------------------------------------

GaussianNbModel fit_gaussian_nb(const Dataset& train, double variance_floor) {
  if (train.empty()) fail(ErrorKind::EmptyInput, "gaussian nb: empty training set");
  if (!(variance_floor > 0.0)) fail(ErrorKind::Config, "gaussian nb: variance floor must be positive");
  const std::size_t c = train.class_count();
  const std::size_t d = train.feature_dim();
  GaussianNbModel m{c, d, std::vector<double>(c, 0.0), std::vector<double>(c * d, 0.0),
                    std::vector<double>(c * d, 0.0)};
  const auto counts = train.class_counts();
  for (const auto& s : train.samples()) {
    for (std::size_t j = 0; j < d; ++j) m.means[s.label * d + j] += s.features[j];
  }
  for (std::size_t r = 0; r < c; ++r) {
    m.priors[r] = static_cast<double>(counts[r]) / static_cast<double>(train.size());
    if (counts[r] == 0) continue;
    for (std::size_t j = 0; j < d; ++j) m.means[r * d + j] /= static_cast<double>(counts[r]);
  }
  for (const auto& s : train.samples()) {
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = s.features[j] - m.means[s.label * d + j];
      m.variances[s.label * d + j] += diff * diff;
    }
  }
  for (std::size_t r = 0; r < c; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      auto& v = m.variances[r * d + j];
      if (counts[r] > 0) v /= static_cast<double>(counts[r]);
      v = std::max(v, variance_floor);
    }
  }
  return m;
}

ProbabilityVector gnb_predict(const GaussianNbModel& model, std::span<const double> features) {
  if (features.size() != model.feature_dim) fail(ErrorKind::Shape, "gaussian nb: feature dimension mismatch");
  constexpr double kLog2Pi = 1.8378770664093453;
  const std::size_t d = model.feature_dim;
  std::vector<double> log_post(model.class_count, -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < model.class_count; ++r) {
    if (model.priors[r] <= 0.0) continue;
    double lp = std::log(model.priors[r]);
    for (std::size_t j = 0; j < d; ++j) {
      const double var = model.variances[r * d + j];
      const double diff = features[j] - model.means[r * d + j];
      lp -= 0.5 * (kLog2Pi + std::log(var)) + diff * diff / (2.0 * var);
    }
    log_post[r] = lp;
  }
  const double peak = *std::max_element(log_post.begin(), log_post.end());
  double total = 0.0;
  for (auto& v : log_post) {
    v = std::isfinite(v) ? std::exp(v - peak) : 0.0;
    total += v;
  }
  for (auto& v : log_post) v /= total;
  return validate_probability_vector(log_post);
}

// Roster ----------------------------------------------------------------------------

std::string_view to_string(LearnerKind kind) noexcept {
  switch (kind) {
    case LearnerKind::Softmax: return "softmax";
    case LearnerKind::Knn: return "knn";
    case LearnerKind::GaussianNb: return "gnb";
  }
  return "unknown";
}

LearnerKind parse_learner_kind(std::string_view name) {
  if (name == "softmax" || name == "lr" || name == "logistic") return LearnerKind::Softmax;
  if (name == "knn") return LearnerKind::Knn;
  if (name == "gnb" || name == "gaussian_nb") return LearnerKind::GaussianNb;
  fail(ErrorKind::Config, "unknown learner kind '" + std::string(name) + "'");
}

std::size_t FittedLearner::class_count() const {
  return std::visit([](const auto& m) { return m.class_count; }, model);
}

ProbabilityVector FittedLearner::predict(std::span<const double> features) const {
  if (view) {
    if (view->first + view->count > features.size()) {
      fail(ErrorKind::Shape, "feature view exceeds input dimension " + std::to_string(features.size()));
    }
    features = features.subspan(view->first, view->count);
  }
  return std::visit(
      [&](const auto& m) -> ProbabilityVector {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, SoftmaxModel>) {
          return softmax_predict(m, features);
        } else if constexpr (std::is_same_v<M, KnnModel>) {
          return knn_predict(m, features);
        } else {
          return gnb_predict(m, features);
        }
      },
      model);
}

FittedLearner fit_learner(const LearnerSpec& spec, const Dataset& train, const Dataset& val,
                          std::optional<std::uint64_t> seed_override) {
  const Dataset* tr = &train;
  const Dataset* va = &val;
  Dataset tr_view;
  Dataset va_view;
  if (spec.view) {
    tr_view = train.project(spec.view->first, spec.view->count);
    tr = &tr_view;
    if (!val.empty()) {
      va_view = val.project(spec.view->first, spec.view->count);
      va = &va_view;
    }
  }
  FittedLearner out;
  out.view = spec.view;
  switch (spec.kind) {
    case LearnerKind::Softmax: {
      TrainConfig cfg = spec.train;
      if (seed_override) cfg.seed = *seed_override;
      out.model = fit_softmax(*tr, *va, cfg);
      break;
    }
    case LearnerKind::Knn:
      out.model = fit_knn(*tr, std::min(spec.neighbors, tr->size()));
      break;
    case LearnerKind::GaussianNb:
      out.model = fit_gaussian_nb(*tr, spec.variance_floor);
      break;
  }
  return out;
}

}  // namespace vstack

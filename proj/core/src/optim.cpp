#include "vstack/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vstack/error.hpp"

namespace vstack {

OptimizerState OptimizerState::zeros(std::size_t size, double learning_rate) {
  return OptimizerState{std::vector<double>(size, 0.0), std::vector<double>(size, 0.0), 0, learning_rate};
}

void adamw_step(OptimizerState& state, std::span<double> params, std::span<const double> grads,
                const AdamWParams& hp) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    fail(ErrorKind::Shape, "adamw: parameter, gradient and state sizes disagree");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      fail(ErrorKind::Numeric, "adamw: non-finite gradient at coordinate " + std::to_string(i));
    }
  }
  if (state.step >= (std::uint64_t{1} << 32)) fail(ErrorKind::Numeric, "adamw: step counter overflow");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(hp.beta1, t);
  const double bias2 = 1.0 - std::pow(hp.beta2, t);
  const double lr = state.learning_rate;
  const double decay = 1.0 - lr * hp.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] *= decay;
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = hp.beta1 * m + (1.0 - hp.beta1) * grads[i];
    v = hp.beta2 * v + (1.0 - hp.beta2) * grads[i] * grads[i];
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + hp.epsilon);
  }
}

PlateauScheduler::PlateauScheduler(double initial_lr, PlateauParams params)
    : params_(params), lr_(initial_lr) {
  if (!(params_.factor > 0.0 && params_.factor < 1.0)) {
    fail(ErrorKind::Config, "plateau factor must lie in (0, 1)");
  }
  if (params_.patience < 1) fail(ErrorKind::Config, "plateau patience must be >= 1");
  if (params_.min_lr > initial_lr) fail(ErrorKind::Config, "min_lr exceeds the initial learning rate");
}

double PlateauScheduler::update(double validation_loss) {
  if (!std::isfinite(validation_loss)) fail(ErrorKind::Numeric, "plateau: non-finite validation loss");
  const bool improved = !std::isfinite(best_) ||
                        validation_loss < best_ - params_.threshold * std::abs(best_);
  if (improved) {
    best_ = validation_loss;
    bad_epochs_ = 0;
    return lr_;
  }
  if (++bad_epochs_ >= params_.patience) {
    lr_ = std::max(lr_ * params_.factor, params_.min_lr);
    bad_epochs_ = 0;
  }
  return lr_;
}

}  // namespace vstack

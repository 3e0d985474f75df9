#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace vstack {

struct AdamWParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

/// Moment accumulators for one flat parameter block.
struct OptimizerState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
  double learning_rate = 0.0;

  static OptimizerState zeros(std::size_t size, double learning_rate);
};

/// One AdamW update in place: decoupled decay p <- p * (1 - lr * wd), then the
/// bias-corrected Adam step. Throws Numeric on a non-finite gradient.
void adamw_step(OptimizerState& state, std::span<double> params, std::span<const double> grads,
                const AdamWParams& hp);

struct PlateauParams {
  int patience = 5;
  double factor = 0.1;
  double min_lr = 1e-7;
  double threshold = 1e-4;  // relative improvement

  bool operator==(const PlateauParams&) const = default;
};

/// Learning-rate reduction when a monitored loss stops improving.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, PlateauParams params);

  /// Records one validation loss and returns the (possibly reduced) rate.
  double update(double validation_loss);

  double learning_rate() const noexcept { return lr_; }
  int bad_epochs() const noexcept { return bad_epochs_; }
  double best() const noexcept { return best_; }

 private:
  PlateauParams params_;
  double lr_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

}  // namespace vstack

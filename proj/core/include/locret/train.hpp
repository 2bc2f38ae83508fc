#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "locret/losses.hpp"
#include "locret/model.hpp"

namespace locret {

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 128;
  std::size_t epochs = 30;
  /// Dropout used for MC scoring.
  double dropout_rate = 0.95;
  /// Dropout used while training; unset means `dropout_rate`.
  std::optional<double> train_dropout_rate;
  /// Learning rate decays linearly to learning_rate * lr_final_fraction by the last step.
  double lr_final_fraction = 1.0;
  std::uint64_t seed = 1;
  LossSpec loss;
  std::size_t hidden = 256;
  bool nonnegative_output = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  double effective_train_dropout() const { return train_dropout_rate.value_or(dropout_rate); }
  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct TrainResult {
  ModelParams params;
  /// Mean loss over the dataset before the first step (same masking as training).
  double initial_loss = 0.0;
  /// Mean training loss per epoch.
  std::vector<double> epoch_loss;
};

/// Per-parameter adaptive moment optimizer.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t size, double beta1, double beta2, double epsilon);
  void step(std::span<double> params, std::span<const double> grad, double learning_rate);
  std::size_t steps() const { return t_; }

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Trains from a fresh seeded initialization. Deterministic given config.seed.
/// Throws DataError on an empty dataset and NumericalError on divergence.
TrainResult train(const TrainConfig& config, const ModelShape& shape,
                  std::span<const TrainingExample> data, const EpochCallback& on_epoch = {});

/// Continues training from existing parameters (fresh optimizer state).
TrainResult train_from(const TrainConfig& config, ModelParams params,
                       std::span<const TrainingExample> data, const EpochCallback& on_epoch = {});

}  // namespace locret

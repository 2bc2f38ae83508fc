#include "locret/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "locret/errors.hpp"
#include "locret/hashing.hpp"

namespace locret {

namespace {

void fill_mask(boost::random::mt19937_64& rng, double rate, DropoutMask& mask) {
  mask.rate = rate;
  for (auto& k : mask.keep) k = to_unit(rng()) >= rate ? 1 : 0;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");
  const double td = effective_train_dropout();
  if (!(td >= 0.0 && td < 1.0)) throw ConfigError("train_dropout_rate must be in [0, 1)");
  if (!(lr_final_fraction >= 0.0 && lr_final_fraction <= 1.0)) {
    throw ConfigError("lr_final_fraction must be in [0, 1]");
  }
  if (!loss.weights.valid()) throw ConfigError("loss weights must be >= 0");
  if (hidden == 0) throw ConfigError("hidden must be >= 1");
}

AdamOptimizer::AdamOptimizer(std::size_t size, double beta1, double beta2, double epsilon)
    : m_(size, 0.0), v_(size, 0.0), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad,
                         double learning_rate) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double inv_c2 = 1.0 / c2;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double gi = grad[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * gi;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * gi * gi;
    params[i] -= learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] * inv_c2) + epsilon_);
  }
}

TrainResult train(const TrainConfig& config, const ModelShape& shape,
                  std::span<const TrainingExample> data, const EpochCallback& on_epoch) {
  return train_from(config, ModelParams::init(shape, hash_combine(config.seed, 0x1a17)), data,
                    on_epoch);
}

TrainResult train_from(const TrainConfig& config, ModelParams params,
                       std::span<const TrainingExample> data, const EpochCallback& on_epoch) {
  config.validate();
  if (data.empty()) throw DataError("train: empty dataset");

  const std::size_t n = data.size();
  const std::size_t hidden = params.shape.hidden;
  const double rate = config.effective_train_dropout();
  boost::random::mt19937_64 rng(hash_combine(config.seed, 0x7a11));

  GradientWorkspace ws(params.shape);
  DropoutMask mask = DropoutMask::all_keep(hidden, rate);
  const bool use_mask = rate > 0.0;

  TrainResult result;
  {
    // Initial loss under the same masking scheme, from an independent stream.
    boost::random::mt19937_64 eval_rng(hash_combine(config.seed, 0xe7a1));
    double sum = 0.0;
    for (const auto& ex : data) {
      if (use_mask) fill_mask(eval_rng, rate, mask);
      sum += total_loss(ex.center, ex.label, forward(params, ex.features, use_mask ? &mask : nullptr),
                        config.loss)
                 .total;
    }
    result.initial_loss = sum / static_cast<double>(n);
  }

  AdamOptimizer adam(params.size(), config.adam_beta1, config.adam_beta2, config.adam_epsilon);
  std::vector<double> grad(params.size(), 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const double total_steps = static_cast<double>(steps_per_epoch * config.epochs);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) {
      boost::random::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(order[i], order[pick(rng)]);
    }
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        if (use_mask) fill_mask(rng, rate, mask);
        epoch_sum += ws.accumulate(params, data[order[b]], use_mask ? &mask : nullptr, config.loss,
                                   weight, grad);
      }
      if (!all_finite(grad)) {
        throw NumericalError("non-finite gradient at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(adam.steps()));
      }
      const double progress = static_cast<double>(adam.steps()) / std::max(1.0, total_steps);
      const double lr =
          config.learning_rate * (1.0 - (1.0 - config.lr_final_fraction) * progress);
      adam.step(params.values, grad, lr);
      if (!params.all_finite()) {
        throw NumericalError("non-finite parameter after step " + std::to_string(adam.steps()));
      }
    }
    const double mean = epoch_sum / static_cast<double>(n);
    if (!std::isfinite(mean)) {
      throw NumericalError("loss diverged at epoch " + std::to_string(epoch));
    }
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace locret

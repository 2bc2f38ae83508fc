#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "locret/errors.hpp"
#include "locret/train.hpp"

using namespace locret;

namespace {

ModelShape small_shape(std::size_t hidden = 16) {
  ModelShape s;
  s.vocab_sizes = {3, 2, 2, 2, 2, 2, 2, 2, 2, 2};
  for (std::size_t i = 0; i < kNumCategorical; ++i) s.embed_dims[i] = embedding_dim(s.vocab_sizes[i]);
  s.hidden = hidden;
  return s;
}

TrainingExample fixed_example() {
  TrainingExample ex;
  ex.features.categorical.fill(1);
  ex.features.continuous.fill(0.5);
  ex.center = {40.0, -100.0};
  ex.label = {40.2, -99.7};
  return ex;
}

std::vector<TrainingExample> noisy_examples(std::size_t n) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0, 0.1);
  std::vector<TrainingExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto ex = fixed_example();
    ex.features.categorical[0] = static_cast<int>(i % 3);
    ex.label = {40 + z(rng), -100 + z(rng)};
    out.push_back(ex);
  }
  return out;
}

}  // namespace

TEST(Adam, MatchesTextbookUpdate) {
  AdamOptimizer opt(2, 0.9, 0.999, 1e-8);
  std::vector<double> p{1.0, -2.0};
  double m[2] = {0, 0}, v[2] = {0, 0};
  std::vector<double> ref = p;
  for (int t = 1; t <= 5; ++t) {
    const std::vector<double> g{0.3 * t, -0.1};
    opt.step(p, g, 0.01);
    for (int i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      ref[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  EXPECT_NEAR(p[0], ref[0], 1e-9);
  EXPECT_NEAR(p[1], ref[1], 1e-9);
  EXPECT_EQ(opt.steps(), 5u);
}

TEST(Train, SingleExampleLossCollapses) {
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 1;
  // Booked at the search center: the optimum is the degenerate box with zero loss.
  auto ex = fixed_example();
  ex.label = ex.center;
  const std::vector<TrainingExample> data{ex};
  const auto r = train(cfg, small_shape(64), data);
  ASSERT_EQ(r.epoch_loss.size(), 200u);
  EXPECT_LT(r.epoch_loss.back(), 0.05 * r.initial_loss);
}

TEST(Train, ZeroLearningRateLeavesParamsUnchanged) {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  const auto shape = small_shape();
  const auto data = noisy_examples(20);
  cfg.seed = 4;
  const auto before = ModelParams::init(shape, 77);
  const auto r = train_from(cfg, before, data);
  EXPECT_EQ(r.params.values, before.values);
}

TEST(Train, SameSeedSameLossCurve) {
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.seed = 21;
  const auto data = noisy_examples(40);
  const auto a = train(cfg, small_shape(), data);
  const auto b = train(cfg, small_shape(), data);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  EXPECT_EQ(a.params.values, b.params.values);
  cfg.seed = 22;
  EXPECT_NE(train(cfg, small_shape(), data).epoch_loss, a.epoch_loss);
}

TEST(Train, EpochCallbackSeesEveryEpoch) {
  TrainConfig cfg;
  cfg.epochs = 3;
  std::vector<std::size_t> seen;
  train(cfg, small_shape(), noisy_examples(10), [&](std::size_t e, double) { seen.push_back(e); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Train, EmptyDatasetIsDataError) {
  TrainConfig cfg;
  EXPECT_THROW(train(cfg, small_shape(), {}), DataError);
}

TEST(Train, NonFiniteLossIsNumericalError) {
  TrainConfig cfg;
  cfg.epochs = 1;
  auto data = noisy_examples(4);
  data[2].label.lat = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(train(cfg, small_shape(), data), NumericalError);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.dropout_rate = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.train_dropout_rate = 0.0;
  EXPECT_EQ(cfg.effective_train_dropout(), 0.0);
  EXPECT_EQ(TrainConfig{}.effective_train_dropout(), 0.95);
}

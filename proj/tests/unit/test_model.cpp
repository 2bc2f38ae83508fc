#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "locret/model.hpp"

using namespace locret;

namespace {

ModelShape tiny_shape() {
  ModelShape s;
  s.vocab_sizes = {4, 3, 3, 2, 2, 2, 2, 2, 2, 2};
  for (std::size_t i = 0; i < kNumCategorical; ++i) s.embed_dims[i] = embedding_dim(s.vocab_sizes[i]);
  s.hidden = 8;
  return s;
}

TrainingExample random_example(const ModelShape& shape, std::mt19937_64& rng) {
  TrainingExample ex;
  for (std::size_t i = 0; i < kNumCategorical; ++i) {
    ex.features.categorical[i] =
        std::uniform_int_distribution<int>(0, static_cast<int>(shape.vocab_sizes[i]) - 1)(rng);
  }
  std::normal_distribution<double> n(0, 1);
  for (auto& v : ex.features.continuous) v = n(rng);
  ex.center = {40 + n(rng), -100 + n(rng)};
  ex.label = {ex.center.lat + 3 * n(rng), ex.center.lng + 3 * n(rng)};
  return ex;
}

}  // namespace

TEST(Model, ZeroParamsGiveSoftplusOfZero) {
  const auto params = ModelParams::zeros(tiny_shape());
  const auto out = forward(params, FeatureVector{});
  for (double v : {out.sw_lat, out.ne_lat, out.sw_lng, out.ne_lng}) {
    EXPECT_NEAR(v, std::log(2.0), 1e-12);
  }
}

TEST(Model, LayoutCoversAllParameters) {
  const auto shape = tiny_shape();
  const ParamLayout layout(shape);
  std::size_t expected = 0;
  for (std::size_t i = 0; i < kNumCategorical; ++i) expected += shape.vocab_sizes[i] * shape.embed_dims[i];
  expected += shape.input_dim() * 8 + 8 + 8 * 8 + 8 + 8 * 4 + 4;
  EXPECT_EQ(layout.total, expected);
  EXPECT_EQ(ModelParams::init(shape, 1).size(), expected);
}

TEST(Model, ForwardIsDeterministic) {
  const auto shape = tiny_shape();
  const auto params = ModelParams::init(shape, 3);
  std::mt19937_64 rng(1);
  const auto ex = random_example(shape, rng);
  DropoutMask mask{{1, 0, 1, 1, 0, 1, 0, 1}, 0.5};
  EXPECT_EQ(forward(params, ex.features, &mask), forward(params, ex.features, &mask));
  EXPECT_EQ(forward(params, ex.features), forward(params, ex.features));
}

TEST(Model, AllKeepMaskAtRateZeroEqualsNoMask) {
  const auto shape = tiny_shape();
  const auto params = ModelParams::init(shape, 3);
  std::mt19937_64 rng(2);
  const auto ex = random_example(shape, rng);
  const auto mask = DropoutMask::all_keep(shape.hidden, 0.0);
  EXPECT_EQ(forward(params, ex.features, &mask), forward(params, ex.features));
}

TEST(Model, RejectsMismatchedInputs) {
  const auto shape = tiny_shape();
  const auto params = ModelParams::init(shape, 3);
  FeatureVector fv;
  fv.categorical[0] = 99;
  EXPECT_THROW(forward(params, fv), std::invalid_argument);
  DropoutMask wrong{{1, 1}, 0.5};
  EXPECT_THROW(forward(params, FeatureVector{}, &wrong), std::invalid_argument);
}

TEST(Model, InitIsSeeded) {
  const auto shape = tiny_shape();
  EXPECT_EQ(ModelParams::init(shape, 9).values, ModelParams::init(shape, 9).values);
  EXPECT_NE(ModelParams::init(shape, 9).values, ModelParams::init(shape, 10).values);
}

TEST(Backward, MatchesFiniteDifferences) {
  const auto shape = tiny_shape();
  std::mt19937_64 rng(11);
  auto params = ModelParams::init(shape, 5);
  std::vector<TrainingExample> batch;
  std::vector<DropoutMask> masks;
  for (int i = 0; i < 3; ++i) {
    batch.push_back(random_example(shape, rng));
    DropoutMask m{std::vector<std::uint8_t>(shape.hidden, 1), 0.25};
    m.keep[static_cast<std::size_t>(i)] = 0;
    masks.push_back(m);
  }
  LossSpec spec;
  const auto lg = backward(params, batch, masks, spec);
  EXPECT_NEAR(lg.loss, batch_loss(params, batch, masks, spec), 1e-9 * std::abs(lg.loss));
  const double eps = 1e-5;
  // Cancellation error of the central difference at this loss magnitude.
  const double roundoff = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(lg.loss) / eps;
  std::size_t checked = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double orig = params.values[k];
    params.values[k] = orig + eps;
    const double up = batch_loss(params, batch, masks, spec);
    params.values[k] = orig - eps;
    const double down = batch_loss(params, batch, masks, spec);
    params.values[k] = orig;
    const double fd = (up - down) / (2 * eps);
    EXPECT_NEAR(lg.gradient[k], fd,
                1e-4 * std::max({std::abs(fd), std::abs(lg.gradient[k]), 1e-2}) + roundoff)
        << "param " << k;
    ++checked;
  }
  EXPECT_EQ(checked, params.size());
}

TEST(Backward, ZeroWeightsGiveZeroGradient) {
  const auto shape = tiny_shape();
  std::mt19937_64 rng(4);
  const auto params = ModelParams::init(shape, 5);
  std::vector<TrainingExample> batch{random_example(shape, rng), random_example(shape, rng)};
  LossSpec spec;
  spec.weights = {0.0, 0.0, 0.0};
  const auto lg = backward(params, batch, {}, spec);
  EXPECT_EQ(lg.loss, 0.0);
  for (double g : lg.gradient) EXPECT_EQ(g, 0.0);
}

TEST(Backward, UntouchedEmbeddingRowsGetZeroGradient) {
  const auto shape = tiny_shape();
  std::mt19937_64 rng(4);
  const auto params = ModelParams::init(shape, 5);
  auto ex = random_example(shape, rng);
  ex.features.categorical[0] = 1;
  const std::vector<TrainingExample> batch{ex};
  const auto lg = backward(params, batch, {}, LossSpec{});
  const std::size_t dim = shape.embed_dims[0];
  for (std::size_t row = 0; row < shape.vocab_sizes[0]; ++row) {
    double norm = 0;
    for (std::size_t d = 0; d < dim; ++d) norm += std::abs(lg.gradient[params.layout.embedding[0] + row * dim + d]);
    if (row == 1) {
      EXPECT_GT(norm, 0.0);
    } else {
      EXPECT_EQ(norm, 0.0) << "row " << row;
    }
  }
}

TEST(Backward, WorkspaceMatchesBackward) {
  const auto shape = tiny_shape();
  std::mt19937_64 rng(8);
  const auto params = ModelParams::init(shape, 5);
  const std::vector<TrainingExample> batch{random_example(shape, rng), random_example(shape, rng)};
  const auto lg = backward(params, batch, {}, LossSpec{});
  GradientWorkspace ws(shape);
  std::vector<double> grad(params.size(), 0.0);
  double loss = 0;
  for (const auto& ex : batch) loss += ws.accumulate(params, ex, nullptr, LossSpec{}, 0.5, grad);
  EXPECT_NEAR(loss / 2, lg.loss, 1e-9 * std::abs(lg.loss));
  for (std::size_t k = 0; k < grad.size(); ++k) EXPECT_NEAR(grad[k], lg.gradient[k], 1e-9);
}

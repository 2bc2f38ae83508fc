#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "locret/featurizer.hpp"
#include "locret/geo.hpp"
#include "locret/losses.hpp"

namespace locret {

/// Network shape: one embedding table per categorical slot, then
/// input -> hidden (ReLU) -> dropout -> hidden (ReLU) -> 4 outputs.
struct ModelShape {
  std::array<std::size_t, kNumCategorical> vocab_sizes{};
  std::array<std::size_t, kNumCategorical> embed_dims{};
  std::size_t hidden = 256;
  /// Softplus on the raw outputs. Disabling it exposes the valid-bounds loss.
  bool nonnegative_output = true;

  static ModelShape for_vocab(const Vocabulary& vocab, std::size_t hidden = 256,
                              bool nonnegative_output = true);

  std::size_t input_dim() const;
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Offsets of each parameter block inside the flat parameter vector.
/// Dense weights are stored input-major: W[i * out + j].
struct ParamLayout {
  std::array<std::size_t, kNumCategorical> embedding{};
  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0, w3 = 0, b3 = 0;
  std::size_t total = 0;

  explicit ParamLayout(const ModelShape& shape);
  ParamLayout() = default;
};

struct ModelParams {
  ModelShape shape;
  ParamLayout layout;
  std::vector<double> values;

  /// He-uniform hidden weights, a small output layer, small uniform embeddings, zero biases.
  static ModelParams init(const ModelShape& shape, std::uint64_t seed);
  static ModelParams zeros(const ModelShape& shape);

  std::size_t size() const { return values.size(); }
  bool all_finite() const;
};

/// Inverted dropout applied to the first hidden layer's activations.
struct DropoutMask {
  std::vector<std::uint8_t> keep;
  double rate = 0.0;

  double scale() const { return 1.0 / (1.0 - rate); }
  static DropoutMask all_keep(std::size_t hidden, double rate = 0.0);
};

struct TrainingExample {
  FeatureVector features;
  GeoPoint center;
  GeoPoint label;
};

/// Forward pass. Without a mask, no dropout and no scaling.
/// Throws std::invalid_argument if the feature vector does not fit the shape.
ExtentOffsets forward(const ModelParams& params, const FeatureVector& fv,
                      const DropoutMask* mask = nullptr);

/// Raw output layer values (before the nonnegativity map).
std::array<double, 4> forward_raw(const ModelParams& params, const FeatureVector& fv,
                                  const DropoutMask* mask = nullptr);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// Mean total loss over the batch, with one mask per example (or none if `masks` is empty).
double batch_loss(const ModelParams& params, std::span<const TrainingExample> batch,
                  std::span<const DropoutMask> masks, const LossSpec& spec);

/// Mean loss and its exact gradient w.r.t. every parameter.
LossAndGradient backward(const ModelParams& params, std::span<const TrainingExample> batch,
                         std::span<const DropoutMask> masks, const LossSpec& spec);

/// Reusable buffers for repeated gradient evaluation; accumulates into `gradient`.
class GradientWorkspace {
 public:
  explicit GradientWorkspace(const ModelShape& shape);

  /// Adds d(loss)/d(params) * weight for one example to `gradient`, returns its loss.
  double accumulate(const ModelParams& params, const TrainingExample& ex, const DropoutMask* mask,
                    const LossSpec& spec, double weight, std::span<double> gradient);

 private:
  std::vector<double> x_, z1_, h1d_, z2_, h2_, dh2_, dz1_;
  std::vector<std::uint32_t> active_;
};

}  // namespace locret

#include "locret/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_real_distribution.hpp>

namespace locret {

namespace {

constexpr std::size_t kOutputs = 4;
constexpr double kEmbeddingInitRange = 0.05;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

ExtentOffsets to_offsets(const std::array<double, 4>& y) { return {y[0], y[1], y[2], y[3]}; }

void check_fits(const ModelParams& params, const FeatureVector& fv) {
  for (std::size_t f = 0; f < kNumCategorical; ++f) {
    const auto idx = fv.categorical[f];
    if (idx < 0 || static_cast<std::size_t>(idx) >= params.shape.vocab_sizes[f]) {
      throw std::invalid_argument("feature vector index out of range for slot " +
                                  std::string(categorical_names()[f]));
    }
  }
  if (params.values.size() != params.layout.total) {
    throw std::invalid_argument("parameter vector does not match its layout");
  }
}

void assemble_input(const ModelParams& p, const FeatureVector& fv, std::vector<double>& x) {
  check_fits(p, fv);
  x.clear();
  for (std::size_t f = 0; f < kNumCategorical; ++f) {
    const std::size_t dim = p.shape.embed_dims[f];
    const double* row = p.values.data() + p.layout.embedding[f] +
                        static_cast<std::size_t>(fv.categorical[f]) * dim;
    x.insert(x.end(), row, row + dim);
  }
  x.insert(x.end(), fv.continuous.begin(), fv.continuous.end());
}

/// Shared forward pass; fills the buffers the backward pass needs.
std::array<double, 4> run_forward(const ModelParams& p, const FeatureVector& fv,
                                  const DropoutMask* mask, std::vector<double>& x,
                                  std::vector<double>& z1, std::vector<double>& h1d,
                                  std::vector<std::uint32_t>& active, std::vector<double>& z2,
                                  std::vector<double>& h2) {
  const std::size_t hidden = p.shape.hidden;
  const double* w = p.values.data();
  const auto& L = p.layout;
  assemble_input(p, fv, x);
  if (mask != nullptr && mask->keep.size() != hidden) {
    throw std::invalid_argument("dropout mask size does not match hidden width");
  }

  z1.assign(w + L.b1, w + L.b1 + hidden);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = w + L.w1 + i * hidden;
    for (std::size_t j = 0; j < hidden; ++j) z1[j] += xi * row[j];
  }

  h1d.assign(hidden, 0.0);
  active.clear();
  const double scale = mask ? mask->scale() : 1.0;
  for (std::size_t i = 0; i < hidden; ++i) {
    if (z1[i] <= 0.0) continue;
    if (mask && !mask->keep[i]) continue;
    h1d[i] = z1[i] * scale;
    active.push_back(static_cast<std::uint32_t>(i));
  }

  z2.assign(w + L.b2, w + L.b2 + hidden);
  for (auto i : active) {
    const double v = h1d[i];
    const double* row = w + L.w2 + i * hidden;
    for (std::size_t j = 0; j < hidden; ++j) z2[j] += v * row[j];
  }
  h2.resize(hidden);
  for (std::size_t j = 0; j < hidden; ++j) h2[j] = z2[j] > 0.0 ? z2[j] : 0.0;

  std::array<double, 4> raw{w[L.b3], w[L.b3 + 1], w[L.b3 + 2], w[L.b3 + 3]};
  for (std::size_t j = 0; j < hidden; ++j) {
    const double v = h2[j];
    if (v == 0.0) continue;
    const double* row = w + L.w3 + j * kOutputs;
    for (std::size_t k = 0; k < kOutputs; ++k) raw[k] += v * row[k];
  }
  return raw;
}

std::array<double, 4> output_map(const ModelShape& shape, const std::array<double, 4>& raw) {
  if (!shape.nonnegative_output) return raw;
  return {softplus(raw[0]), softplus(raw[1]), softplus(raw[2]), softplus(raw[3])};
}

}  // namespace

ModelShape ModelShape::for_vocab(const Vocabulary& vocab, std::size_t hidden,
                                 bool nonnegative_output) {
  ModelShape s;
  s.vocab_sizes = vocab.sizes();
  for (std::size_t f = 0; f < kNumCategorical; ++f) s.embed_dims[f] = embedding_dim(s.vocab_sizes[f]);
  s.hidden = hidden;
  s.nonnegative_output = nonnegative_output;
  return s;
}

std::size_t ModelShape::input_dim() const {
  std::size_t d = kNumContinuous;
  for (auto e : embed_dims) d += e;
  return d;
}

ParamLayout::ParamLayout(const ModelShape& shape) {
  std::size_t off = 0;
  for (std::size_t f = 0; f < kNumCategorical; ++f) {
    embedding[f] = off;
    off += shape.vocab_sizes[f] * shape.embed_dims[f];
  }
  const std::size_t in = shape.input_dim();
  const std::size_t h = shape.hidden;
  w1 = off;
  off += in * h;
  b1 = off;
  off += h;
  w2 = off;
  off += h * h;
  b2 = off;
  off += h;
  w3 = off;
  off += h * kOutputs;
  b3 = off;
  off += kOutputs;
  total = off;
}

ModelParams ModelParams::zeros(const ModelShape& shape) {
  ModelParams p;
  p.shape = shape;
  p.layout = ParamLayout(shape);
  p.values.assign(p.layout.total, 0.0);
  return p;
}

ModelParams ModelParams::init(const ModelShape& shape, std::uint64_t seed) {
  ModelParams p = zeros(shape);
  boost::random::mt19937_64 rng(seed);
  auto fill = [&](std::size_t offset, std::size_t count, double limit) {
    boost::random::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < count; ++i) p.values[offset + i] = dist(rng);
  };
  for (std::size_t f = 0; f < kNumCategorical; ++f) {
    fill(p.layout.embedding[f], shape.vocab_sizes[f] * shape.embed_dims[f], kEmbeddingInitRange);
  }
  const std::size_t in = shape.input_dim();
  const std::size_t h = shape.hidden;
  fill(p.layout.w1, in * h, std::sqrt(6.0 / static_cast<double>(in)));
  fill(p.layout.w2, h * h, std::sqrt(6.0 / static_cast<double>(h)));
  // Small output weights keep the first predictions near softplus(0) degrees.
  fill(p.layout.w3, h * kOutputs, 0.01 * std::sqrt(6.0 / static_cast<double>(h + kOutputs)));
  return p;
}

bool ModelParams::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

DropoutMask DropoutMask::all_keep(std::size_t hidden, double rate) {
  return {std::vector<std::uint8_t>(hidden, 1), rate};
}

std::array<double, 4> forward_raw(const ModelParams& params, const FeatureVector& fv,
                                  const DropoutMask* mask) {
  std::vector<double> x, z1, h1d, z2, h2;
  std::vector<std::uint32_t> active;
  return run_forward(params, fv, mask, x, z1, h1d, active, z2, h2);
}

ExtentOffsets forward(const ModelParams& params, const FeatureVector& fv, const DropoutMask* mask) {
  return to_offsets(output_map(params.shape, forward_raw(params, fv, mask)));
}

GradientWorkspace::GradientWorkspace(const ModelShape& shape) {
  x_.reserve(shape.input_dim());
  z1_.reserve(shape.hidden);
  h1d_.reserve(shape.hidden);
  z2_.reserve(shape.hidden);
  h2_.reserve(shape.hidden);
  dh2_.reserve(shape.hidden);
  dz1_.reserve(shape.hidden);
  active_.reserve(shape.hidden);
}

double GradientWorkspace::accumulate(const ModelParams& p, const TrainingExample& ex,
                                     const DropoutMask* mask, const LossSpec& spec, double weight,
                                     std::span<double> g) {
  const std::size_t hidden = p.shape.hidden;
  const auto& L = p.layout;
  const double* w = p.values.data();

  const auto raw = run_forward(p, ex.features, mask, x_, z1_, h1d_, active_, z2_, h2_);
  const auto out = output_map(p.shape, raw);
  const ExtentOffsets offsets = to_offsets(out);
  const double loss = total_loss(ex.center, ex.label, offsets, spec).total;
  if (weight == 0.0) return loss;

  const auto dout = total_loss_gradient(ex.center, ex.label, offsets, spec);
  std::array<double, 4> draw{};
  for (std::size_t k = 0; k < kOutputs; ++k) {
    draw[k] = weight * dout[k] * (p.shape.nonnegative_output ? sigmoid(raw[k]) : 1.0);
    g[L.b3 + k] += draw[k];
  }

  // Output layer; dh2 is reused as dz2 after the ReLU gate.
  dh2_.assign(hidden, 0.0);
  for (std::size_t j = 0; j < hidden; ++j) {
    const double* wrow = w + L.w3 + j * kOutputs;
    double* grow = g.data() + L.w3 + j * kOutputs;
    const double hj = h2_[j];
    double acc = 0.0;
    for (std::size_t k = 0; k < kOutputs; ++k) {
      grow[k] += hj * draw[k];
      acc += wrow[k] * draw[k];
    }
    dh2_[j] = z2_[j] > 0.0 ? acc : 0.0;
  }
  for (std::size_t j = 0; j < hidden; ++j) g[L.b2 + j] += dh2_[j];

  // Second hidden layer: only surviving first-layer units carry signal.
  const double scale = mask ? mask->scale() : 1.0;
  dz1_.assign(hidden, 0.0);
  for (auto i : active_) {
    const double v = h1d_[i];
    const double* wrow = w + L.w2 + i * hidden;
    double* grow = g.data() + L.w2 + i * hidden;
    double acc = 0.0;
    for (std::size_t j = 0; j < hidden; ++j) {
      grow[j] += v * dh2_[j];
      acc += wrow[j] * dh2_[j];
    }
    dz1_[i] = acc * scale;
    g[L.b1 + i] += dz1_[i];
  }

  // First layer and the input (embedding rows + continuous features).
  std::size_t r = 0;
  for (std::size_t f = 0; f < kNumCategorical; ++f) {
    const std::size_t dim = p.shape.embed_dims[f];
    double* erow =
        g.data() + L.embedding[f] + static_cast<std::size_t>(ex.features.categorical[f]) * dim;
    for (std::size_t d = 0; d < dim; ++d, ++r) {
      const double xr = x_[r];
      const double* wrow = w + L.w1 + r * hidden;
      double* grow = g.data() + L.w1 + r * hidden;
      double acc = 0.0;
      for (auto i : active_) {
        grow[i] += xr * dz1_[i];
        acc += wrow[i] * dz1_[i];
      }
      erow[d] += acc;
    }
  }
  for (; r < x_.size(); ++r) {
    const double xr = x_[r];
    double* grow = g.data() + L.w1 + r * hidden;
    for (auto i : active_) grow[i] += xr * dz1_[i];
  }
  return loss;
}

double batch_loss(const ModelParams& params, std::span<const TrainingExample> batch,
                  std::span<const DropoutMask> masks, const LossSpec& spec) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  if (!masks.empty() && masks.size() != batch.size()) {
    throw std::invalid_argument("batch_loss: one mask per example required");
  }
  double sum = 0.0;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto off = forward(params, batch[n].features, masks.empty() ? nullptr : &masks[n]);
    sum += total_loss(batch[n].center, batch[n].label, off, spec).total;
  }
  return sum / static_cast<double>(batch.size());
}

LossAndGradient backward(const ModelParams& params, std::span<const TrainingExample> batch,
                         std::span<const DropoutMask> masks, const LossSpec& spec) {
  if (batch.empty()) throw std::invalid_argument("backward: empty batch");
  if (!masks.empty() && masks.size() != batch.size()) {
    throw std::invalid_argument("backward: one mask per example required");
  }
  LossAndGradient out;
  out.gradient.assign(params.size(), 0.0);
  GradientWorkspace ws(params.shape);
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    out.loss += weight * ws.accumulate(params, batch[n], masks.empty() ? nullptr : &masks[n], spec,
                                       weight, out.gradient);
  }
  return out;
}

}  // namespace locret

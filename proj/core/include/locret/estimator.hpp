#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "locret/featurizer.hpp"
#include "locret/model.hpp"
#include "locret/train.hpp"

namespace locret {

/// A trained network together with everything needed to score raw requests.
struct Estimator {
  ModelParams params;
  Vocabulary vocab;
  FeatureStats stats;
  TrainConfig config;
  /// Identifies this exact model; seeds the deterministic scoring masks.
  std::string version;

  FeatureVector encode(const SearchRequest& req) const { return locret::encode(req, vocab, stats); }
  std::uint64_t version_hash() const;

  /// Version string derived from the vocabulary, stats and parameter bits.
  static std::string compute_version(const ModelParams& params, const Vocabulary& vocab,
                                     const FeatureStats& stats);
  static Estimator assemble(ModelParams params, Vocabulary vocab, FeatureStats stats,
                            TrainConfig config);
};

struct FitResult {
  Estimator estimator;
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;
};

/// Encodes labeled searches with a given vocabulary/stats.
std::vector<TrainingExample> encode_examples(std::span<const LabeledSearch> data,
                                             const Vocabulary& vocab, const FeatureStats& stats);

/// Builds vocabulary and stats from `data`, then trains a fresh model.
FitResult fit_estimator(const TrainConfig& config, std::span<const LabeledSearch> data,
                        const EpochCallback& on_epoch = {});

/// Binary checkpoint: magic, format version, JSON header (config, vocabulary,
/// stats, shape, version), little-endian float64 parameters, checksum.
void save_checkpoint(const Estimator& est, const std::filesystem::path& path);

/// Throws CorruptFileError for truncated/garbled files and VersionError for an
/// unknown format version or a vocabulary fingerprint other than `expected_vocab`.
Estimator load_checkpoint(const std::filesystem::path& path,
                          std::optional<std::uint64_t> expected_vocab = std::nullopt);

}  // namespace locret

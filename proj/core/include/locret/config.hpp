#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "locret/harness.hpp"
#include "locret/simworld.hpp"

namespace locret {

/// Top-level experiment file. The "seeds" object is required:
///   {"seeds": {"world": 1, "stream": 2, "train": 3},
///    "world": {...}, "loop": {...}, "arms": [...],
///    "offline": {"days": 37, "heldout_days": 7, "train": {...}}}
struct ExperimentConfig {
  std::uint64_t world_seed = 0;
  WorldConfig world;
  LoopConfig loop;
  std::vector<ArmSpec> arms;
  int offline_days = 37;
  int offline_heldout_days = 7;
  /// Training for the offline comparison; its seed is seeds.train.
  TrainConfig offline_train;

  /// Throws ConfigError.
  void validate() const;
};

/// Throws ConfigError on missing seeds or malformed fields.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& c);

}  // namespace locret

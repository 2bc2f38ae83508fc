#include "locret/config.hpp"

#include "locret/errors.hpp"
#include "locret/json_io.hpp"

namespace locret {

void ExperimentConfig::validate() const {
  world.validate();
  loop.validate();
  for (const auto& a : arms) a.validate();
  offline_train.validate();
  if (offline_days < 2) throw ConfigError("offline.days must be >= 2");
  if (offline_heldout_days < 1 || offline_heldout_days >= offline_days) {
    throw ConfigError("offline.heldout_days must be in [1, offline.days)");
  }
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    if (!j.contains("seeds")) throw ConfigError("experiment config: 'seeds' is required");
    const auto& seeds = j.at("seeds");
    for (const char* key : {"world", "stream", "train"}) {
      if (!seeds.contains(key)) {
        throw ConfigError(std::string("experiment config: seeds.") + key + " is required");
      }
    }
    c.world_seed = seeds.at("world").get<std::uint64_t>();
    if (j.contains("world")) j.at("world").get_to(c.world);
    if (j.contains("loop")) j.at("loop").get_to(c.loop);
    c.loop.stream_seed = seeds.at("stream").get<std::uint64_t>();
    c.loop.train_seed = seeds.at("train").get<std::uint64_t>();
    if (j.contains("arms")) c.arms = j.at("arms").get<std::vector<ArmSpec>>();
    if (j.contains("offline")) {
      const auto& o = j.at("offline");
      c.offline_days = o.value("days", c.offline_days);
      c.offline_heldout_days = o.value("heldout_days", c.offline_heldout_days);
      if (o.contains("train")) o.at("train").get_to(c.offline_train);
    }
    c.offline_train.seed = c.loop.train_seed;
    c.loop.train.seed = c.loop.train_seed;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  } catch (const DataError& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_json_file(path));
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["seeds"] = {{"world", c.world_seed},
                {"stream", c.loop.stream_seed},
                {"train", c.loop.train_seed}};
  j["world"] = c.world;
  j["loop"] = c.loop;
  j["arms"] = c.arms;
  j["offline"] = {{"days", c.offline_days},
                  {"heldout_days", c.offline_heldout_days},
                  {"train", c.offline_train}};
  return j;
}

}  // namespace locret

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "locret/estimator.hpp"
#include "locret/featurizer.hpp"
#include "locret/geo.hpp"
#include "locret/losses.hpp"
#include "locret/model.hpp"
#include "locret/train.hpp"

namespace locret {

using json = nlohmann::json;

void to_json(json& j, const GeoPoint& p);
void from_json(const json& j, GeoPoint& p);
void to_json(json& j, const BoundingBox& b);
void from_json(const json& j, BoundingBox& b);
void to_json(json& j, const ExtentOffsets& o);
void from_json(const json& j, ExtentOffsets& o);
void to_json(json& j, const SearchRequest& r);
void from_json(const json& j, SearchRequest& r);
void to_json(json& j, const LabeledSearch& e);
void from_json(const json& j, LabeledSearch& e);
void to_json(json& j, const Vocabulary& v);
void from_json(const json& j, Vocabulary& v);
void to_json(json& j, const FeatureStats& s);
void from_json(const json& j, FeatureStats& s);
void to_json(json& j, const LossWeights& w);
void from_json(const json& j, LossWeights& w);
/// Missing keys keep their defaults.
void to_json(json& j, const TrainConfig& c);
void from_json(const json& j, TrainConfig& c);
void to_json(json& j, const ModelShape& s);
void from_json(const json& j, ModelShape& s);

/// Vocabulary + stats sidecar stored next to checkpoints.
json feature_sidecar(const Vocabulary& vocab, const FeatureStats& stats);

/// Parses a JSON-lines file. Blank lines are skipped; a bad line throws DataError
/// naming the line number.
std::vector<json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);
json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Dataset of labeled searches, one object per line: {"request": ..., "booked": ...}.
std::vector<LabeledSearch> read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const std::vector<LabeledSearch>& data);

}  // namespace locret

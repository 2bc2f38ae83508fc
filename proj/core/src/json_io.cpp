#include "locret/json_io.hpp"

#include <fstream>
#include <sstream>

#include "locret/errors.hpp"

namespace locret {

void to_json(json& j, const GeoPoint& p) { j = json{{"lat", p.lat}, {"lng", p.lng}}; }

void from_json(const json& j, GeoPoint& p) {
  j.at("lat").get_to(p.lat);
  j.at("lng").get_to(p.lng);
}

void to_json(json& j, const BoundingBox& b) { j = json{{"sw", b.sw}, {"ne", b.ne}}; }

void from_json(const json& j, BoundingBox& b) {
  j.at("sw").get_to(b.sw);
  j.at("ne").get_to(b.ne);
}

void to_json(json& j, const ExtentOffsets& o) {
  j = json{{"sw_lat", o.sw_lat}, {"ne_lat", o.ne_lat}, {"sw_lng", o.sw_lng}, {"ne_lng", o.ne_lng}};
}

void from_json(const json& j, ExtentOffsets& o) {
  j.at("sw_lat").get_to(o.sw_lat);
  j.at("ne_lat").get_to(o.ne_lat);
  j.at("sw_lng").get_to(o.sw_lng);
  j.at("ne_lng").get_to(o.ne_lng);
}

void to_json(json& j, const SearchRequest& r) {
  j = json{{"location_id", r.location_id},
           {"metro_id", r.metro_id},
           {"country_code", r.country_code},
           {"location_type", std::string(to_string(r.location_type))},
           {"guests", r.guests},
           {"is_mobile_app", r.is_mobile_app},
           {"device_type", r.device_type},
           {"lead_days", r.lead_days},
           {"trip_length_nights", r.trip_length_nights},
           {"is_weekend_trip", r.is_weekend_trip},
           {"checkin_day_of_year", r.checkin_day_of_year},
           {"checkout_day_of_year", r.checkout_day_of_year},
           {"search_day_of_year", r.search_day_of_year},
           {"center", r.center},
           {"admin_bounds", r.admin_bounds ? json(*r.admin_bounds) : json(nullptr)},
           {"search_day_index", r.search_day_index},
           {"guest_id", r.guest_id}};
}

void from_json(const json& j, SearchRequest& r) {
  j.at("location_id").get_to(r.location_id);
  r.metro_id = j.value("metro_id", std::string{});
  r.country_code = j.value("country_code", std::string{});
  r.location_type = location_type_from_string(j.at("location_type").get<std::string>());
  j.at("guests").get_to(r.guests);
  r.is_mobile_app = j.value("is_mobile_app", false);
  r.device_type = j.value("device_type", std::string{});
  j.at("lead_days").get_to(r.lead_days);
  j.at("trip_length_nights").get_to(r.trip_length_nights);
  r.is_weekend_trip = j.value("is_weekend_trip", false);
  j.at("checkin_day_of_year").get_to(r.checkin_day_of_year);
  j.at("checkout_day_of_year").get_to(r.checkout_day_of_year);
  j.at("search_day_of_year").get_to(r.search_day_of_year);
  j.at("center").get_to(r.center);
  if (auto it = j.find("admin_bounds"); it != j.end() && !it->is_null()) {
    r.admin_bounds = it->get<BoundingBox>();
  } else {
    r.admin_bounds.reset();
  }
  r.search_day_index = j.value("search_day_index", 0);
  r.guest_id = j.value("guest_id", std::uint64_t{0});
}

void to_json(json& j, const LabeledSearch& e) {
  j = json{{"request", e.request}, {"booked", e.booked}};
}

void from_json(const json& j, LabeledSearch& e) {
  j.at("request").get_to(e.request);
  j.at("booked").get_to(e.booked);
}

void to_json(json& j, const Vocabulary& v) {
  j = json::object();
  for (std::size_t f = 0; f < kNumCategorical; ++f) {
    j[std::string(categorical_names()[f])] = v.tokens(f);
  }
}

void from_json(const json& j, Vocabulary& v) {
  std::array<std::vector<std::string>, kNumCategorical> tokens;
  for (std::size_t f = 0; f < kNumCategorical; ++f) {
    j.at(std::string(categorical_names()[f])).get_to(tokens[f]);
  }
  v = Vocabulary::from_tokens(std::move(tokens));
}

void to_json(json& j, const FeatureStats& s) {
  j = json{{"names", continuous_names()}, {"mean", s.mean}, {"std", s.stddev}};
}

void from_json(const json& j, FeatureStats& s) {
  j.at("mean").get_to(s.mean);
  j.at("std").get_to(s.stddev);
}

void to_json(json& j, const LossWeights& w) {
  j = json{{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}};
}

void from_json(const json& j, LossWeights& w) {
  w.alpha = j.value("alpha", w.alpha);
  w.beta = j.value("beta", w.beta);
  w.gamma = j.value("gamma", w.gamma);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"learning_rate", c.learning_rate},
           {"batch_size", c.batch_size},
           {"epochs", c.epochs},
           {"dropout_rate", c.dropout_rate},
           {"train_dropout_rate",
            c.train_dropout_rate ? json(*c.train_dropout_rate) : json(nullptr)},
           {"lr_final_fraction", c.lr_final_fraction},
           {"seed", c.seed},
           {"loss_weights", c.loss.weights},
           {"bl_loss_mode", std::string(to_string(c.loss.mode))},
           {"hidden", c.hidden},
           {"nonnegative_output", c.nonnegative_output},
           {"adam_beta1", c.adam_beta1},
           {"adam_beta2", c.adam_beta2},
           {"adam_epsilon", c.adam_epsilon}};
}

void from_json(const json& j, TrainConfig& c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  if (auto it = j.find("train_dropout_rate"); it != j.end()) {
    if (it->is_null()) {
      c.train_dropout_rate.reset();
    } else {
      c.train_dropout_rate = it->get<double>();
    }
  }
  c.lr_final_fraction = j.value("lr_final_fraction", c.lr_final_fraction);
  c.seed = j.value("seed", c.seed);
  if (auto it = j.find("loss_weights"); it != j.end()) it->get_to(c.loss.weights);
  if (auto it = j.find("bl_loss_mode"); it != j.end()) {
    c.loss.mode = bl_mode_from_string(it->get<std::string>());
  }
  c.hidden = j.value("hidden", c.hidden);
  c.nonnegative_output = j.value("nonnegative_output", c.nonnegative_output);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
}

void to_json(json& j, const ModelShape& s) {
  j = json{{"vocab_sizes", s.vocab_sizes},
           {"embed_dims", s.embed_dims},
           {"hidden", s.hidden},
           {"nonnegative_output", s.nonnegative_output}};
}

void from_json(const json& j, ModelShape& s) {
  j.at("vocab_sizes").get_to(s.vocab_sizes);
  j.at("embed_dims").get_to(s.embed_dims);
  j.at("hidden").get_to(s.hidden);
  j.at("nonnegative_output").get_to(s.nonnegative_output);
}

json feature_sidecar(const Vocabulary& vocab, const FeatureStats& stats) {
  return json{{"vocabulary", vocab},
              {"continuous_stats", stats},
              {"vocab_fingerprint", vocab.fingerprint()}};
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
  std::ostringstream out;
  for (const auto& r : rows) out << r.dump() << '\n';
  write_text_file(path, out.str());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<LabeledSearch> read_dataset(const std::filesystem::path& path) {
  std::vector<LabeledSearch> data;
  std::size_t lineno = 0;
  for (const auto& row : read_jsonl(path)) {
    ++lineno;
    try {
      data.push_back(row.get<LabeledSearch>());
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": example " + std::to_string(lineno) + ": " + e.what());
    }
    if (!data.back().request.valid() || !data.back().booked.valid()) {
      throw DataError(path.string() + ": example " + std::to_string(lineno) + " is invalid");
    }
  }
  return data;
}

void write_dataset(const std::filesystem::path& path, const std::vector<LabeledSearch>& data) {
  std::vector<json> rows;
  rows.reserve(data.size());
  for (const auto& e : data) rows.emplace_back(e);
  write_jsonl(path, rows);
}

}  // namespace locret

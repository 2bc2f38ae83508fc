#include "locret/featurizer.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "locret/errors.hpp"
#include "locret/hashing.hpp"

namespace locret {

namespace {

constexpr double kDaysPerCycle = 366.0;

constexpr std::array<std::string_view, 8> kTypeNames = {
    "country", "state", "city", "neighborhood", "street", "address", "poi", "building"};

std::string cell_id(const GeoPoint& p, double cell_deg) {
  const auto row = static_cast<long>(std::floor(p.lat / cell_deg));
  const auto col = static_cast<long>(std::floor(p.lng / cell_deg));
  return std::to_string(row) + ":" + std::to_string(col);
}

std::string_view granularity(LocationType t) {
  switch (t) {
    case LocationType::kCountry:
    case LocationType::kState:
      return "region";
    case LocationType::kCity:
      return "city";
    case LocationType::kNeighborhood:
    case LocationType::kStreet:
      return "local";
    case LocationType::kAddress:
    case LocationType::kPoi:
    case LocationType::kBuilding:
      return "point";
  }
  return "unknown";
}

std::string admin_size_bucket(const std::optional<BoundingBox>& admin) {
  if (!admin) return "none";
  const double diag = box_size_km(*admin).diagonal_km;
  return std::to_string(static_cast<int>(std::floor(std::log2(diag + 1.0))));
}

}  // namespace

std::string_view to_string(LocationType t) { return kTypeNames[static_cast<std::size_t>(t)]; }

LocationType location_type_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == s) return static_cast<LocationType>(i);
  }
  throw DataError("unknown location_type: " + std::string(s));
}

bool SearchRequest::valid() const {
  return center.valid() && guests >= 1 && trip_length_nights >= 1 && lead_days >= 0 &&
         checkout_day_of_year > checkin_day_of_year && checkin_day_of_year >= 1 &&
         checkout_day_of_year <= 366 && search_day_of_year >= 1 &&
         search_day_of_year <= 366 && (!admin_bounds || admin_bounds->valid());
}

std::string surface_cell_id(const GeoPoint& p) { return cell_id(p, 0.5); }

std::array<std::string, kNumCategorical> categorical_values(const SearchRequest& req) {
  return {req.location_id,
          req.metro_id,
          surface_cell_id(req.center),
          std::string(to_string(req.location_type)),
          req.country_code,
          req.device_type,
          std::string(granularity(req.location_type)),
          admin_size_bucket(req.admin_bounds),
          req.admin_bounds ? "1" : "0",
          cell_id(req.center, 2.0)};
}

const std::array<std::string_view, kNumCategorical>& categorical_names() {
  static constexpr std::array<std::string_view, kNumCategorical> names = {
      "location_id",  "metro_id",          "surface_cell_id",  "location_type",
      "country_code", "device_type",       "granularity",      "admin_size_bucket",
      "has_admin_bounds", "coarse_cell_id"};
  return names;
}

std::array<double, kNumContinuous> raw_continuous(const SearchRequest& req) {
  const double w = 2.0 * std::numbers::pi / kDaysPerCycle;
  return {static_cast<double>(req.guests),
          req.is_mobile_app ? 1.0 : 0.0,
          static_cast<double>(req.lead_days),
          static_cast<double>(req.trip_length_nights),
          req.is_weekend_trip ? 1.0 : 0.0,
          std::sin(w * req.checkin_day_of_year),
          std::cos(w * req.checkin_day_of_year),
          std::sin(w * req.search_day_of_year),
          std::cos(w * req.search_day_of_year)};
}

const std::array<std::string_view, kNumContinuous>& continuous_names() {
  static constexpr std::array<std::string_view, kNumContinuous> names = {
      "guests",      "is_mobile_app", "lead_days",   "trip_length_nights", "is_weekend_trip",
      "checkin_sin", "checkin_cos",   "search_sin",  "search_cos"};
  return names;
}

void Vocabulary::add(std::size_t feature, const std::string& value) {
  auto [it, inserted] =
      lookup_[feature].try_emplace(value, static_cast<std::int32_t>(tokens_[feature].size() + 1));
  if (inserted) tokens_[feature].push_back(value);
}

Vocabulary Vocabulary::build(std::span<const SearchRequest> corpus) {
  if (corpus.empty()) throw DataError("build_vocab: empty corpus");
  Vocabulary v;
  for (const auto& req : corpus) {
    const auto values = categorical_values(req);
    for (std::size_t f = 0; f < kNumCategorical; ++f) v.add(f, values[f]);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::array<std::vector<std::string>, kNumCategorical> tokens) {
  Vocabulary v;
  for (std::size_t f = 0; f < kNumCategorical; ++f) {
    for (const auto& t : tokens[f]) v.add(f, t);
    if (v.tokens_[f].size() != tokens[f].size()) {
      throw DataError("vocabulary: duplicate token in feature " +
                      std::string(categorical_names()[f]));
    }
  }
  return v;
}

std::int32_t Vocabulary::index(std::size_t feature, const std::string& value) const {
  const auto& m = lookup_[feature];
  const auto it = m.find(value);
  return it == m.end() ? 0 : it->second;
}

std::array<std::size_t, kNumCategorical> Vocabulary::sizes() const {
  std::array<std::size_t, kNumCategorical> out{};
  for (std::size_t f = 0; f < kNumCategorical; ++f) out[f] = size(f);
  return out;
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = fnv1a64("locret-vocab");
  for (std::size_t f = 0; f < kNumCategorical; ++f) {
    h = hash_combine(h, tokens_[f].size());
    for (const auto& t : tokens_[f]) h = hash_combine(h, fnv1a64(t));
  }
  return h;
}

FeatureStats FeatureStats::compute(std::span<const SearchRequest> corpus) {
  if (corpus.empty()) throw DataError("feature stats: empty corpus");
  FeatureStats s;
  std::array<double, kNumContinuous> sum{};
  std::array<double, kNumContinuous> sum_sq{};
  for (const auto& req : corpus) {
    const auto x = raw_continuous(req);
    for (std::size_t i = 0; i < kNumContinuous; ++i) sum[i] += x[i];
  }
  const double n = static_cast<double>(corpus.size());
  for (std::size_t i = 0; i < kNumContinuous; ++i) s.mean[i] = sum[i] / n;
  for (const auto& req : corpus) {
    const auto x = raw_continuous(req);
    for (std::size_t i = 0; i < kNumContinuous; ++i) {
      const double d = x[i] - s.mean[i];
      sum_sq[i] += d * d;
    }
  }
  for (std::size_t i = 0; i < kNumContinuous; ++i) {
    // A constant slot is only centered; dividing later variation by the floor explodes it.
    const double sd = std::sqrt(sum_sq[i] / n);
    s.stddev[i] = sd < kStdFloor ? 1.0 : sd;
  }
  return s;
}

std::uint64_t FeatureVector::canonical_hash() const {
  std::uint64_t h = fnv1a64("locret-fv");
  for (auto idx : categorical) h = hash_combine(h, static_cast<std::uint64_t>(idx));
  for (double x : continuous) h = hash_double(h, x);
  return h;
}

FeatureVector encode(const SearchRequest& req, const Vocabulary& vocab, const FeatureStats& stats) {
  FeatureVector fv;
  const auto cats = categorical_values(req);
  for (std::size_t f = 0; f < kNumCategorical; ++f) fv.categorical[f] = vocab.index(f, cats[f]);
  const auto raw = raw_continuous(req);
  for (std::size_t i = 0; i < kNumContinuous; ++i) {
    fv.continuous[i] = (raw[i] - stats.mean[i]) / std::max(stats.stddev[i], FeatureStats::kStdFloor);
  }
  return fv;
}

std::size_t embedding_dim(std::size_t cardinality) {
  const double d = std::ceil(1.6 * std::pow(static_cast<double>(cardinality), 0.25));
  return std::min<std::size_t>(16, static_cast<std::size_t>(d));
}

}  // namespace locret

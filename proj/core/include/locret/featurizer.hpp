#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "locret/geo.hpp"

namespace locret {

enum class LocationType : std::uint8_t {
  kCountry,
  kState,
  kCity,
  kNeighborhood,
  kStreet,
  kAddress,
  kPoi,
  kBuilding,
};

std::string_view to_string(LocationType t);
LocationType location_type_from_string(std::string_view s);

struct SearchRequest {
  std::string location_id;
  std::string metro_id;
  std::string country_code;
  LocationType location_type = LocationType::kCity;
  int guests = 1;
  bool is_mobile_app = false;
  std::string device_type;
  int lead_days = 0;
  int trip_length_nights = 1;
  bool is_weekend_trip = false;
  int checkin_day_of_year = 1;
  int checkout_day_of_year = 2;
  int search_day_of_year = 1;
  GeoPoint center;
  std::optional<BoundingBox> admin_bounds;
  /// Simulation day; used for attribution, never as a model input.
  int search_day_index = 0;
  /// Searcher identity; used for attribution, never as a model input.
  std::uint64_t guest_id = 0;

  /// Checks the request invariants (dates ordered, counts positive, center valid).
  bool valid() const;
  friend bool operator==(const SearchRequest&, const SearchRequest&) = default;
};

/// Grid cell (0.5 deg) containing a point, formatted "row:col".
std::string surface_cell_id(const GeoPoint& p);

inline constexpr std::size_t kNumCategorical = 10;
inline constexpr std::size_t kNumContinuous = 9;

/// Categorical slots, in model input order.
///   0 location_id      1 metro_id          2 surface_cell_id   3 location_type
///   4 country_code     5 device_type       6 granularity       7 admin_size_bucket
///   8 has_admin_bounds 9 coarse_cell_id (2 deg)
/// Slots 6-9 are derived descriptors of the searched location.
std::array<std::string, kNumCategorical> categorical_values(const SearchRequest& req);
const std::array<std::string_view, kNumCategorical>& categorical_names();

/// Continuous slots before standardization:
///   guests, is_mobile_app, lead_days, trip_length_nights, is_weekend_trip,
///   sin/cos(2 pi checkin_doy / 366), sin/cos(2 pi search_doy / 366)
std::array<double, kNumContinuous> raw_continuous(const SearchRequest& req);
const std::array<std::string_view, kNumContinuous>& continuous_names();

/// Per-feature map from raw ID to dense index. Index 0 is out-of-vocabulary.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// First-seen order over `corpus`. Throws DataError on an empty corpus.
  static Vocabulary build(std::span<const SearchRequest> corpus);
  /// Rebuilds from per-feature token lists (index i+1 for token i).
  static Vocabulary from_tokens(std::array<std::vector<std::string>, kNumCategorical> tokens);

  std::int32_t index(std::size_t feature, const std::string& value) const;
  /// Number of rows including the OOV row.
  std::size_t size(std::size_t feature) const { return tokens_[feature].size() + 1; }
  std::array<std::size_t, kNumCategorical> sizes() const;
  const std::vector<std::string>& tokens(std::size_t feature) const { return tokens_[feature]; }

  /// Stable 64-bit fingerprint of the token lists.
  std::uint64_t fingerprint() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  void add(std::size_t feature, const std::string& value);

  std::array<std::vector<std::string>, kNumCategorical> tokens_;
  std::array<std::unordered_map<std::string, std::int32_t>, kNumCategorical> lookup_;
};

/// Standardization table for the continuous slots.
struct FeatureStats {
  static constexpr double kStdFloor = 1e-6;

  std::array<double, kNumContinuous> mean{};
  std::array<double, kNumContinuous> stddev{};

  /// Population mean/std over the corpus. A slot whose std is below kStdFloor
  /// (constant in the corpus) gets std 1, so it is centered but not scaled.
  static FeatureStats compute(std::span<const SearchRequest> corpus);
  friend bool operator==(const FeatureStats&, const FeatureStats&) = default;
};

struct FeatureVector {
  std::array<std::int32_t, kNumCategorical> categorical{};
  std::array<double, kNumContinuous> continuous{};

  /// Hash of the exact encoding (indices and bit patterns).
  std::uint64_t canonical_hash() const;
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

FeatureVector encode(const SearchRequest& req, const Vocabulary& vocab, const FeatureStats& stats);

/// min(16, ceil(1.6 * cardinality^0.25))
std::size_t embedding_dim(std::size_t cardinality);

/// A search paired with the location of the listing it was attributed a booking for.
struct LabeledSearch {
  SearchRequest request;
  GeoPoint booked;
  friend bool operator==(const LabeledSearch&, const LabeledSearch&) = default;
};

}  // namespace locret

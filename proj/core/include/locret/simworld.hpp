#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "locret/featurizer.hpp"
#include "locret/geo.hpp"
#include "locret/grid_index.hpp"

namespace locret {

struct Listing {
  std::uint32_t listing_id = 0;
  GeoPoint location;
  int capacity = 1;
  double nightly_price = 0.0;
  std::string destination_id;
  friend bool operator==(const Listing&, const Listing&) = default;
};

/// One Gaussian blob of booking intent around a destination.
struct MixtureComponent {
  GeoPoint mean;
  double std_lat_deg = 0.0;
  double std_lng_deg = 0.0;
  double weight = 1.0;
  /// Log-weight added per guest above two; positive values pull large groups here.
  double guest_modifier = 0.0;
  friend bool operator==(const MixtureComponent&, const MixtureComponent&) = default;
};

struct Destination {
  std::string location_id;
  LocationType location_type = LocationType::kCity;
  std::string metro_id;
  std::string country_code;
  GeoPoint center;
  BoundingBox admin_bounds;
  std::vector<MixtureComponent> mixture;
  double popularity = 0.0;

  /// Component probabilities for a party of `guests` (positive, sum to 1).
  std::vector<double> mixture_weights(int guests) const;
  friend bool operator==(const Destination&, const Destination&) = default;
};

struct WorldConfig {
  std::size_t n_destinations = 50;
  std::size_t n_listings = 10'000;
  double zipf_s = 1.1;
  std::size_t n_metros = 12;
  std::size_t n_countries = 4;
  /// Destination centers are drawn inside this box (kept away from the antimeridian).
  BoundingBox region{{28.0, -115.0}, {46.0, -75.0}};
  /// Relative weights of location types, in LocationType order.
  std::vector<double> location_type_weights{0.0, 0.03, 0.42, 0.2, 0.07, 0.1, 0.12, 0.06};
  /// Probability that a destination gets 1 or 2 satellite booking areas.
  double satellite_probability = 0.85;
  double satellite_weight = 0.002;
  double satellite_guest_modifier = 1.2;
  /// Satellite distance from the center, in multiples of the main spread.
  double satellite_min_distance = 4.0;
  double satellite_max_distance = 7.0;
  double grid_cell_deg = 0.1;
  std::size_t min_listings_per_destination = 40;

  // Search behavior.
  std::size_t searches_per_day = 1000;
  /// P(guests = i + 1).
  std::vector<double> guest_weights{0.2, 0.38, 0.1, 0.12, 0.04, 0.05, 0.01, 0.03, 0.0, 0.02,
                                    0.0, 0.05};
  double return_search_rate = 0.25;
  double mobile_app_rate = 0.55;
  double mean_lead_days = 21.0;
  int max_lead_days = 90;
  double mean_extra_nights = 2.5;
  int max_trip_nights = 14;
  /// Day-of-year of simulation day 0.
  int base_day_of_year = 120;

  // Booking behavior.
  double booking_propensity = 0.75;
  double intent_radius_km = 4.0;
  double cancellation_rate = 0.05;
  int maturation_days = 7;

  /// Throws ConfigError.
  void validate() const;
};

void to_json(nlohmann::json& j, const WorldConfig& c);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, WorldConfig& c);

class World {
 public:
  /// Deterministic in (config, seed). Throws ConfigError for invalid configs.
  static World generate(const WorldConfig& config, std::uint64_t seed);
  static World from_parts(WorldConfig config, std::uint64_t seed,
                          std::vector<Destination> destinations, std::vector<Listing> listings);

  const WorldConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<Destination>& destinations() const { return destinations_; }
  const std::vector<Listing>& listings() const { return listings_; }
  const GridIndex& index() const { return index_; }
  const Destination* find_destination(const std::string& location_id) const;
  std::size_t destination_index(const std::string& location_id) const;

  /// Popularity-weighted destination pick from a uniform draw in [0, 1).
  std::size_t pick_destination(double u) const;

  /// Nearest listing with capacity >= guests within radius_km of `p` (ties: lowest id).
  std::optional<std::uint32_t> nearest_feasible(const GeoPoint& p, int guests,
                                                double radius_km) const;

  /// JSON-lines: header (format, seed, config), destinations, listings.
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;
  static World load(const std::filesystem::path& path);

 private:
  WorldConfig config_;
  std::uint64_t seed_ = 0;
  std::vector<Destination> destinations_;
  std::vector<Listing> listings_;
  GridIndex index_;
  std::vector<double> popularity_cdf_;
  std::map<std::string, std::size_t> by_id_;
};

/// Search number `index` on simulation `day` of stream `stream_seed`.
/// A fraction of searches are repeat visits by a guest from the previous day.
SearchRequest sample_search(const World& world, int day, std::size_t index,
                            std::uint64_t stream_seed);

std::vector<SearchRequest> sample_day_searches(const World& world, int day,
                                               std::uint64_t stream_seed);

/// Hash of a day's search stream; equal hashes mean identical streams.
std::uint64_t stream_hash(std::span<const SearchRequest> searches);

/// What the searcher would book if every listing were retrieved.
struct Demand {
  bool wants_to_book = false;
  GeoPoint intent;
  std::optional<std::uint32_t> listing;
  bool cancelled = false;
};

/// All random draws for a search, made up front so arms share them.
Demand draw_demand(const World& world, const SearchRequest& req, std::uint64_t seed);

struct BookingEvent {
  int search_day_index = 0;
  SearchRequest request;
  BoundingBox served;
  GeoPoint booked;
  std::uint32_t listing_id = 0;
  bool cancelled = false;
};

/// Books the demanded listing iff it lies inside `served`.
std::optional<BookingEvent> simulate_booking(const World& world, const SearchRequest& req,
                                             const BoundingBox& served, std::uint64_t seed);
std::optional<BookingEvent> booking_from_demand(const World& world, const SearchRequest& req,
                                                const BoundingBox& served, const Demand& demand);

/// Seed of the demand draw for search (day, index) in a stream.
std::uint64_t demand_seed(std::uint64_t stream_seed, int day, std::size_t index);

struct ServedSearch {
  SearchRequest request;
  BoundingBox served;
};

/// Links each non-cancelled booking to every search by the same guest for the same
/// destination, issued on the reservation day or the day before, whose served
/// bounds contained the booked listing.
std::vector<LabeledSearch> attribute(std::span<const ServedSearch> searches,
                                     std::span<const BookingEvent> bookings);

/// Bookings old enough to have passed the cancellation check by `as_of_day`.
std::vector<BookingEvent> matured(std::span<const BookingEvent> bookings, int as_of_day,
                                  int maturation_days);

/// Exact listing count inside `box`.
std::size_t count_in_box(const GridIndex& index, const BoundingBox& box);

void to_json(nlohmann::json& j, const BookingEvent& e);
void from_json(const nlohmann::json& j, BookingEvent& e);

}  // namespace locret

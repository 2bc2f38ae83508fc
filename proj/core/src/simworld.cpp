#include "locret/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <boost/random/discrete_distribution.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "locret/errors.hpp"
#include "locret/hashing.hpp"
#include "locret/policy.hpp"

namespace locret {

namespace {

using Rng = boost::random::mt19937_64;

// Per location type, in LocationType order: spread of the main booking blob
// and half-size of the administrative bounds, both in km.
constexpr std::array<double, 8> kSpreadKm = {150.0, 45.0, 7.0, 2.5, 2.0, 1.5, 2.0, 1.5};
constexpr std::array<double, 8> kAdminHalfKm = {600.0, 200.0, 9.0, 1.5, 0.4, 0.03, 0.15, 0.03};

constexpr std::array<int, 8> kMainCapacity = {1, 2, 3, 4, 5, 6, 8, 12};
constexpr std::array<double, 8> kMainCapacityWeights = {0.1, 0.33, 0.12, 0.22, 0.08, 0.1, 0.04,
                                                        0.01};
constexpr std::array<int, 7> kLargeCapacity = {2, 4, 6, 8, 10, 12, 16};
constexpr std::array<double, 7> kLargeCapacityWeights = {0.1, 0.2, 0.22, 0.2, 0.1, 0.12, 0.06};

constexpr std::array<std::string_view, 4> kDevices = {"ios", "android", "desktop_web",
                                                      "mobile_web"};

double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return boost::random::uniform_real_distribution<double>(lo, hi)(rng);
}

double normal(Rng& rng, double mean = 0.0, double sd = 1.0) {
  return boost::random::normal_distribution<double>(mean, sd)(rng);
}

template <typename Weights>
std::size_t pick(Rng& rng, const Weights& w) {
  return boost::random::discrete_distribution<std::size_t>(w.begin(), w.end())(rng);
}

double km_to_lat(double km) { return km / kKmPerDegree; }
double km_to_lng(double km, double lat) { return km / km_per_degree(Axis::kLng, lat); }

GeoPoint clamp_to(const BoundingBox& region, GeoPoint p) {
  p.lat = std::clamp(p.lat, region.sw.lat, region.ne.lat);
  p.lng = std::clamp(p.lng, region.sw.lng, region.ne.lng);
  return p;
}

std::size_t pick_from_cdf(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

}  // namespace

std::vector<double> Destination::mixture_weights(int guests) const {
  std::vector<double> w(mixture.size());
  const double extra = std::max(0, guests - 2);
  double total = 0.0;
  for (std::size_t k = 0; k < mixture.size(); ++k) {
    w[k] = mixture[k].weight * std::exp(mixture[k].guest_modifier * extra);
    total += w[k];
  }
  for (auto& x : w) x /= total;
  return w;
}

void WorldConfig::validate() const {
  if (n_destinations == 0) throw ConfigError("n_destinations must be >= 1");
  if (n_listings == 0) throw ConfigError("n_listings must be >= 1");
  if (n_metros == 0 || n_countries == 0) throw ConfigError("n_metros and n_countries must be >= 1");
  if (!(zipf_s >= 0.0)) throw ConfigError("zipf_s must be >= 0");
  if (!region.valid()) throw ConfigError("region must be a valid box");
  if (region.sw.lng <= -179.0 || region.ne.lng >= 179.0) {
    throw ConfigError("region must stay away from the antimeridian");
  }
  if (location_type_weights.size() != 8) throw ConfigError("location_type_weights needs 8 entries");
  if (std::accumulate(location_type_weights.begin(), location_type_weights.end(), 0.0) <= 0.0 ||
      std::any_of(location_type_weights.begin(), location_type_weights.end(),
                  [](double w) { return w < 0.0; })) {
    throw ConfigError("location_type_weights must be >= 0 with a positive sum");
  }
  if (guest_weights.empty() ||
      std::accumulate(guest_weights.begin(), guest_weights.end(), 0.0) <= 0.0 ||
      std::any_of(guest_weights.begin(), guest_weights.end(), [](double w) { return w < 0.0; })) {
    throw ConfigError("guest_weights must be >= 0 with a positive sum");
  }
  if (!(grid_cell_deg > 0.0)) throw ConfigError("grid_cell_deg must be > 0");
  if (searches_per_day == 0) throw ConfigError("searches_per_day must be >= 1");
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must be in [0, 1]");
  };
  prob(return_search_rate, "return_search_rate");
  prob(mobile_app_rate, "mobile_app_rate");
  prob(booking_propensity, "booking_propensity");
  prob(cancellation_rate, "cancellation_rate");
  prob(satellite_probability, "satellite_probability");
  if (!(satellite_weight > 0.0)) throw ConfigError("satellite_weight must be > 0");
  if (!(satellite_min_distance >= 0.0 && satellite_max_distance >= satellite_min_distance)) {
    throw ConfigError("satellite distances must satisfy 0 <= min <= max");
  }
  if (max_lead_days < 0 || max_trip_nights < 1) throw ConfigError("trip limits out of range");
  if (!(intent_radius_km > 0.0)) throw ConfigError("intent_radius_km must be > 0");
  if (maturation_days < 0) throw ConfigError("maturation_days must be >= 0");
  if (base_day_of_year < 1 || base_day_of_year + max_lead_days + max_trip_nights > 366) {
    throw ConfigError("base_day_of_year leaves no room for trips within the year");
  }
}

World World::generate(const WorldConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(hash_combine(seed, 0x3011d));
  const auto& region = config.region;

  std::vector<GeoPoint> metros(config.n_metros);
  for (auto& m : metros) {
    m = {uniform(rng, region.sw.lat + 1.0, region.ne.lat - 1.0),
         uniform(rng, region.sw.lng + 1.0, region.ne.lng - 1.0)};
  }

  std::vector<double> zipf(config.n_destinations);
  for (std::size_t i = 0; i < zipf.size(); ++i) {
    zipf[i] = 1.0 / std::pow(static_cast<double>(i + 1), config.zipf_s);
  }
  const double zipf_total = std::accumulate(zipf.begin(), zipf.end(), 0.0);

  std::vector<Destination> dests(config.n_destinations);
  for (std::size_t i = 0; i < dests.size(); ++i) {
    Destination& d = dests[i];
    const std::size_t metro = pick(rng, std::vector<double>(config.n_metros, 1.0));
    const auto type_index = pick(rng, config.location_type_weights);
    d.location_id = "dest-" + std::to_string(i);
    d.location_type = static_cast<LocationType>(type_index);
    d.metro_id = "metro-" + std::to_string(metro);
    const double band = (metros[metro].lng - region.sw.lng) / (region.ne.lng - region.sw.lng);
    d.country_code = "C" + std::to_string(std::min(
                               config.n_countries - 1,
                               static_cast<std::size_t>(band * static_cast<double>(config.n_countries))));
    d.center = clamp_to(region, {metros[metro].lat + normal(rng, 0.0, 0.35),
                                 metros[metro].lng + normal(rng, 0.0, 0.35)});
    d.popularity = zipf[i] / zipf_total;

    const double admin_half = kAdminHalfKm[type_index] * std::exp(normal(rng, 0.0, 0.25));
    d.admin_bounds = clamp(BoundingBox{
        {d.center.lat - km_to_lat(admin_half), d.center.lng - km_to_lng(admin_half, d.center.lat)},
        {d.center.lat + km_to_lat(admin_half), d.center.lng + km_to_lng(admin_half, d.center.lat)}});

    const double spread = kSpreadKm[type_index] * std::exp(normal(rng, 0.0, 0.35));
    MixtureComponent main;
    main.mean = {d.center.lat + km_to_lat(normal(rng, 0.0, 0.25 * spread)),
                 d.center.lng + km_to_lng(normal(rng, 0.0, 0.25 * spread), d.center.lat)};
    main.std_lat_deg = km_to_lat(spread * uniform(rng, 0.7, 1.3));
    main.std_lng_deg = km_to_lng(spread * uniform(rng, 0.7, 1.3), d.center.lat);
    main.weight = 1.0;
    d.mixture.push_back(main);

    if (uniform(rng) < config.satellite_probability) {
      const int n_sat = uniform(rng) < 0.5 ? 1 : 2;
      for (int s = 0; s < n_sat; ++s) {
        const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        const double dist = spread * uniform(rng, config.satellite_min_distance, config.satellite_max_distance);
        MixtureComponent sat;
        sat.mean = {d.center.lat + km_to_lat(dist * std::sin(angle)),
                    d.center.lng + km_to_lng(dist * std::cos(angle), d.center.lat)};
        sat.std_lat_deg = km_to_lat(0.5 * spread);
        sat.std_lng_deg = km_to_lng(0.5 * spread, d.center.lat);
        sat.weight = config.satellite_weight;
        sat.guest_modifier = config.satellite_guest_modifier;
        d.mixture.push_back(sat);
      }
    }
  }

  // Inventory: every destination gets a floor, the rest follows sqrt(popularity).
  std::vector<double> share(dests.size());
  for (std::size_t i = 0; i < dests.size(); ++i) share[i] = std::sqrt(dests[i].popularity);
  const std::size_t floor_total =
      std::min(config.n_listings, config.min_listings_per_destination * dests.size());
  std::vector<std::size_t> per_dest(dests.size(), floor_total / dests.size());
  std::size_t assigned = std::accumulate(per_dest.begin(), per_dest.end(), std::size_t{0});
  const double share_total = std::accumulate(share.begin(), share.end(), 0.0);
  const std::size_t rest = config.n_listings - assigned;
  for (std::size_t i = 0; i < dests.size(); ++i) {
    const auto extra =
        static_cast<std::size_t>(std::floor(static_cast<double>(rest) * share[i] / share_total));
    per_dest[i] += extra;
    assigned += extra;
  }
  for (std::size_t i = 0; assigned < config.n_listings; i = (i + 1) % dests.size(), ++assigned) {
    ++per_dest[i];
  }

  std::vector<Listing> listings;
  listings.reserve(config.n_listings);
  for (std::size_t i = 0; i < dests.size(); ++i) {
    const Destination& d = dests[i];
    // Inventory follows the demand of a mid-sized group so satellites have homes.
    const auto weights = d.mixture_weights(6);
    for (std::size_t n = 0; n < per_dest[i]; ++n) {
      const auto k = pick(rng, weights);
      const auto& c = d.mixture[k];
      Listing l;
      l.listing_id = static_cast<std::uint32_t>(listings.size());
      l.location = clamp(GeoPoint{c.mean.lat + normal(rng, 0.0, 1.5 * c.std_lat_deg),
                          c.mean.lng + normal(rng, 0.0, 1.5 * c.std_lng_deg)});
      l.capacity = c.guest_modifier > 0.0 ? kLargeCapacity[pick(rng, kLargeCapacityWeights)]
                                          : kMainCapacity[pick(rng, kMainCapacityWeights)];
      l.nightly_price = std::round(100.0 * std::exp(normal(rng, 4.8, 0.5))) / 100.0;
      l.destination_id = d.location_id;
      listings.push_back(std::move(l));
    }
  }
  return from_parts(config, seed, std::move(dests), std::move(listings));
}

World World::from_parts(WorldConfig config, std::uint64_t seed,
                        std::vector<Destination> destinations, std::vector<Listing> listings) {
  config.validate();
  World w;
  w.config_ = std::move(config);
  w.seed_ = seed;
  w.destinations_ = std::move(destinations);
  w.listings_ = std::move(listings);
  std::vector<GeoPoint> pts;
  pts.reserve(w.listings_.size());
  for (std::size_t i = 0; i < w.listings_.size(); ++i) {
    if (w.listings_[i].listing_id != i) throw DataError("listing ids must be dense and ordered");
    if (!w.listings_[i].location.valid() || w.listings_[i].capacity < 1) {
      throw DataError("invalid listing " + std::to_string(i));
    }
    pts.push_back(w.listings_[i].location);
  }
  w.index_ = GridIndex(pts, w.config_.grid_cell_deg);
  double acc = 0.0;
  for (std::size_t i = 0; i < w.destinations_.size(); ++i) {
    const auto& d = w.destinations_[i];
    if (d.mixture.empty()) throw DataError("destination " + d.location_id + " has no mixture");
    acc += d.popularity;
    w.popularity_cdf_.push_back(acc);
    if (!w.by_id_.emplace(d.location_id, i).second) {
      throw DataError("duplicate destination " + d.location_id);
    }
  }
  if (w.destinations_.empty() || !(acc > 0.0)) throw DataError("world has no destinations");
  return w;
}

const Destination* World::find_destination(const std::string& location_id) const {
  const auto it = by_id_.find(location_id);
  return it == by_id_.end() ? nullptr : &destinations_[it->second];
}

std::size_t World::destination_index(const std::string& location_id) const {
  const auto it = by_id_.find(location_id);
  if (it == by_id_.end()) throw DataError("unknown destination " + location_id);
  return it->second;
}

std::size_t World::pick_destination(double u) const { return pick_from_cdf(popularity_cdf_, u); }

std::optional<std::uint32_t> World::nearest_feasible(const GeoPoint& p, int guests,
                                                     double radius_km) const {
  const BoundingBox search{{p.lat - km_to_lat(radius_km), p.lng - km_to_lng(radius_km, p.lat)},
                           {p.lat + km_to_lat(radius_km), p.lng + km_to_lng(radius_km, p.lat)}};
  std::optional<std::uint32_t> best;
  double best_d = radius_km;
  index_.for_each_candidate(search, [&](std::uint32_t id) {
    const Listing& l = listings_[id];
    if (l.capacity < guests) return;
    const double d = stats_distance_km(p, l.location);
    if (d > radius_km) return;
    if (!best || d < best_d || (d == best_d && id < *best)) {
      best = id;
      best_d = d;
    }
  });
  return best;
}

SearchRequest sample_search(const World& world, int day, std::size_t index,
                            std::uint64_t stream_seed) {
  const auto& cfg = world.config();
  Rng rng(hash_combine(hash_combine(hash_combine(stream_seed, 0x5ea4c), static_cast<std::uint64_t>(day)),
                       index));
  const double u_return = uniform(rng);
  const double u_prev = uniform(rng);
  const double u_dest = uniform(rng);

  if (u_return < cfg.return_search_rate) {
    const auto prev_index = std::min(cfg.searches_per_day - 1,
                                     static_cast<std::size_t>(u_prev * static_cast<double>(cfg.searches_per_day)));
    SearchRequest prev = sample_search(world, day - 1, prev_index, stream_seed);
    if (prev.lead_days >= 1) {
      prev.search_day_index = day;
      prev.search_day_of_year += 1;
      prev.lead_days -= 1;
      return prev;
    }
  }

  const Destination& d = world.destinations()[world.pick_destination(u_dest)];
  SearchRequest r;
  r.guest_id = hash_combine(hash_combine(stream_seed, static_cast<std::uint64_t>(day)), index);
  r.location_id = d.location_id;
  r.metro_id = d.metro_id;
  r.country_code = d.country_code;
  r.location_type = d.location_type;
  r.center = d.center;
  r.admin_bounds = d.admin_bounds;
  r.search_day_index = day;
  r.guests = static_cast<int>(pick(rng, cfg.guest_weights)) + 1;
  r.is_mobile_app = uniform(rng) < cfg.mobile_app_rate;
  const double u_device = uniform(rng);
  r.device_type = std::string(r.is_mobile_app ? kDevices[u_device < 0.5 ? 0 : 1]
                                              : kDevices[u_device < 0.7 ? 2 : 3]);
  const double lead = boost::random::exponential_distribution<double>(1.0 / cfg.mean_lead_days)(rng);
  r.lead_days = std::min(cfg.max_lead_days, static_cast<int>(lead));
  const double extra =
      boost::random::exponential_distribution<double>(1.0 / cfg.mean_extra_nights)(rng);
  r.trip_length_nights = 1 + std::min(cfg.max_trip_nights - 1, static_cast<int>(extra));
  r.search_day_of_year = cfg.base_day_of_year + day;
  r.checkin_day_of_year = r.search_day_of_year + r.lead_days;
  r.checkout_day_of_year = r.checkin_day_of_year + r.trip_length_nights;
  const int weekday = r.checkin_day_of_year % 7;
  r.is_weekend_trip = (weekday == 4 || weekday == 5) && r.trip_length_nights <= 3;
  if (r.search_day_of_year < 1 || r.checkout_day_of_year > 366) {
    throw DataError("simulation day " + std::to_string(day) + " falls outside the calendar year");
  }
  return r;
}

std::vector<SearchRequest> sample_day_searches(const World& world, int day,
                                               std::uint64_t stream_seed) {
  std::vector<SearchRequest> out;
  out.reserve(world.config().searches_per_day);
  for (std::size_t i = 0; i < world.config().searches_per_day; ++i) {
    out.push_back(sample_search(world, day, i, stream_seed));
  }
  return out;
}

std::uint64_t stream_hash(std::span<const SearchRequest> searches) {
  std::uint64_t h = fnv1a64("locret-stream");
  for (const auto& r : searches) {
    h = hash_combine(h, fnv1a64(r.location_id));
    h = hash_combine(h, r.guest_id);
    h = hash_combine(h, static_cast<std::uint64_t>(r.guests));
    h = hash_combine(h, static_cast<std::uint64_t>(r.lead_days));
    h = hash_combine(h, static_cast<std::uint64_t>(r.trip_length_nights));
    h = hash_combine(h, static_cast<std::uint64_t>(r.search_day_index));
    h = hash_combine(h, static_cast<std::uint64_t>(r.checkin_day_of_year));
    h = hash_combine(h, fnv1a64(r.device_type));
  }
  return h;
}

std::uint64_t demand_seed(std::uint64_t stream_seed, int day, std::size_t index) {
  return hash_combine(hash_combine(hash_combine(stream_seed, 0xd3a4d), static_cast<std::uint64_t>(day)),
                      index);
}

Demand draw_demand(const World& world, const SearchRequest& req, std::uint64_t seed) {
  const auto& cfg = world.config();
  Rng rng(seed);
  const double u_book = uniform(rng);
  const double u_component = uniform(rng);
  const double z_lat = normal(rng);
  const double z_lng = normal(rng);
  const double u_cancel = uniform(rng);

  Demand out;
  const Destination* d = world.find_destination(req.location_id);
  if (d == nullptr) return out;
  const auto weights = d->mixture_weights(req.guests);
  std::vector<double> cdf(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cdf.begin());
  const auto& c = d->mixture[pick_from_cdf(cdf, u_component)];
  out.intent = clamp(GeoPoint{c.mean.lat + z_lat * c.std_lat_deg, c.mean.lng + z_lng * c.std_lng_deg});
  out.wants_to_book = u_book < cfg.booking_propensity;
  out.cancelled = u_cancel < cfg.cancellation_rate;
  if (out.wants_to_book) out.listing = world.nearest_feasible(out.intent, req.guests, cfg.intent_radius_km);
  return out;
}

std::optional<BookingEvent> booking_from_demand(const World& world, const SearchRequest& req,
                                                const BoundingBox& served, const Demand& demand) {
  if (!demand.wants_to_book || !demand.listing) return std::nullopt;
  const Listing& l = world.listings()[*demand.listing];
  if (!contains(served, l.location)) return std::nullopt;
  BookingEvent e;
  e.search_day_index = req.search_day_index;
  e.request = req;
  e.served = served;
  e.booked = l.location;
  e.listing_id = l.listing_id;
  e.cancelled = demand.cancelled;
  return e;
}

std::optional<BookingEvent> simulate_booking(const World& world, const SearchRequest& req,
                                             const BoundingBox& served, std::uint64_t seed) {
  return booking_from_demand(world, req, served, draw_demand(world, req, seed));
}

std::vector<LabeledSearch> attribute(std::span<const ServedSearch> searches,
                                     std::span<const BookingEvent> bookings) {
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_guest;
  for (std::size_t i = 0; i < searches.size(); ++i) {
    by_guest[searches[i].request.guest_id].push_back(i);
  }
  std::vector<LabeledSearch> out;
  for (const auto& b : bookings) {
    if (b.cancelled) continue;
    const auto it = by_guest.find(b.request.guest_id);
    if (it == by_guest.end()) continue;
    for (auto i : it->second) {
      const auto& s = searches[i];
      const int lag = b.search_day_index - s.request.search_day_index;
      if (lag < 0 || lag > 1) continue;
      if (s.request.location_id != b.request.location_id) continue;
      if (!contains(s.served, b.booked)) continue;
      out.push_back({s.request, b.booked});
    }
  }
  return out;
}

std::vector<BookingEvent> matured(std::span<const BookingEvent> bookings, int as_of_day,
                                  int maturation_days) {
  std::vector<BookingEvent> out;
  for (const auto& b : bookings) {
    if (as_of_day - b.search_day_index >= maturation_days) out.push_back(b);
  }
  return out;
}

std::size_t count_in_box(const GridIndex& index, const BoundingBox& box) {
  return index.count_in_box(box);
}

}  // namespace locret

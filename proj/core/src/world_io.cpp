#include <fstream>
#include <sstream>

#include "locret/errors.hpp"
#include "locret/json_io.hpp"
#include "locret/simworld.hpp"

namespace locret {

namespace {

constexpr std::string_view kWorldFormat = "locret-world/1";

json component_json(const MixtureComponent& c) {
  return {{"mean", c.mean},
          {"std_lat_deg", c.std_lat_deg},
          {"std_lng_deg", c.std_lng_deg},
          {"weight", c.weight},
          {"guest_modifier", c.guest_modifier}};
}

MixtureComponent component_from(const json& j) {
  MixtureComponent c;
  j.at("mean").get_to(c.mean);
  j.at("std_lat_deg").get_to(c.std_lat_deg);
  j.at("std_lng_deg").get_to(c.std_lng_deg);
  j.at("weight").get_to(c.weight);
  j.at("guest_modifier").get_to(c.guest_modifier);
  return c;
}

json destination_json(const Destination& d) {
  json mix = json::array();
  for (const auto& c : d.mixture) mix.push_back(component_json(c));
  return {{"section", "destination"},
          {"location_id", d.location_id},
          {"location_type", std::string(to_string(d.location_type))},
          {"metro_id", d.metro_id},
          {"country_code", d.country_code},
          {"center", d.center},
          {"admin_bounds", d.admin_bounds},
          {"popularity", d.popularity},
          {"mixture", std::move(mix)}};
}

Destination destination_from(const json& j) {
  Destination d;
  j.at("location_id").get_to(d.location_id);
  d.location_type = location_type_from_string(j.at("location_type").get<std::string>());
  j.at("metro_id").get_to(d.metro_id);
  j.at("country_code").get_to(d.country_code);
  j.at("center").get_to(d.center);
  j.at("admin_bounds").get_to(d.admin_bounds);
  j.at("popularity").get_to(d.popularity);
  for (const auto& c : j.at("mixture")) d.mixture.push_back(component_from(c));
  return d;
}

json listing_json(const Listing& l) {
  return {{"section", "listing"},
          {"listing_id", l.listing_id},
          {"location", l.location},
          {"capacity", l.capacity},
          {"nightly_price", l.nightly_price},
          {"destination_id", l.destination_id}};
}

Listing listing_from(const json& j) {
  Listing l;
  j.at("listing_id").get_to(l.listing_id);
  j.at("location").get_to(l.location);
  j.at("capacity").get_to(l.capacity);
  j.at("nightly_price").get_to(l.nightly_price);
  j.at("destination_id").get_to(l.destination_id);
  return l;
}

}  // namespace

void to_json(nlohmann::json& j, const WorldConfig& c) {
  j = json{{"n_destinations", c.n_destinations},
           {"n_listings", c.n_listings},
           {"zipf_s", c.zipf_s},
           {"n_metros", c.n_metros},
           {"n_countries", c.n_countries},
           {"region", c.region},
           {"location_type_weights", c.location_type_weights},
           {"satellite_probability", c.satellite_probability},
           {"satellite_weight", c.satellite_weight},
           {"satellite_guest_modifier", c.satellite_guest_modifier},
           {"satellite_min_distance", c.satellite_min_distance},
           {"satellite_max_distance", c.satellite_max_distance},
           {"grid_cell_deg", c.grid_cell_deg},
           {"min_listings_per_destination", c.min_listings_per_destination},
           {"searches_per_day", c.searches_per_day},
           {"guest_weights", c.guest_weights},
           {"return_search_rate", c.return_search_rate},
           {"mobile_app_rate", c.mobile_app_rate},
           {"mean_lead_days", c.mean_lead_days},
           {"max_lead_days", c.max_lead_days},
           {"mean_extra_nights", c.mean_extra_nights},
           {"max_trip_nights", c.max_trip_nights},
           {"base_day_of_year", c.base_day_of_year},
           {"booking_propensity", c.booking_propensity},
           {"intent_radius_km", c.intent_radius_km},
           {"cancellation_rate", c.cancellation_rate},
           {"maturation_days", c.maturation_days}};
}

void from_json(const nlohmann::json& j, WorldConfig& c) {
  c.n_destinations = j.value("n_destinations", c.n_destinations);
  c.n_listings = j.value("n_listings", c.n_listings);
  c.zipf_s = j.value("zipf_s", c.zipf_s);
  c.n_metros = j.value("n_metros", c.n_metros);
  c.n_countries = j.value("n_countries", c.n_countries);
  if (auto it = j.find("region"); it != j.end()) it->get_to(c.region);
  c.location_type_weights = j.value("location_type_weights", c.location_type_weights);
  c.satellite_probability = j.value("satellite_probability", c.satellite_probability);
  c.satellite_weight = j.value("satellite_weight", c.satellite_weight);
  c.satellite_guest_modifier = j.value("satellite_guest_modifier", c.satellite_guest_modifier);
  c.satellite_min_distance = j.value("satellite_min_distance", c.satellite_min_distance);
  c.satellite_max_distance = j.value("satellite_max_distance", c.satellite_max_distance);
  c.grid_cell_deg = j.value("grid_cell_deg", c.grid_cell_deg);
  c.min_listings_per_destination =
      j.value("min_listings_per_destination", c.min_listings_per_destination);
  c.searches_per_day = j.value("searches_per_day", c.searches_per_day);
  c.guest_weights = j.value("guest_weights", c.guest_weights);
  c.return_search_rate = j.value("return_search_rate", c.return_search_rate);
  c.mobile_app_rate = j.value("mobile_app_rate", c.mobile_app_rate);
  c.mean_lead_days = j.value("mean_lead_days", c.mean_lead_days);
  c.max_lead_days = j.value("max_lead_days", c.max_lead_days);
  c.mean_extra_nights = j.value("mean_extra_nights", c.mean_extra_nights);
  c.max_trip_nights = j.value("max_trip_nights", c.max_trip_nights);
  c.base_day_of_year = j.value("base_day_of_year", c.base_day_of_year);
  c.booking_propensity = j.value("booking_propensity", c.booking_propensity);
  c.intent_radius_km = j.value("intent_radius_km", c.intent_radius_km);
  c.cancellation_rate = j.value("cancellation_rate", c.cancellation_rate);
  c.maturation_days = j.value("maturation_days", c.maturation_days);
}

std::string World::serialize() const {
  std::ostringstream out;
  out << json{{"section", "header"}, {"format", kWorldFormat}, {"seed", seed_}, {"config", config_}}
             .dump()
      << '\n';
  for (const auto& d : destinations_) out << destination_json(d).dump() << '\n';
  for (const auto& l : listings_) out << listing_json(l).dump() << '\n';
  return out.str();
}

void World::save(const std::filesystem::path& path) const { write_text_file(path, serialize()); }

World World::load(const std::filesystem::path& path) {
  const auto rows = read_jsonl(path);
  if (rows.empty()) throw DataError("empty world file " + path.string());
  try {
    const auto& header = rows.front();
    if (header.value("section", "") != "header" ||
        header.value("format", "") != std::string(kWorldFormat)) {
      throw DataError("not a " + std::string(kWorldFormat) + " file: " + path.string());
    }
    WorldConfig cfg = header.at("config").get<WorldConfig>();
    const auto seed = header.at("seed").get<std::uint64_t>();
    std::vector<Destination> dests;
    std::vector<Listing> listings;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto section = rows[i].at("section").get<std::string>();
      if (section == "destination") {
        dests.push_back(destination_from(rows[i]));
      } else if (section == "listing") {
        listings.push_back(listing_from(rows[i]));
      } else {
        throw DataError("unknown section '" + section + "' in " + path.string());
      }
    }
    return from_parts(std::move(cfg), seed, std::move(dests), std::move(listings));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void to_json(nlohmann::json& j, const BookingEvent& e) {
  j = json{{"search_day_index", e.search_day_index},
           {"request", e.request},
           {"served", e.served},
           {"booked", e.booked},
           {"listing_id", e.listing_id},
           {"cancelled", e.cancelled}};
}

void from_json(const nlohmann::json& j, BookingEvent& e) {
  j.at("search_day_index").get_to(e.search_day_index);
  j.at("request").get_to(e.request);
  j.at("served").get_to(e.served);
  j.at("booked").get_to(e.booked);
  j.at("listing_id").get_to(e.listing_id);
  j.at("cancelled").get_to(e.cancelled);
}

}  // namespace locret

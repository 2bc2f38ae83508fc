#include "locret/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "locret/errors.hpp"
#include "locret/hashing.hpp"
#include "locret/json_io.hpp"
#include "locret/logging.hpp"

namespace locret {

namespace {

std::array<double, 4> as_array(const ExtentOffsets& o) {
  return {o.sw_lat, o.ne_lat, o.sw_lng, o.ne_lng};
}

ExtentOffsets from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }

}  // namespace

std::string_view to_string(Dispersion d) {
  return d == Dispersion::kMeanAbsDeviation ? "mad" : "std";
}

Dispersion dispersion_from_string(std::string_view s) {
  if (s == "mad") return Dispersion::kMeanAbsDeviation;
  if (s == "std") return Dispersion::kStdDev;
  throw ConfigError("unknown dispersion: " + std::string(s));
}

double UncertaintyEstimate::mean_sigma() const {
  return 0.25 * (sigma.sw_lat + sigma.ne_lat + sigma.sw_lng + sigma.ne_lng);
}

UncertaintyEstimate summarize_samples(std::span<const ExtentOffsets> samples,
                                      Dispersion dispersion) {
  if (samples.empty()) throw std::invalid_argument("summarize_samples: no samples");
  const double n = static_cast<double>(samples.size());
  // Mean as an offset from the first sample, so identical samples give it back exactly.
  const auto first = as_array(samples.front());
  std::array<double, 4> shift{};
  for (const auto& s : samples) {
    const auto a = as_array(s);
    for (std::size_t k = 0; k < 4; ++k) shift[k] += a[k] - first[k];
  }
  std::array<double, 4> mu{};
  for (std::size_t k = 0; k < 4; ++k) mu[k] = first[k] + shift[k] / n;
  std::array<double, 4> spread{};
  for (const auto& s : samples) {
    const auto a = as_array(s);
    for (std::size_t k = 0; k < 4; ++k) {
      const double d = a[k] - mu[k];
      spread[k] += dispersion == Dispersion::kMeanAbsDeviation ? std::sqrt(d * d) : d * d;
    }
  }
  for (auto& s : spread) {
    s /= n;
    if (dispersion == Dispersion::kStdDev) s = std::sqrt(s);
  }
  return {from_array(mu), from_array(spread), samples.size()};
}

DropoutMask scoring_mask(std::uint64_t model_version_hash, std::uint64_t feature_hash,
                         std::size_t sample, std::size_t hidden, double rate) {
  const CounterRng rng(hash_combine(hash_combine(model_version_hash, feature_hash), sample));
  DropoutMask mask;
  mask.rate = rate;
  mask.keep.resize(hidden);
  for (std::size_t i = 0; i < hidden; ++i) mask.keep[i] = rng.uniform(i) >= rate ? 1 : 0;
  return mask;
}

UncertaintyEstimate mc_dropout_score(const Estimator& model, const FeatureVector& fv,
                                     std::size_t n, Dispersion dispersion) {
  if (n < 2) throw std::invalid_argument("mc_dropout_score: need at least 2 samples");
  const std::uint64_t version = model.version_hash();
  const std::uint64_t feature = fv.canonical_hash();
  std::vector<ExtentOffsets> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const DropoutMask mask =
        scoring_mask(version, feature, i, model.params.shape.hidden, model.config.dropout_rate);
    samples.push_back(forward(model.params, fv, &mask));
  }
  return summarize_samples(samples, dispersion);
}

ExtentOffsets ucb_offsets(const UncertaintyEstimate& u, double lambda) {
  const auto mu = as_array(u.mu);
  const auto sigma = as_array(u.sigma);
  std::array<double, 4> f{};
  for (std::size_t k = 0; k < 4; ++k) f[k] = std::max(0.0, mu[k] + lambda * sigma[k]);
  return from_array(f);
}

BoundingBox ucb_bounds(const Estimator& model, const SearchRequest& req, double lambda,
                       std::size_t n, Dispersion dispersion) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("ucb_bounds: lambda must be >= 0");
  const auto u = mc_dropout_score(model, model.encode(req), n, dispersion);
  return to_box(req.center, ucb_offsets(u, lambda));
}

BoundingBox radius_box(const GeoPoint& center, double radius_km) {
  const double dlat = radius_km / km_per_degree(Axis::kLat, center.lat);
  const double k_lng = km_per_degree(Axis::kLng, center.lat);
  const double dlng = k_lng > 1e-9 ? radius_km / k_lng : 180.0;
  return to_box(center, {dlat, dlat, dlng, dlng});
}

BoundingBox heuristic_bounds(const SearchRequest& req) {
  const auto city_rule = [&] { return radius_box(req.center, kCityRadiusKm); };
  switch (req.location_type) {
    case LocationType::kCity:
      return city_rule();
    case LocationType::kCountry:
    case LocationType::kState:
    case LocationType::kNeighborhood:
      if (req.admin_bounds) return clamp(*req.admin_bounds);
      break;
    case LocationType::kStreet:
    case LocationType::kAddress:
    case LocationType::kPoi:
    case LocationType::kBuilding:
      if (req.admin_bounds) {
        const double diag = box_size_km(*req.admin_bounds).diagonal_km;
        return scale_box(*req.admin_bounds, expansion_factor(diag));
      }
      break;
  }
  log::debug("heuristic: " + req.location_id + " has no admin bounds; using city rule");
  return city_rule();
}

double stats_distance_km(const GeoPoint& center, const GeoPoint& p) {
  return std::hypot(axis_km(p.lat, center.lat, Axis::kLat, center.lat),
                    axis_km(p.lng, center.lng, Axis::kLng, center.lat));
}

std::size_t containment_count(double containment, std::size_t n) {
  if (!(containment > 0.0 && containment <= 1.0)) {
    throw std::invalid_argument("containment must be in (0, 1]");
  }
  // The epsilon absorbs representation error such as 0.96 * 100 = 96.00000000000001.
  const auto k = static_cast<std::size_t>(std::ceil(containment * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, std::min<std::size_t>(n, 1), n);
}

StatsTable StatsTable::build(std::span<const StatsBooking> bookings) {
  StatsTable t;
  for (const auto& b : bookings) {
    auto [it, inserted] = t.entries_.try_emplace(b.location_id);
    if (inserted) it->second.center = b.center;
    it->second.points.push_back({b.booked, stats_distance_km(it->second.center, b.booked)});
  }
  for (auto& [id, entry] : t.entries_) {
    std::stable_sort(entry.points.begin(), entry.points.end(),
                     [](const StatsPoint& a, const StatsPoint& b) {
                       return a.distance_km < b.distance_km;
                     });
  }
  return t;
}

const StatsEntry* StatsTable::find(const std::string& location_id) const {
  const auto it = entries_.find(location_id);
  return it == entries_.end() ? nullptr : &it->second;
}

void StatsTable::save_jsonl(const std::filesystem::path& path) const {
  std::vector<json> rows;
  for (const auto& [id, entry] : entries_) {
    json pts = json::array();
    for (const auto& p : entry.points) {
      pts.push_back({{"lat", p.point.lat}, {"lng", p.point.lng}, {"distance_km", p.distance_km}});
    }
    rows.push_back({{"location_id", id}, {"center", entry.center}, {"points", std::move(pts)}});
  }
  write_jsonl(path, rows);
}

StatsTable StatsTable::load_jsonl(const std::filesystem::path& path) {
  StatsTable t;
  try {
    for (const auto& row : read_jsonl(path)) {
      StatsEntry e;
      row.at("center").get_to(e.center);
      for (const auto& p : row.at("points")) {
        e.points.push_back({p.get<GeoPoint>(), p.at("distance_km").get<double>()});
      }
      t.entries_.emplace(row.at("location_id").get<std::string>(), std::move(e));
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return t;
}

std::optional<BoundingBox> stats_core_box(const StatsTable& table, const std::string& location_id,
                                          double containment) {
  const StatsEntry* entry = table.find(location_id);
  if (entry == nullptr || entry->points.empty()) return std::nullopt;
  const std::size_t k = containment_count(containment, entry->points.size());
  BoundingBox box{entry->points[0].point, entry->points[0].point};
  for (std::size_t i = 1; i < k; ++i) {
    const GeoPoint& p = entry->points[i].point;
    box.sw.lat = std::min(box.sw.lat, p.lat);
    box.sw.lng = std::min(box.sw.lng, p.lng);
    box.ne.lat = std::max(box.ne.lat, p.lat);
    box.ne.lng = std::max(box.ne.lng, p.lng);
  }
  return box;
}

BoundingBox stats_bounds(const StatsTable& table, const SearchRequest& req, double containment,
                         double expansion) {
  if (auto core = stats_core_box(table, req.location_id, containment)) {
    return scale_box(*core, expansion);
  }
  return heuristic_bounds(req);
}

Decision HeuristicPolicy::decide(const SearchRequest& req) const {
  return {heuristic_bounds(req), std::nullopt};
}

StatsPolicy::StatsPolicy(std::shared_ptr<const StatsTable> table, double containment,
                         double expansion)
    : table_(std::move(table)), containment_(containment), expansion_(expansion) {
  if (!table_) throw std::invalid_argument("StatsPolicy: null table");
  containment_count(containment_, 1);
  if (!(expansion_ >= 0.0)) throw std::invalid_argument("StatsPolicy: expansion must be >= 0");
}

Decision StatsPolicy::decide(const SearchRequest& req) const {
  return {stats_bounds(*table_, req, containment_, expansion_), std::nullopt};
}

McDropoutUcbPolicy::McDropoutUcbPolicy(std::shared_ptr<const Estimator> model, double lambda,
                                       std::size_t n_samples, Dispersion dispersion)
    : model_(std::move(model)), lambda_(lambda), n_samples_(n_samples), dispersion_(dispersion) {
  if (!model_) throw std::invalid_argument("McDropoutUcbPolicy: null model");
  if (!(lambda_ >= 0.0)) throw std::invalid_argument("McDropoutUcbPolicy: lambda must be >= 0");
  if (n_samples_ < 2) throw std::invalid_argument("McDropoutUcbPolicy: need >= 2 samples");
}

Decision McDropoutUcbPolicy::decide(const SearchRequest& req) const {
  const auto u = mc_dropout_score(*model_, model_->encode(req), n_samples_, dispersion_);
  return {to_box(req.center, ucb_offsets(u, lambda_)), u};
}

std::string McDropoutUcbPolicy::name() const {
  std::string l = std::to_string(lambda_);
  l.erase(l.find_last_not_of('0') + 1);
  if (!l.empty() && l.back() == '.') l.pop_back();
  return "ucb_lambda" + l;
}

Decision FixedBoxPolicy::decide(const SearchRequest& req) const {
  if (kind_ == Kind::kWorld) return {world_box(), std::nullopt};
  return {BoundingBox{req.center, req.center}, std::nullopt};
}

}  // namespace locret

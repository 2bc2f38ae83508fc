#include "locret/geo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace locret {

namespace {

constexpr double kExpansionOffset = 2.9;
constexpr double kExpansionSlope = -0.5;

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

bool GeoPoint::valid() const {
  return std::isfinite(lat) && std::isfinite(lng) && lat >= -90.0 && lat <= 90.0 &&
         lng >= -180.0 && lng <= 180.0;
}

bool BoundingBox::valid() const {
  return sw.valid() && ne.valid() && sw.lat <= ne.lat && sw.lng <= ne.lng;
}

GeoPoint BoundingBox::center() const {
  return {0.5 * (sw.lat + ne.lat), 0.5 * (sw.lng + ne.lng)};
}

bool ExtentOffsets::nonnegative() const {
  return sw_lat >= 0.0 && ne_lat >= 0.0 && sw_lng >= 0.0 && ne_lng >= 0.0;
}

GeoPoint clamp(GeoPoint p) {
  p.lat = std::clamp(p.lat, -90.0, 90.0);
  p.lng = std::clamp(p.lng, -180.0, 180.0);
  return p;
}

BoundingBox clamp(const BoundingBox& box) { return {clamp(box.sw), clamp(box.ne)}; }

BoundingBox to_box_unclamped(const GeoPoint& center, const ExtentOffsets& o) {
  return {{center.lat - o.sw_lat, center.lng - o.sw_lng},
          {center.lat + o.ne_lat, center.lng + o.ne_lng}};
}

BoundingBox to_box(const GeoPoint& center, const ExtentOffsets& offsets) {
  return clamp(to_box_unclamped(center, offsets));
}

ExtentOffsets offsets_from_box(const GeoPoint& center, const BoundingBox& box) {
  return {center.lat - box.sw.lat, box.ne.lat - center.lat, center.lng - box.sw.lng,
          box.ne.lng - center.lng};
}

bool contains(const BoundingBox& box, const GeoPoint& p) {
  return box.sw.lat <= p.lat && p.lat <= box.ne.lat && box.sw.lng <= p.lng &&
         p.lng <= box.ne.lng;
}

bool contains(const BoundingBox& outer, const BoundingBox& inner) {
  return contains(outer, inner.sw) && contains(outer, inner.ne);
}

double km_per_degree(Axis axis, double ref_lat_deg) {
  if (axis == Axis::kLat) return kKmPerDegree;
  return kKmPerDegree * std::cos(deg_to_rad(ref_lat_deg));
}

double axis_km(double a_deg, double b_deg, Axis axis, double ref_lat_deg) {
  return std::abs(a_deg - b_deg) * km_per_degree(axis, ref_lat_deg);
}

double local_distance_km(const GeoPoint& a, const GeoPoint& b) {
  const double ref = 0.5 * (a.lat + b.lat);
  return std::hypot(axis_km(a.lat, b.lat, Axis::kLat, ref),
                    axis_km(a.lng, b.lng, Axis::kLng, ref));
}

BoxSize box_size_km(const BoundingBox& box) {
  BoxSize s;
  const double ref = box.center().lat;
  s.width_km = axis_km(box.ne.lng, box.sw.lng, Axis::kLng, ref);
  s.height_km = axis_km(box.ne.lat, box.sw.lat, Axis::kLat, ref);
  s.wh_sum_km = s.width_km + s.height_km;
  s.area_km2 = s.width_km * s.height_km;
  s.diagonal_km = std::hypot(s.width_km, s.height_km);
  return s;
}

double expansion_factor(double diagonal_km) {
  if (!(diagonal_km >= 0.0)) {
    throw std::invalid_argument("expansion_factor: diagonal must be >= 0");
  }
  return std::max(1.0, kExpansionOffset + kExpansionSlope * std::log(diagonal_km + 1.0));
}

BoundingBox scale_box(const BoundingBox& box, double factor) {
  const GeoPoint c = box.center();
  const double half_lat = 0.5 * (box.ne.lat - box.sw.lat) * factor;
  const double half_lng = 0.5 * (box.ne.lng - box.sw.lng) * factor;
  return clamp(BoundingBox{{c.lat - half_lat, c.lng - half_lng},
                           {c.lat + half_lat, c.lng + half_lng}});
}

BoundingBox world_box() { return {{-90.0, -180.0}, {90.0, 180.0}}; }

}  // namespace locret

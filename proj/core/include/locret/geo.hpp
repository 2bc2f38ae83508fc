#pragma once

#include <numbers>

namespace locret {

/// Mean Earth radius (km) of the spherical model used everywhere.
inline constexpr double kEarthRadiusKm = 6371.0088;
/// Kilometers per degree of latitude on that sphere (~111.195).
inline constexpr double kKmPerDegree = std::numbers::pi / 180.0 * kEarthRadiusKm;
/// 25 miles, the city heuristic radius.
inline constexpr double kCityRadiusKm = 40.2336;

struct GeoPoint {
  double lat = 0.0;
  double lng = 0.0;

  bool valid() const;
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Axis-aligned lat/lng rectangle. No antimeridian wrap: sw.lng <= ne.lng.
struct BoundingBox {
  GeoPoint sw;
  GeoPoint ne;

  bool valid() const;
  GeoPoint center() const;
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Outward extents from a search center, in degrees. The model's 4-float output.
struct ExtentOffsets {
  double sw_lat = 0.0;
  double ne_lat = 0.0;
  double sw_lng = 0.0;
  double ne_lng = 0.0;

  bool nonnegative() const;
  friend bool operator==(const ExtentOffsets&, const ExtentOffsets&) = default;
};

enum class Axis { kLat, kLng };

struct BoxSize {
  double width_km = 0.0;
  double height_km = 0.0;
  double wh_sum_km = 0.0;
  double area_km2 = 0.0;
  double diagonal_km = 0.0;
};

GeoPoint clamp(GeoPoint p);
BoundingBox clamp(const BoundingBox& box);

/// sw = center - (sw offsets), ne = center + (ne offsets), clamped to valid ranges.
BoundingBox to_box(const GeoPoint& center, const ExtentOffsets& offsets);
/// Same as to_box without clamping; used by the losses.
BoundingBox to_box_unclamped(const GeoPoint& center, const ExtentOffsets& offsets);
/// Inverse of to_box for boxes that were not clamped.
ExtentOffsets offsets_from_box(const GeoPoint& center, const BoundingBox& box);

/// Closed-interval containment.
bool contains(const BoundingBox& box, const GeoPoint& p);
/// True when `inner` lies inside `outer` (closed intervals).
bool contains(const BoundingBox& outer, const BoundingBox& inner);

/// Degree difference along one axis converted to km. Longitude uses cos(ref_lat).
double axis_km(double a_deg, double b_deg, Axis axis, double ref_lat_deg);
/// km per degree along an axis at ref_lat (the derivative of axis_km w.r.t. |a-b|).
double km_per_degree(Axis axis, double ref_lat_deg);

/// Local planar distance between two points, using axis_km at the midpoint latitude.
double local_distance_km(const GeoPoint& a, const GeoPoint& b);

BoxSize box_size_km(const BoundingBox& box);

/// Log-scale expansion for point-like admin bounds: max(1, 2.9 - 0.5 ln(d + 1)).
/// Throws std::invalid_argument for d < 0.
double expansion_factor(double diagonal_km);

/// Scales each half-extent by `factor` about the box center, then clamps.
BoundingBox scale_box(const BoundingBox& box, double factor);

/// The whole valid coordinate range.
BoundingBox world_box();

}  // namespace locret

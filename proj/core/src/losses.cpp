#include "locret/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "locret/errors.hpp"

namespace locret {

namespace {

double hinge(double x) { return std::max(x, 0.0); }
double step(double x) { return x > 0.0 ? 1.0 : 0.0; }
double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

std::string_view to_string(BlLossMode m) {
  return m == BlLossMode::kHinge ? "hinge" : "absolute";
}

BlLossMode bl_mode_from_string(std::string_view s) {
  if (s == "hinge") return BlLossMode::kHinge;
  if (s == "absolute") return BlLossMode::kAbsolute;
  throw ConfigError("unknown bl_loss_mode: " + std::string(s));
}

double bl_loss(const BoundingBox& box, const GeoPoint& booked, BlLossMode mode,
               std::optional<double> ref_lat) {
  const double ref = ref_lat.value_or(box.center().lat);
  const double k_lat = km_per_degree(Axis::kLat, ref);
  const double k_lng = km_per_degree(Axis::kLng, ref);
  if (mode == BlLossMode::kHinge) {
    return k_lng * (hinge(box.sw.lng - booked.lng) + hinge(booked.lng - box.ne.lng)) +
           k_lat * (hinge(box.sw.lat - booked.lat) + hinge(booked.lat - box.ne.lat));
  }
  return k_lng * (std::abs(box.sw.lng - booked.lng) + std::abs(box.ne.lng - booked.lng)) +
         k_lat * (std::abs(box.sw.lat - booked.lat) + std::abs(box.ne.lat - booked.lat));
}

double rbs_loss(const BoundingBox& box, std::optional<double> ref_lat) {
  const double ref = ref_lat.value_or(box.center().lat);
  return km_per_degree(Axis::kLng, ref) * (box.ne.lng - box.sw.lng) +
         km_per_degree(Axis::kLat, ref) * (box.ne.lat - box.sw.lat);
}

double vb_loss(const GeoPoint& raw_sw, const GeoPoint& raw_ne) {
  return hinge(raw_sw.lat - raw_ne.lat) + hinge(raw_sw.lng - raw_ne.lng);
}

// Both functions below work relative to the center: with d = booked - center,
// box.sw - booked = -(o.sw + d) and booked - box.ne = d - o.ne. This avoids
// differencing absolute coordinates, whose rounding the km and alpha factors amplify.

LossTerms total_loss(const GeoPoint& center, const GeoPoint& booked, const ExtentOffsets& o,
                     const LossSpec& spec) {
  const double k_lat = km_per_degree(Axis::kLat, center.lat);
  const double k_lng = km_per_degree(Axis::kLng, center.lat);
  const double d_lat = booked.lat - center.lat;
  const double d_lng = booked.lng - center.lng;
  LossTerms t;
  if (spec.mode == BlLossMode::kHinge) {
    t.bl = k_lng * (hinge(-(o.sw_lng + d_lng)) + hinge(d_lng - o.ne_lng)) +
           k_lat * (hinge(-(o.sw_lat + d_lat)) + hinge(d_lat - o.ne_lat));
  } else {
    t.bl = k_lng * (std::abs(o.sw_lng + d_lng) + std::abs(o.ne_lng - d_lng)) +
           k_lat * (std::abs(o.sw_lat + d_lat) + std::abs(o.ne_lat - d_lat));
  }
  t.rbs = k_lng * (o.ne_lng + o.sw_lng) + k_lat * (o.ne_lat + o.sw_lat);
  t.vb = hinge(-(o.sw_lat + o.ne_lat)) + hinge(-(o.sw_lng + o.ne_lng));
  t.total = spec.weights.alpha * t.bl + spec.weights.beta * t.rbs + spec.weights.gamma * t.vb;
  return t;
}

std::array<double, 4> total_loss_gradient(const GeoPoint& center, const GeoPoint& booked,
                                          const ExtentOffsets& o, const LossSpec& spec) {
  const double k_lat = km_per_degree(Axis::kLat, center.lat);
  const double k_lng = km_per_degree(Axis::kLng, center.lat);
  const double d_lat = booked.lat - center.lat;
  const double d_lng = booked.lng - center.lng;
  const auto& w = spec.weights;

  double g_sw_lat = 0.0, g_ne_lat = 0.0, g_sw_lng = 0.0, g_ne_lng = 0.0;
  if (spec.mode == BlLossMode::kHinge) {
    g_sw_lat = -k_lat * step(-(o.sw_lat + d_lat));
    g_ne_lat = -k_lat * step(d_lat - o.ne_lat);
    g_sw_lng = -k_lng * step(-(o.sw_lng + d_lng));
    g_ne_lng = -k_lng * step(d_lng - o.ne_lng);
  } else {
    g_sw_lat = k_lat * sign(o.sw_lat + d_lat);
    g_ne_lat = k_lat * sign(o.ne_lat - d_lat);
    g_sw_lng = k_lng * sign(o.sw_lng + d_lng);
    g_ne_lng = k_lng * sign(o.ne_lng - d_lng);
  }
  std::array<double, 4> g = {w.alpha * g_sw_lat + w.beta * k_lat,
                             w.alpha * g_ne_lat + w.beta * k_lat,
                             w.alpha * g_sw_lng + w.beta * k_lng,
                             w.alpha * g_ne_lng + w.beta * k_lng};
  const double vb_lat = -w.gamma * step(-(o.sw_lat + o.ne_lat));
  const double vb_lng = -w.gamma * step(-(o.sw_lng + o.ne_lng));
  g[0] += vb_lat;
  g[1] += vb_lat;
  g[2] += vb_lng;
  g[3] += vb_lng;
  return g;
}

}  // namespace locret

#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "locret/geo.hpp"

namespace locret {

/// How the booked-listing loss treats a booked point that is inside the box.
///   kHinge    - only distance outside the box is penalized (default).
///   kAbsolute - distance from each bound to the booked coordinate, as literally
///               summed per bound; its per-axis optimum is the median.
enum class BlLossMode { kHinge, kAbsolute };

std::string_view to_string(BlLossMode m);
BlLossMode bl_mode_from_string(std::string_view s);

struct LossWeights {
  double alpha = 250.0;      // booked listing
  double beta = 1.0;         // bounds size
  double gamma = 1'000'000;  // valid bounds

  bool valid() const { return alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0; }
};

struct LossSpec {
  LossWeights weights;
  BlLossMode mode = BlLossMode::kHinge;
};

/// Booked-listing loss in km. `ref_lat` sets the longitude scale; defaults to the box center.
double bl_loss(const BoundingBox& box, const GeoPoint& booked, BlLossMode mode,
               std::optional<double> ref_lat = std::nullopt);

/// Signed width + height in km (negative for inverted boxes).
double rbs_loss(const BoundingBox& box, std::optional<double> ref_lat = std::nullopt);

/// Inversion penalty in degrees: max(sw.lat - ne.lat, 0) + max(sw.lng - ne.lng, 0).
double vb_loss(const GeoPoint& raw_sw, const GeoPoint& raw_ne);

struct LossTerms {
  double bl = 0.0;
  double rbs = 0.0;
  double vb = 0.0;
  double total = 0.0;
};

/// Weighted loss of unclamped offsets around `center` against the booked point.
/// The longitude scale is the search center's latitude.
LossTerms total_loss(const GeoPoint& center, const GeoPoint& booked, const ExtentOffsets& offsets,
                     const LossSpec& spec);

/// d total_loss / d offsets, ordered (sw_lat, ne_lat, sw_lng, ne_lng).
/// Subgradient 0 at every kink.
std::array<double, 4> total_loss_gradient(const GeoPoint& center, const GeoPoint& booked,
                                          const ExtentOffsets& offsets, const LossSpec& spec);

}  // namespace locret

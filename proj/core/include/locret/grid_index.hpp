#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "locret/geo.hpp"

namespace locret {

/// Uniform lat/lng cell grid over a fixed point set (CSR layout).
/// Each point lives in exactly the cell containing it; box queries are exact.
class GridIndex {
 public:
  GridIndex() = default;
  GridIndex(std::span<const GeoPoint> points, double cell_deg = 0.1);

  /// Number of points inside `box` (closed intervals).
  std::size_t count_in_box(const BoundingBox& box) const;
  /// Indices of points inside `box`, ascending.
  std::vector<std::uint32_t> query(const BoundingBox& box) const;

  /// Calls fn(index) for every point in cells overlapping `box` (a superset of the box).
  template <typename Fn>
  void for_each_candidate(const BoundingBox& box, Fn&& fn) const;

  std::size_t size() const { return points_.size(); }
  double cell_deg() const { return cell_deg_; }
  std::size_t num_cells() const { return rows_ * cols_; }
  /// Cell (row, col) of a point, or nullopt if outside the grid.
  std::optional<std::pair<std::size_t, std::size_t>> cell_of(const GeoPoint& p) const;

 private:
  struct Range {
    std::size_t r0, r1, c0, c1;
  };
  std::optional<Range> overlap(const BoundingBox& box) const;
  long row_of(double lat) const;
  long col_of(double lng) const;

  std::vector<GeoPoint> points_;
  double cell_deg_ = 0.1;
  double origin_lat_ = 0.0, origin_lng_ = 0.0;
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<std::uint32_t> cell_start_;  // rows_ * cols_ + 1
  std::vector<std::uint32_t> ids_;
};

template <typename Fn>
void GridIndex::for_each_candidate(const BoundingBox& box, Fn&& fn) const {
  const auto range = overlap(box);
  if (!range) return;
  for (std::size_t r = range->r0; r <= range->r1; ++r) {
    const std::size_t base = r * cols_;
    for (std::uint32_t k = cell_start_[base + range->c0]; k < cell_start_[base + range->c1 + 1]; ++k) {
      fn(ids_[k]);
    }
  }
}

}  // namespace locret

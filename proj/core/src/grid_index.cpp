#include "locret/grid_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace locret {

GridIndex::GridIndex(std::span<const GeoPoint> points, double cell_deg)
    : points_(points.begin(), points.end()), cell_deg_(cell_deg) {
  if (!(cell_deg > 0.0)) throw std::invalid_argument("GridIndex: cell size must be > 0");
  if (points_.empty()) return;
  double min_lat = points_[0].lat, max_lat = points_[0].lat;
  double min_lng = points_[0].lng, max_lng = points_[0].lng;
  for (const auto& p : points_) {
    min_lat = std::min(min_lat, p.lat);
    max_lat = std::max(max_lat, p.lat);
    min_lng = std::min(min_lng, p.lng);
    max_lng = std::max(max_lng, p.lng);
  }
  origin_lat_ = std::floor(min_lat / cell_deg_) * cell_deg_;
  origin_lng_ = std::floor(min_lng / cell_deg_) * cell_deg_;
  rows_ = static_cast<std::size_t>(row_of(max_lat)) + 1;
  cols_ = static_cast<std::size_t>(col_of(max_lng)) + 1;

  std::vector<std::size_t> cell(points_.size());
  std::vector<std::uint32_t> counts(rows_ * cols_ + 1, 0);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    cell[i] = static_cast<std::size_t>(row_of(points_[i].lat)) * cols_ +
              static_cast<std::size_t>(col_of(points_[i].lng));
    ++counts[cell[i] + 1];
  }
  cell_start_.resize(counts.size());
  std::partial_sum(counts.begin(), counts.end(), cell_start_.begin());
  ids_.resize(points_.size());
  std::vector<std::uint32_t> cursor(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    ids_[cursor[cell[i]]++] = static_cast<std::uint32_t>(i);
  }
}

long GridIndex::row_of(double lat) const {
  return static_cast<long>(std::floor((lat - origin_lat_) / cell_deg_));
}

long GridIndex::col_of(double lng) const {
  return static_cast<long>(std::floor((lng - origin_lng_) / cell_deg_));
}

std::optional<std::pair<std::size_t, std::size_t>> GridIndex::cell_of(const GeoPoint& p) const {
  const long r = row_of(p.lat), c = col_of(p.lng);
  if (r < 0 || c < 0 || r >= static_cast<long>(rows_) || c >= static_cast<long>(cols_)) {
    return std::nullopt;
  }
  return std::pair{static_cast<std::size_t>(r), static_cast<std::size_t>(c)};
}

std::optional<GridIndex::Range> GridIndex::overlap(const BoundingBox& box) const {
  if (points_.empty() || box.sw.lat > box.ne.lat || box.sw.lng > box.ne.lng) return std::nullopt;
  const long last_row = static_cast<long>(rows_) - 1;
  const long last_col = static_cast<long>(cols_) - 1;
  const long r0 = row_of(box.sw.lat), r1 = row_of(box.ne.lat);
  const long c0 = col_of(box.sw.lng), c1 = col_of(box.ne.lng);
  if (r1 < 0 || c1 < 0 || r0 > last_row || c0 > last_col) return std::nullopt;
  return Range{static_cast<std::size_t>(std::max(0L, r0)),
               static_cast<std::size_t>(std::min(last_row, r1)),
               static_cast<std::size_t>(std::max(0L, c0)),
               static_cast<std::size_t>(std::min(last_col, c1))};
}

std::size_t GridIndex::count_in_box(const BoundingBox& box) const {
  const auto range = overlap(box);
  if (!range) return 0;
  // Rows/cols strictly inside the box's own row/col span are fully contained,
  // because cell assignment and the box edges go through the same monotone map.
  const long br0 = row_of(box.sw.lat), br1 = row_of(box.ne.lat);
  const long bc0 = col_of(box.sw.lng), bc1 = col_of(box.ne.lng);
  std::size_t count = 0;
  for (std::size_t r = range->r0; r <= range->r1; ++r) {
    const bool row_inside = static_cast<long>(r) > br0 && static_cast<long>(r) < br1;
    const std::size_t base = r * cols_;
    if (row_inside && static_cast<long>(range->c0) > bc0 && static_cast<long>(range->c1) < bc1) {
      count += cell_start_[base + range->c1 + 1] - cell_start_[base + range->c0];
      continue;
    }
    for (std::size_t c = range->c0; c <= range->c1; ++c) {
      const bool inside = row_inside && static_cast<long>(c) > bc0 && static_cast<long>(c) < bc1;
      const std::uint32_t begin = cell_start_[base + c], end = cell_start_[base + c + 1];
      if (inside) {
        count += end - begin;
        continue;
      }
      for (std::uint32_t k = begin; k < end; ++k) {
        if (contains(box, points_[ids_[k]])) ++count;
      }
    }
  }
  return count;
}

std::vector<std::uint32_t> GridIndex::query(const BoundingBox& box) const {
  std::vector<std::uint32_t> out;
  for_each_candidate(box, [&](std::uint32_t id) {
    if (contains(box, points_[id])) out.push_back(id);
  });
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace locret

#pragma once

#include "kinetunnel/geometry.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace kinetunnel {

struct NearestResult {
  std::size_t index = 0;
  double distance = 0.0;

  bool operator==(const NearestResult&) const = default;
};

/// Uniform-grid nearest-neighbour index over a fixed set of via-points.
///
/// Queries return exactly what an exhaustive scan returns, including the
/// lowest-index tie break. Points far outside the grid are handled by
/// expanding rings of cells until no unvisited cell can hold a closer point.
class SpatialIndex {
 public:
  SpatialIndex() = default;
  /// `cell_size` <= 0 picks twice the mean point spacing.
  explicit SpatialIndex(std::span<const Vec3> points, double cell_size = 0.0);

  NearestResult nearest(const Vec3& p) const;

  std::size_t size() const { return points_.size(); }
  double cell_size() const { return cell_; }
  const std::array<std::int64_t, 3>& dims() const { return dims_; }

 private:
  std::int64_t flat(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return (k * dims_[1] + j) * dims_[0] + i;
  }

  std::vector<Vec3> points_;
  Vec3 min_ = Vec3::Zero();
  double cell_ = 1.0;
  std::array<std::int64_t, 3> dims_{1, 1, 1};
  // CSR layout: cell c owns sorted_[cell_start_[c] .. cell_start_[c + 1]).
  std::vector<std::uint32_t> cell_start_;
  std::vector<std::uint32_t> sorted_;
};

/// Index sized for a tunnel: cell = max(CI diameter, 2 x spacing).
SpatialIndex build_spatial_index(const Trajectory& trajectory, ConfidenceInterval ci);

}  // namespace kinetunnel

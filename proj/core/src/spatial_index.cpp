#include "kinetunnel/spatial_index.hpp"

#include "kinetunnel/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kinetunnel {

namespace {

constexpr std::int64_t kMaxCells = std::int64_t{1} << 21;

std::int64_t cell_coord(double value, double origin, double cell) {
  const double c = std::floor((value - origin) / cell);
  return static_cast<std::int64_t>(std::clamp(c, -1e12, 1e12));
}

}  // namespace

SpatialIndex::SpatialIndex(std::span<const Vec3> points, double cell_size)
    : points_(points.begin(), points.end()) {
  if (points_.empty()) {
    throw Error(ErrorCode::DegeneratePath, "spatial index needs at least one point");
  }
  if (points_.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::InvalidArgument, "too many points for spatial index");
  }

  Vec3 lo = points_.front();
  Vec3 hi = points_.front();
  for (const auto& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  min_ = lo;

  if (!(cell_size > 0.0)) {
    const double len = arc_length(points_);
    cell_size = points_.size() > 1 ? 2.0 * len / static_cast<double>(points_.size() - 1) : 1.0;
    if (!(cell_size > 0.0)) cell_size = 1.0;
  }
  cell_ = cell_size;

  const Vec3 extent = hi - lo;
  auto compute_dims = [&] {
    for (int a = 0; a < 3; ++a) {
      dims_[a] = static_cast<std::int64_t>(std::floor(extent[a] / cell_)) + 1;
    }
  };
  compute_dims();
  while (dims_[0] * dims_[1] * dims_[2] > kMaxCells) {
    cell_ *= 2.0;
    compute_dims();
  }

  const std::int64_t n_cells = dims_[0] * dims_[1] * dims_[2];
  std::vector<std::uint32_t> owner(points_.size());
  cell_start_.assign(static_cast<std::size_t>(n_cells) + 1, 0);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    std::int64_t c[3];
    for (int a = 0; a < 3; ++a) {
      c[a] = std::clamp<std::int64_t>(cell_coord(points_[i][a], min_[a], cell_), 0, dims_[a] - 1);
    }
    owner[i] = static_cast<std::uint32_t>(flat(c[0], c[1], c[2]));
    ++cell_start_[owner[i] + 1];
  }
  for (std::size_t c = 1; c < cell_start_.size(); ++c) cell_start_[c] += cell_start_[c - 1];

  sorted_.resize(points_.size());
  std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    sorted_[fill[owner[i]]++] = static_cast<std::uint32_t>(i);
  }
}

NearestResult SpatialIndex::nearest(const Vec3& p) const {
  if (points_.empty()) {
    throw Error(ErrorCode::DegeneratePath, "query on empty spatial index");
  }

  std::int64_t c[3];
  std::int64_t first_ring = 0;
  std::int64_t last_ring = 0;
  for (int a = 0; a < 3; ++a) {
    c[a] = cell_coord(p[a], min_[a], cell_);
    const std::int64_t hi = dims_[a] - 1;
    const std::int64_t outside = c[a] < 0 ? -c[a] : (c[a] > hi ? c[a] - hi : 0);
    first_ring = std::max(first_ring, outside);
    last_ring = std::max(last_ring, std::max(c[a], hi - c[a]));
  }

  std::uint32_t best = 0;
  double best_sq = std::numeric_limits<double>::infinity();

  auto visit_cell = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
    const auto cell = static_cast<std::size_t>(flat(i, j, k));
    for (std::uint32_t s = cell_start_[cell]; s < cell_start_[cell + 1]; ++s) {
      const std::uint32_t idx = sorted_[s];
      const double d2 = (p - points_[idx]).squaredNorm();
      if (d2 < best_sq || (d2 == best_sq && idx < best)) {
        best_sq = d2;
        best = idx;
      }
    }
  };

  for (std::int64_t r = first_ring; r <= last_ring; ++r) {
    const std::int64_t k0 = std::max<std::int64_t>(c[2] - r, 0);
    const std::int64_t k1 = std::min<std::int64_t>(c[2] + r, dims_[2] - 1);
    const std::int64_t j0 = std::max<std::int64_t>(c[1] - r, 0);
    const std::int64_t j1 = std::min<std::int64_t>(c[1] + r, dims_[1] - 1);
    const std::int64_t i0 = std::max<std::int64_t>(c[0] - r, 0);
    const std::int64_t i1 = std::min<std::int64_t>(c[0] + r, dims_[0] - 1);
    for (std::int64_t k = k0; k <= k1; ++k) {
      const bool k_shell = std::abs(k - c[2]) == r;
      for (std::int64_t j = j0; j <= j1; ++j) {
        if (k_shell || std::abs(j - c[1]) == r) {
          for (std::int64_t i = i0; i <= i1; ++i) visit_cell(i, j, k);
        } else {
          if (c[0] - r >= 0 && c[0] - r < dims_[0]) visit_cell(c[0] - r, j, k);
          if (r > 0 && c[0] + r >= 0 && c[0] + r < dims_[0]) visit_cell(c[0] + r, j, k);
        }
      }
    }
    // Every cell beyond ring r is at least r whole cells away from p.
    const double bound = static_cast<double>(r) * cell_;
    if (best_sq < bound * bound) break;
  }

  return {best, std::sqrt(best_sq)};
}

SpatialIndex build_spatial_index(const Trajectory& trajectory, ConfidenceInterval ci) {
  return SpatialIndex(trajectory.via_points, std::max(diameter(ci), 2.0 * trajectory.spacing));
}

}  // namespace kinetunnel

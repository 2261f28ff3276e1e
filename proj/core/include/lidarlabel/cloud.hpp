#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace lidarlabel {

// Sensor frame: x forward, y left, z up. Meters.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;

  bool operator==(const Point3&) const = default;
};

inline Eigen::Vector3d to_vector(const Point3& p) { return {p.x, p.y, p.z}; }

inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) &&
         std::isfinite(p.intensity);
}

// Sorted ascending, no duplicates.
using IndexSet = std::vector<std::size_t>;

struct PointCloud {
  std::string frame_id;
  std::vector<Point3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Point3& operator[](std::size_t i) const { return points[i]; }

  IndexSet all_indices() const;
};

struct IngestStats {
  std::size_t records = 0;
  std::size_t dropped_non_finite = 0;
};

// KITTI velodyne layout: 4 little-endian float32 per point (x, y, z, intensity).
PointCloud load_kitti_bin(const std::filesystem::path& path,
                          IngestStats* stats = nullptr);
void write_kitti_bin(const std::filesystem::path& path, const PointCloud& cloud);

// Header row must name x, y and z; intensity is optional and defaults to 0.
// Column order is free and unknown columns are ignored.
PointCloud load_csv(const std::filesystem::path& path,
                    IngestStats* stats = nullptr);
PointCloud parse_csv(std::string_view text, IngestStats* stats = nullptr);
// Writes shortest round-trip decimal representations.
void write_csv(const std::filesystem::path& path, const PointCloud& cloud);

struct CellKey {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 73856093ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 19349663ULL;
    h ^= static_cast<std::uint64_t>(k.z) * 83492791ULL;
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

inline CellKey cell_of(const Point3& p, double cell_size) {
  return {static_cast<std::int64_t>(std::floor(p.x / cell_size)),
          static_cast<std::int64_t>(std::floor(p.y / cell_size)),
          static_cast<std::int64_t>(std::floor(p.z / cell_size))};
}

// Uniform voxel grid over a cloud (or a subset of it). The cloud must outlive
// the index. Immutable after construction.
class VoxelIndex {
 public:
  VoxelIndex(const PointCloud& cloud, double cell_size);
  VoxelIndex(const PointCloud& cloud, std::span<const std::size_t> subset,
             double cell_size);

  double cell_size() const { return cell_size_; }
  std::size_t cell_count() const { return cells_.size(); }
  std::size_t indexed_count() const { return order_.size(); }

  // Point indices stored in one cell; empty span when unoccupied.
  std::span<const std::size_t> cell(const CellKey& key) const;

  // Indices at Euclidean distance <= radius from p, sorted.
  IndexSet neighbors_within(const Point3& p, double radius) const;

  template <typename Fn>
  void for_each_within(const Point3& p, double radius, Fn&& fn) const {
    const double r2 = radius * radius;
    const CellKey lo = cell_of({p.x - radius, p.y - radius, p.z - radius},
                               cell_size_);
    const CellKey hi = cell_of({p.x + radius, p.y + radius, p.z + radius},
                               cell_size_);
    auto visit = [&](std::size_t idx) {
      const Point3& q = (*cloud_)[idx];
      const double dx = q.x - p.x;
      const double dy = q.y - p.y;
      const double dz = q.z - p.z;
      if (dx * dx + dy * dy + dz * dz <= r2) fn(idx);
    };
    const double span_cells = static_cast<double>(hi.x - lo.x + 1) *
                              static_cast<double>(hi.y - lo.y + 1) *
                              static_cast<double>(hi.z - lo.z + 1);
    if (span_cells > static_cast<double>(order_.size())) {
      for (std::size_t idx : order_) visit(idx);
      return;
    }
    for (std::int64_t cx = lo.x; cx <= hi.x; ++cx) {
      for (std::int64_t cy = lo.y; cy <= hi.y; ++cy) {
        for (std::int64_t cz = lo.z; cz <= hi.z; ++cz) {
          for (std::size_t idx : cell({cx, cy, cz})) visit(idx);
        }
      }
    }
  }

 private:
  void build(std::span<const std::size_t> subset);

  const PointCloud* cloud_;
  double cell_size_;
  std::vector<std::size_t> order_;
  std::unordered_map<CellKey, std::pair<std::size_t, std::size_t>, CellKeyHash>
      cells_;
};

VoxelIndex build_index(const PointCloud& cloud, double cell_size);

// Indices whose horizontal (x, y) distance to center is <= radius.
IndexSet prune_around(const PointCloud& cloud, const Point3& center,
                      double radius);
IndexSet prune_around(const PointCloud& cloud, std::span<const std::size_t> candidates,
                      const Point3& center, double radius);

// One survivor per occupied voxel: the member closest to the voxel's member
// centroid (lowest index on ties). Result is a subset of `indices`.
IndexSet voxel_downsample(const PointCloud& cloud,
                          std::span<const std::size_t> indices, double cell_size);

}  // namespace lidarlabel

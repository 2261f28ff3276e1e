#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lidarlabel/cloud.hpp"

namespace lidarlabel {

// Plane {p : normal . p = offset}, normal unit length with normal.z() >= 0.
struct PlaneModel {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;
  IndexSet inliers;

  double signed_distance(const Point3& p) const {
    return normal.dot(to_vector(p)) - offset;
  }
};

struct GroundParams {
  double seed_fraction = 0.1;
  double distance_threshold = 0.2;  // meters
  int max_iterations = 10;
  double convergence_angle = 0.5 * 3.14159265358979323846 / 180.0;  // radians
  // 0 fits one plane per frame; > 0 fits one plane per square tile of this
  // edge length (meters) using the same iteration.
  double tile_size = 0.0;

  bool operator==(const GroundParams&) const = default;
};

void validate(const GroundParams& params);

struct GroundResult {
  PlaneModel plane;      // global plane
  IndexSet nonground;
  std::vector<bool> is_ground;
  int iterations = 0;
  bool converged = false;
};

// The ceil(fraction * n) lowest-z indices, ties by index. Returned sorted.
IndexSet seed_ground_set(const PointCloud& cloud, double seed_fraction);

// Least-variance direction of the covariance of the selected points, via SVD.
// Throws kInsufficientPoints for fewer than 3 points and kDegenerateGeometry
// for collinear input.
PlaneModel fit_plane_svd(const PointCloud& cloud, std::span<const std::size_t> indices);

// Indices with |n . p - d| < thresh.
IndexSet resample_ground(const PointCloud& cloud, const PlaneModel& plane, double thresh);
IndexSet resample_ground(const PointCloud& cloud, std::span<const std::size_t> candidates,
                         const PlaneModel& plane, double thresh);

GroundResult remove_ground(const PointCloud& cloud, const GroundParams& params = {});

// Angle between two plane normals, ignoring orientation.
double normal_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

}  // namespace lidarlabel

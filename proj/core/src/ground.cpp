#include "lidarlabel/ground.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include <Eigen/SVD>

#include "lidarlabel/error.hpp"

namespace lidarlabel {
namespace {

struct Iteration {
  PlaneModel plane;
  int iterations = 0;
  bool converged = false;
};

IndexSet lowest_fraction(const PointCloud& cloud, std::span<const std::size_t> candidates,
                         double seed_fraction, std::size_t min_count = 1) {
  const auto count = static_cast<std::size_t>(
      std::ceil(seed_fraction * static_cast<double>(candidates.size())));
  IndexSet order(candidates.begin(), candidates.end());
  const std::size_t keep = std::min(order.size(), std::max(count, min_count));
  auto by_height = [&](std::size_t a, std::size_t b) {
    return std::tie(cloud[a].z, a) < std::tie(cloud[b].z, b);
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep - 1),
                   order.end(), by_height);
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

Iteration iterate_plane(const PointCloud& cloud, std::span<const std::size_t> candidates,
                        const GroundParams& params) {
  Iteration it;
  // A plane needs three points even when the fraction rounds lower.
  const IndexSet seed = lowest_fraction(cloud, candidates, params.seed_fraction, 3);
  it.plane = fit_plane_svd(cloud, seed);
  for (int k = 1; k <= params.max_iterations; ++k) {
    const IndexSet ground =
        resample_ground(cloud, candidates, it.plane, params.distance_threshold);
    if (ground.size() < 3) break;
    PlaneModel next;
    try {
      next = fit_plane_svd(cloud, ground);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateGeometry) throw;
      break;
    }
    const double rotation = normal_angle(it.plane.normal, next.normal);
    // The low seed biases the first planes downward while barely tilting
    // them, so the offset has to settle too.
    const double shift = std::abs(next.offset - it.plane.offset);
    it.plane = std::move(next);
    it.iterations = k;
    if (rotation < params.convergence_angle && shift < 0.01 * params.distance_threshold) {
      it.converged = true;
      break;
    }
  }
  it.plane.inliers =
      resample_ground(cloud, candidates, it.plane, params.distance_threshold);
  return it;
}

}  // namespace

void validate(const GroundParams& params) {
  if (!(params.seed_fraction > 0.0 && params.seed_fraction <= 1.0)) {
    fail(ErrorCode::kParameter, "seed_fraction must be in (0, 1]");
  }
  if (!(params.distance_threshold > 0.0)) {
    fail(ErrorCode::kParameter, "ground distance threshold must be positive");
  }
  if (params.max_iterations < 1) fail(ErrorCode::kParameter, "max_iterations must be >= 1");
  if (params.convergence_angle < 0.0) {
    fail(ErrorCode::kParameter, "convergence angle must be non-negative");
  }
  if (params.tile_size < 0.0) fail(ErrorCode::kParameter, "tile_size must be >= 0");
}

double normal_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = std::abs(a.normalized().dot(b.normalized()));
  return std::acos(std::min(1.0, c));
}

IndexSet seed_ground_set(const PointCloud& cloud, double seed_fraction) {
  if (cloud.empty()) fail(ErrorCode::kEmptyCloud, "cannot seed ground on an empty cloud");
  if (!(seed_fraction > 0.0 && seed_fraction <= 1.0)) {
    fail(ErrorCode::kParameter, "seed_fraction must be in (0, 1]");
  }
  const IndexSet all = cloud.all_indices();
  return lowest_fraction(cloud, all, seed_fraction);
}

PlaneModel fit_plane_svd(const PointCloud& cloud, std::span<const std::size_t> indices) {
  if (indices.size() < 3) {
    fail(ErrorCode::kInsufficientPoints, "plane fit needs at least 3 points");
  }
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (std::size_t i : indices) mean += to_vector(cloud[i]);
  mean /= static_cast<double>(indices.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i : indices) {
    const Eigen::Vector3d d = to_vector(cloud[i]) - mean;
    cov.noalias() += d * d.transpose();
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU);
  const Eigen::Vector3d sv = svd.singularValues();
  // Rank < 2 means the points are collinear (or coincident): no unique plane.
  if (!(sv(1) > 1e-12 * std::max(sv(0), 1e-300)) || sv(0) == 0.0) {
    fail(ErrorCode::kDegenerateGeometry, "points are collinear; plane is undefined");
  }
  Eigen::Vector3d normal = svd.matrixU().col(2).normalized();
  if (normal.z() < 0.0) normal = -normal;
  PlaneModel plane;
  plane.normal = normal;
  plane.offset = normal.dot(mean);
  plane.inliers.assign(indices.begin(), indices.end());
  std::sort(plane.inliers.begin(), plane.inliers.end());
  return plane;
}

IndexSet resample_ground(const PointCloud& cloud, const PlaneModel& plane, double thresh) {
  const IndexSet all = cloud.all_indices();
  return resample_ground(cloud, all, plane, thresh);
}

IndexSet resample_ground(const PointCloud& cloud, std::span<const std::size_t> candidates,
                         const PlaneModel& plane, double thresh) {
  if (!(thresh > 0.0)) fail(ErrorCode::kParameter, "threshold must be positive");
  IndexSet out;
  for (std::size_t i : candidates) {
    if (std::abs(plane.signed_distance(cloud[i])) < thresh) out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

GroundResult remove_ground(const PointCloud& cloud, const GroundParams& params) {
  validate(params);
  if (cloud.size() < 3) fail(ErrorCode::kInsufficientPoints, "ground removal needs >= 3 points");

  const IndexSet all = cloud.all_indices();
  Iteration global = iterate_plane(cloud, all, params);

  GroundResult result;
  result.iterations = global.iterations;
  result.converged = global.converged;
  result.is_ground.assign(cloud.size(), false);

  if (params.tile_size > 0.0) {
    std::map<std::pair<std::int64_t, std::int64_t>, IndexSet> tiles;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      tiles[{static_cast<std::int64_t>(std::floor(cloud[i].x / params.tile_size)),
             static_cast<std::int64_t>(std::floor(cloud[i].y / params.tile_size))}]
          .push_back(i);
    }
    for (const auto& [key, members] : tiles) {
      IndexSet inliers;
      try {
        if (members.size() < 3) throw Error(ErrorCode::kInsufficientPoints, "tile");
        inliers = iterate_plane(cloud, members, params).plane.inliers;
      } catch (const Error&) {
        // Sparse or degenerate tile: classify against the global plane.
        inliers = resample_ground(cloud, members, global.plane, params.distance_threshold);
      }
      for (std::size_t i : inliers) result.is_ground[i] = true;
    }
  } else {
    for (std::size_t i : global.plane.inliers) result.is_ground[i] = true;
  }

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!result.is_ground[i]) result.nonground.push_back(i);
  }
  result.plane = std::move(global.plane);
  return result;
}

}  // namespace lidarlabel

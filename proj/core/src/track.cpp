#include "lidarlabel/track.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "lidarlabel/error.hpp"

namespace lidarlabel {

void validate(const KalmanParams& params) {
  if (!(params.dt > 0.0)) fail(ErrorCode::kParameter, "Kalman dt must be positive");
  if ((params.process_noise.array() < 0.0).any() ||
      (params.observation_noise.array() < 0.0).any() ||
      (params.initial_covariance.array() < 0.0).any()) {
    fail(ErrorCode::kParameter, "Kalman noise diagonals must be non-negative");
  }
}

Matrix6d transition_matrix(double dt) {
  Matrix6d F = Matrix6d::Identity();
  F(0, 2) = dt;
  F(1, 3) = dt;
  F(2, 4) = dt;
  F(3, 5) = dt;
  F(0, 4) = 0.5 * dt * dt;
  F(1, 5) = 0.5 * dt * dt;
  return F;
}

Eigen::Matrix<double, 2, 6> observation_matrix() {
  Eigen::Matrix<double, 2, 6> H = Eigen::Matrix<double, 2, 6>::Zero();
  H(0, 0) = 1.0;
  H(1, 1) = 1.0;
  return H;
}

TrackState init_track(const TopViewBox& box, bool rigid, const KalmanParams& params,
                      std::uint64_t annotation_id) {
  TrackState ts;
  ts.x << box.cx, box.cy, 0.0, 0.0, 0.0, 0.0;
  ts.P = params.initial_covariance.asDiagonal();
  ts.annotation_id = annotation_id;
  ts.rigid = rigid;
  return ts;
}

TrackState predict(const TrackState& ts, const KalmanParams& params) {
  const Matrix6d F = transition_matrix(params.dt);
  TrackState out = ts;
  out.x = F * ts.x;
  Matrix6d P = F * ts.P * F.transpose();
  P.diagonal() += params.process_noise;
  out.P = 0.5 * (P + P.transpose());
  return out;
}

TrackState update(const TrackState& ts, const Eigen::Vector2d& z, const KalmanParams& params) {
  if (!z.allFinite()) fail(ErrorCode::kNumerical, "observation is not finite");
  const Eigen::Matrix<double, 2, 6> H = observation_matrix();
  const Eigen::Matrix2d R = params.observation_noise.asDiagonal();
  const Eigen::Vector2d innovation = z - H * ts.x;
  const Eigen::Matrix2d S = R + H * ts.P * H.transpose();
  const Eigen::LDLT<Eigen::Matrix2d> ldlt(S);
  if (ldlt.info() != Eigen::Success || !(std::abs(S.determinant()) > 0.0) ||
      !ldlt.isPositive()) {
    fail(ErrorCode::kNumerical, "innovation covariance is singular");
  }
  // K = P H^T S^-1, computed as (S^-1 H P)^T with S symmetric.
  const Eigen::Matrix<double, 6, 2> K = ldlt.solve(H * ts.P).transpose();
  const Matrix6d I_KH = Matrix6d::Identity() - K * H;

  TrackState out = ts;
  out.x = ts.x + K * innovation;
  const Matrix6d P = I_KH * ts.P * I_KH.transpose() + K * R * K.transpose();
  out.P = 0.5 * (P + P.transpose());
  return out;
}

std::optional<Proposal> propagate_annotation(const PointCloud& cloud,
                                             std::span<const std::size_t> nonground,
                                             const TrackState& predicted,
                                             const TopViewBox& prior,
                                             const PropagationParams& params) {
  const Eigen::Vector2d center = predicted.position();
  const double r2 = params.cluster.prune_radius * params.cluster.prune_radius;
  std::size_t seed = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i : nonground) {
    const double dx = cloud[i].x - center.x();
    const double dy = cloud[i].y - center.y();
    const double d2 = dx * dx + dy * dy;
    if (d2 <= r2 && d2 < best) {
      best = d2;
      seed = i;
    }
  }
  if (!std::isfinite(best)) return std::nullopt;

  const Cluster cluster = expand_cluster(cloud, nonground, seed, params.cluster);
  Proposal proposal;
  proposal.seed = seed;
  proposal.members = restore_full_resolution(cloud, cluster, params.cluster.epsilon);

  const bool enough = proposal.members.size() >= params.fit.min_cluster_size;
  if (!enough) {
    // Too few returns to re-estimate; carry the prior shape to the prediction.
    proposal.box = prior;
    proposal.box.cx = center.x();
    proposal.box.cy = center.y();
    return proposal;
  }

  const auto pts = top_view(cloud, proposal.members);
  if (predicted.rigid) {
    proposal.box = fit_rectangle_frozen(pts, params.fit, prior.width, prior.length,
                                        prior.yaw, params.sensor_xy);
  } else {
    proposal.box = fit_rectangle(pts, params.fit);
  }
  double zmin = std::numeric_limits<double>::infinity();
  double zmax = -zmin;
  for (std::size_t i : proposal.members) {
    zmin = std::min(zmin, cloud[i].z);
    zmax = std::max(zmax, cloud[i].z);
  }
  proposal.box.z = ZExtent{zmin, zmax};
  proposal.box.label = prior.label;
  return proposal;
}

}  // namespace lidarlabel

#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include <Eigen/Core>

#include "lidarlabel/boxfit.hpp"
#include "lidarlabel/cloud.hpp"
#include "lidarlabel/cluster.hpp"

namespace lidarlabel {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

// Constant-acceleration model over [px, py, vx, vy, ax, ay].
struct KalmanParams {
  double dt = 0.1;  // seconds
  Vector6d process_noise = (Vector6d() << 0.01, 0.01, 0.1, 0.1, 1.0, 1.0).finished();
  // Observation variances (m^2) for the observed center.
  Eigen::Vector2d observation_noise{0.05 * 0.05, 0.05 * 0.05};
  Vector6d initial_covariance = (Vector6d() << 0.25, 0.25, 1.0, 1.0, 1.0, 1.0).finished();

  bool operator==(const KalmanParams&) const = default;
};

void validate(const KalmanParams& params);

Matrix6d transition_matrix(double dt);
Eigen::Matrix<double, 2, 6> observation_matrix();

struct TrackState {
  Vector6d x = Vector6d::Zero();
  Matrix6d P = Matrix6d::Identity();
  std::uint64_t annotation_id = 0;
  bool rigid = false;

  Eigen::Vector2d position() const { return x.head<2>(); }
  bool operator==(const TrackState&) const = default;
};

// Position from the box center; velocity and acceleration start at zero.
TrackState init_track(const TopViewBox& box, bool rigid, const KalmanParams& params,
                      std::uint64_t annotation_id = 0);

TrackState predict(const TrackState& ts, const KalmanParams& params);

// Joseph-form update with an observed center. Throws kNumerical if the
// innovation covariance is singular or z is non-finite.
TrackState update(const TrackState& ts, const Eigen::Vector2d& z, const KalmanParams& params);

struct PropagationParams {
  ClusterParams cluster;
  FitParams fit;
  Eigen::Vector2d sensor_xy = Eigen::Vector2d::Zero();
};

struct Proposal {
  TopViewBox box;
  std::size_t seed = 0;
  IndexSet members;
};

// Proposes the box for the next frame from a predicted track. The seed is the
// non-ground point horizontally nearest the predicted center within the prune
// radius; nullopt signals a lost track. Rigid tracks keep (width, length) and
// only re-estimate heading and center; non-rigid tracks run a full fit.
std::optional<Proposal> propagate_annotation(const PointCloud& cloud,
                                             std::span<const std::size_t> nonground,
                                             const TrackState& predicted,
                                             const TopViewBox& prior,
                                             const PropagationParams& params = {});

}  // namespace lidarlabel

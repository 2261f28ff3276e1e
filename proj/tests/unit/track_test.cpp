#include <cmath>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "lidarlabel/error.hpp"
#include "lidarlabel/track.hpp"
#include "synthetic.hpp"

namespace lidarlabel {
namespace {

using testing::gaussian;
using testing::Rng;
using testing::uniform;

TopViewBox box_at(double cx, double cy) {
  TopViewBox b;
  b.cx = cx;
  b.cy = cy;
  b.width = 1.8;
  b.length = 4.5;
  b.label = ObjectClass::kCar;
  return b;
}

TEST(InitTrack, StateFromCenter) {
  const TrackState ts = init_track(box_at(3, -2), true, {});
  EXPECT_EQ(ts.x, (Vector6d() << 3, -2, 0, 0, 0, 0).finished());
  EXPECT_EQ(ts.P, Matrix6d(KalmanParams{}.initial_covariance.asDiagonal()));
  EXPECT_EQ(init_track(box_at(3, -2), true, {}), ts);
}

TEST(Predict, ConstantVelocity) {
  TrackState ts;
  ts.x << 0, 0, 1, 0, 0, 0;
  const TrackState p = predict(ts, {});
  EXPECT_NEAR(p.x(0), 0.1, 1e-15);
  EXPECT_NEAR(p.x(1), 0.0, 1e-15);
}

TEST(Predict, ConstantAcceleration) {
  TrackState ts;
  ts.x << 0, 0, 0, 0, 2, 0;
  const TrackState p = predict(ts, {});
  EXPECT_NEAR(p.x(0), 0.01, 1e-15);
  EXPECT_NEAR(p.x(2), 0.2, 1e-15);
}

TEST(Predict, FiftyStepsMatchClosedForm) {
  KalmanParams params;
  params.process_noise.setZero();
  TrackState ts;
  ts.x << 1.5, -2.0, 3.0, 0.5, -0.4, 0.9;
  for (int k = 0; k < 50; ++k) ts = predict(ts, params);
  const double t = 50 * params.dt;
  EXPECT_NEAR(ts.x(0), 1.5 + 3.0 * t + 0.5 * -0.4 * t * t, 1e-9);
  EXPECT_NEAR(ts.x(1), -2.0 + 0.5 * t + 0.5 * 0.9 * t * t, 1e-9);
  EXPECT_NEAR(ts.x(2), 3.0 - 0.4 * t, 1e-9);
  EXPECT_NEAR(ts.x(3), 0.5 + 0.9 * t, 1e-9);
}

TEST(Update, ObservationAtPredictionShrinksCovariance) {
  const TrackState ts = predict(init_track(box_at(1, 1), false, {}), {});
  const TrackState u = update(ts, ts.position(), {});
  EXPECT_LT((u.position() - ts.position()).norm(), 1e-15);
  EXPECT_LT(u.P.trace(), ts.P.trace());
}

TEST(Update, HugeNoiseLeavesPrior) {
  KalmanParams params;
  params.observation_noise = {1e9, 1e9};
  const TrackState ts = predict(init_track(box_at(1, 1), false, params), params);
  const TrackState u = update(ts, {5.0, -3.0}, params);
  EXPECT_LT((u.x - ts.x).norm(), 1e-6 * (1.0 + ts.x.norm()));
  EXPECT_LT((u.P - ts.P).norm(), 1e-6 * ts.P.norm());
}

TEST(Update, PullsTowardObservation) {
  const TrackState ts = init_track(box_at(0, 0), false, {});
  const TrackState u = update(ts, {0.2, 0.0}, {});
  EXPECT_GT(u.x(0), 0.0);
  EXPECT_LT(u.x(0), 0.2);
}

TEST(Update, SingularInnovation) {
  KalmanParams params;
  params.observation_noise.setZero();
  params.initial_covariance.setZero();
  const TrackState ts = init_track(box_at(0, 0), false, params);
  try {
    update(ts, {1, 1}, params);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumerical);
  }
}

TEST(Update, NonFiniteObservation) {
  const TrackState ts = init_track(box_at(0, 0), false, {});
  EXPECT_THROW(update(ts, {std::nan(""), 0}, {}), Error);
}

TEST(KalmanProperties, CovarianceStaysSymmetricPsd) {
  Rng rng(61);
  KalmanParams params;
  TrackState ts = init_track(box_at(0, 0), false, params);
  for (int k = 0; k < 2000; ++k) {
    ts = predict(ts, params);
    if (uniform(rng, 0, 1) < 0.7) {
      ts = update(ts, ts.position() + Eigen::Vector2d(gaussian(rng, 0.3), gaussian(rng, 0.3)),
                  params);
    }
    ASSERT_LE((ts.P - ts.P.transpose()).cwiseAbs().maxCoeff(), 1e-9);
    const Eigen::SelfAdjointEigenSolver<Matrix6d> es(ts.P);
    ASSERT_GE(es.eigenvalues().minCoeff(), -1e-9);
  }
}

TEST(KalmanProperties, FilteredBeatsRawObservations) {
  Rng rng(62);
  KalmanParams params;
  double raw = 0, filtered = 0;
  int n = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::Vector2d p(uniform(rng, -20, 20), uniform(rng, -20, 20));
    Eigen::Vector2d v(uniform(rng, -10, 10), uniform(rng, -10, 10));
    const Eigen::Vector2d a(uniform(rng, -2, 2), uniform(rng, -2, 2));
    TrackState ts;
    for (int k = 0; k < 30; ++k) {
      const Eigen::Vector2d z = p + Eigen::Vector2d(gaussian(rng, 0.05), gaussian(rng, 0.05));
      if (k == 0) {
        ts = init_track(box_at(z.x(), z.y()), true, params);
      } else {
        ts = update(predict(ts, params), z, params);
      }
      raw += (z - p).squaredNorm();
      filtered += (ts.position() - p).squaredNorm();
      ++n;
      p += v * params.dt + 0.5 * a * params.dt * params.dt;
      v += a * params.dt;
    }
  }
  EXPECT_LT(std::sqrt(filtered / n), std::sqrt(raw / n));
}

TEST(KalmanParamsValidation, Rejects) {
  KalmanParams p;
  p.dt = 0;
  EXPECT_THROW(validate(p), Error);
  p = {};
  p.process_noise(2) = -1;
  EXPECT_THROW(validate(p), Error);
}

struct CarFrame {
  PointCloud cloud;
  IndexSet nonground;
};

CarFrame car_frame(const TopViewBox& b, std::uint64_t seed) {
  Rng rng(seed);
  CarFrame f;
  testing::add_car(f.cloud, b, 1.5, 600, rng, 0.005);
  f.nonground = f.cloud.all_indices();
  return f;
}

TEST(Propagate, StaticRigidObject) {
  TopViewBox truth = box_at(12, 4);
  truth.yaw = deg_to_rad(20);
  const CarFrame f = car_frame(truth, 63);
  const TopViewBox prior = fit_cluster_box(f.cloud, f.nonground);
  const TrackState ts = predict(init_track(prior, true, {}), {});
  const auto prop = propagate_annotation(f.cloud, f.nonground, ts, prior);
  ASSERT_TRUE(prop);
  EXPECT_EQ(prop->box.width, prior.width);
  EXPECT_EQ(prop->box.length, prior.length);
  EXPECT_LE(testing::yaw_error(prop->box.yaw, prior.yaw), deg_to_rad(0.25) + 1e-12);
  EXPECT_NEAR(prop->box.cx, prior.cx, 1e-6);
  EXPECT_NEAR(prop->box.cy, prior.cy, 1e-6);
}

TEST(Propagate, StaticNonRigidObject) {
  TopViewBox truth = box_at(6, -3);
  truth.width = 0.6;
  truth.length = 0.9;
  truth.label = ObjectClass::kPedestrian;
  const CarFrame f = car_frame(truth, 64);
  const TopViewBox prior = fit_cluster_box(f.cloud, f.nonground);
  const TrackState ts = predict(init_track(prior, false, {}), {});
  const auto prop = propagate_annotation(f.cloud, f.nonground, ts, prior);
  ASSERT_TRUE(prop);
  EXPECT_LE(testing::yaw_error(prop->box.yaw, prior.yaw), deg_to_rad(0.25) + 1e-12);
  EXPECT_NEAR(prop->box.width, prior.width, 1e-6);
  EXPECT_NEAR(prop->box.length, prior.length, 1e-6);
}

TEST(Propagate, RigidCarTranslated) {
  TopViewBox truth = box_at(10, 2);
  truth.yaw = deg_to_rad(5);
  const CarFrame f0 = car_frame(truth, 65);
  TopViewBox prior = fit_cluster_box(f0.cloud, f0.nonground);
  prior.label = ObjectClass::kCar;
  TopViewBox moved = truth;
  moved.cx += 0.5;
  const CarFrame f1 = car_frame(moved, 66);
  const TrackState ts = predict(init_track(prior, true, {}), {});
  const auto prop = propagate_annotation(f1.cloud, f1.nonground, ts, prior);
  ASSERT_TRUE(prop);
  EXPECT_EQ(prop->box.width, prior.width);
  EXPECT_EQ(prop->box.length, prior.length);
  EXPECT_LT(std::hypot(prop->box.cx - moved.cx, prop->box.cy - moved.cy), 0.1);
  EXPECT_EQ(prop->box.label, ObjectClass::kCar);
}

TEST(Propagate, ObjectRemovedIsLost) {
  const CarFrame f = car_frame(box_at(10, 2), 67);
  const TopViewBox prior = fit_cluster_box(f.cloud, f.nonground);
  TrackState ts = init_track(prior, true, {});
  ts.x(0) = 100.0;  // nothing within the prune radius
  EXPECT_FALSE(propagate_annotation(f.cloud, f.nonground, ts, prior));
  EXPECT_FALSE(propagate_annotation(f.cloud, IndexSet{}, init_track(prior, true, {}), prior));
}

}  // namespace
}  // namespace lidarlabel

#pragma once

// Scene generators with labels known by construction.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "lidarlabel/boxfit.hpp"
#include "lidarlabel/cloud.hpp"

namespace lidarlabel::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng, double sigma) {
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

// Ground z = a x + b y + c. Normal is up-facing and unit length.
struct GroundPlane {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double height(double x, double y) const { return a * x + b * y + c; }
  Eigen::Vector3d normal() const { return Eigen::Vector3d(-a, -b, 1.0).normalized(); }
};

struct ObjectSpec {
  TopViewBox box;
  double height = 1.5;
};

struct LabeledScene {
  PointCloud cloud;
  std::vector<bool> is_ground;
  std::vector<int> object;  // -1 for ground
  GroundPlane plane;
  std::vector<ObjectSpec> objects;
};

inline Eigen::Vector2d box_point(const TopViewBox& b, double along, double across) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  return {b.cx + along * c - across * s, b.cy + along * s + across * c};
}

// Uniform point on the rectangle's perimeter.
inline Eigen::Vector2d perimeter_point(const TopViewBox& b, Rng& rng) {
  const double per = 2.0 * (b.length + b.width);
  double t = uniform(rng, 0.0, per);
  const double hl = 0.5 * b.length, hw = 0.5 * b.width;
  if (t < b.length) return box_point(b, -hl + t, hw);
  t -= b.length;
  if (t < b.width) return box_point(b, hl, hw - t);
  t -= b.width;
  if (t < b.length) return box_point(b, hl - t, -hw);
  t -= b.length;
  return box_point(b, -hl, -hw + t);
}

// Object surface returns: the four vertical faces and the roof, starting
// `clearance` above the ground.
inline void add_object(LabeledScene& scene, const ObjectSpec& obj, int id, std::size_t n,
                       double clearance, double noise, Rng& rng) {
  const TopViewBox& b = obj.box;
  const double side = 2.0 * (b.length + b.width);
  const double roof = b.length * b.width;
  for (std::size_t k = 0; k < n; ++k) {
    Eigen::Vector2d xy;
    double h;
    if (uniform(rng, 0.0, side + roof) < side) {
      xy = perimeter_point(b, rng);
      h = uniform(rng, clearance, obj.height);
    } else {
      xy = box_point(b, uniform(rng, -0.5 * b.length, 0.5 * b.length),
                     uniform(rng, -0.5 * b.width, 0.5 * b.width));
      h = obj.height;
    }
    const double z = scene.plane.height(xy.x(), xy.y()) + h + gaussian(rng, noise);
    scene.cloud.points.push_back({xy.x(), xy.y(), z, 0.5});
    scene.is_ground.push_back(false);
    scene.object.push_back(id);
  }
}

// Ground disk of radius `extent` around the sensor with Gaussian noise along z,
// plus 1-10 objects with surfaces at least `clearance` above the ground.
inline LabeledScene ground_scene(Rng& rng, std::size_t n_ground, double noise,
                                 double max_tilt_deg, double clearance,
                                 std::size_t points_per_object, double extent = 40.0) {
  LabeledScene s;
  const double slope = std::tan(max_tilt_deg * kPi / 180.0);
  s.plane = {uniform(rng, -slope, slope) / std::sqrt(2.0),
             uniform(rng, -slope, slope) / std::sqrt(2.0), uniform(rng, -1.9, -1.5)};
  s.cloud.points.reserve(n_ground + 10 * points_per_object);
  for (std::size_t k = 0; k < n_ground; ++k) {
    const double r = extent * std::sqrt(uniform(rng, 0.0, 1.0));
    const double t = uniform(rng, 0.0, 2.0 * kPi);
    const double x = r * std::cos(t), y = r * std::sin(t);
    // Noise along the plane normal, as a range sensor would see it on flat road.
    const Eigen::Vector3d p =
        Eigen::Vector3d(x, y, s.plane.height(x, y)) + s.plane.normal() * gaussian(rng, noise);
    s.cloud.points.push_back({p.x(), p.y(), p.z(), 0.1});
    s.is_ground.push_back(true);
    s.object.push_back(-1);
  }
  const int n_objects = std::uniform_int_distribution<int>(1, 10)(rng);
  for (int o = 0; o < n_objects; ++o) {
    ObjectSpec obj;
    obj.box.cx = uniform(rng, -0.6 * extent, 0.6 * extent);
    obj.box.cy = uniform(rng, -0.6 * extent, 0.6 * extent);
    obj.box.length = uniform(rng, 0.6, 5.0);
    obj.box.width = uniform(rng, 0.5, std::min(obj.box.length, 2.2));
    obj.box.yaw = uniform(rng, 0.0, kPi);
    obj.height = uniform(rng, 0.8, 3.0);
    s.objects.push_back(obj);
    add_object(s, obj, o, points_per_object, clearance, noise, rng);
  }
  return s;
}

// Shuffles the cloud in place; labels follow their points.
inline void shuffle_scene(LabeledScene& s, Rng& rng) {
  std::vector<std::size_t> order(s.cloud.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  LabeledScene out = s;
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.cloud.points[i] = s.cloud.points[order[i]];
    out.is_ground[i] = s.is_ground[order[i]];
    out.object[i] = s.object[order[i]];
  }
  s = std::move(out);
}

// Rectangle dimensions matching the annotated-box statistics: area in
// [1, 29] m^2 concentrated around 6, aspect ratio l/w in [1.3, 4].
inline TopViewBox random_rectangle(Rng& rng, double max_offset = 20.0) {
  double area;
  do {
    area = std::exp(std::log(6.0) + gaussian(rng, 0.5));
  } while (area < 1.0 || area > 29.0);
  const double ratio = uniform(rng, 1.3, 4.0);
  TopViewBox b;
  b.length = std::sqrt(area * ratio);
  b.width = std::sqrt(area / ratio);
  b.yaw = uniform(rng, 0.0, kPi);
  b.cx = uniform(rng, -max_offset, max_offset);
  b.cy = uniform(rng, -max_offset, max_offset);
  b.label = ObjectClass::kCar;
  return b;
}

inline std::vector<Eigen::Vector2d> sample_perimeter(const TopViewBox& b, std::size_t n,
                                                     double sigma, Rng& rng) {
  std::vector<Eigen::Vector2d> pts;
  for (std::size_t k = 0; k < n; ++k) {
    pts.push_back(perimeter_point(b, rng) +
                  Eigen::Vector2d(gaussian(rng, sigma), gaussian(rng, sigma)));
  }
  return pts;
}

// The two faces meeting at the corner nearest `sensor`: the usual LiDAR view.
inline std::vector<Eigen::Vector2d> sample_l_shape(const TopViewBox& b, std::size_t n,
                                                   double sigma, Rng& rng,
                                                   const Eigen::Vector2d& sensor = {0, 0}) {
  const auto corners = b.corners();
  std::size_t k0 = 0;
  for (std::size_t k = 1; k < 4; ++k) {
    if ((corners[k] - sensor).norm() < (corners[k0] - sensor).norm()) k0 = k;
  }
  const Eigen::Vector2d c = corners[k0];
  const Eigen::Vector2d p = corners[(k0 + 3) % 4];
  const Eigen::Vector2d q = corners[(k0 + 1) % 4];
  const double lp = (p - c).norm(), lq = (q - c).norm();
  std::vector<Eigen::Vector2d> pts;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = uniform(rng, 0.0, lp + lq);
    const Eigen::Vector2d on = t < lp ? c + (p - c) * (t / lp) : c + (q - c) * ((t - lp) / lq);
    pts.push_back(on + Eigen::Vector2d(gaussian(rng, sigma), gaussian(rng, sigma)));
  }
  return pts;
}

inline double yaw_error(double a, double b) {
  const double d = std::fmod(std::abs(a - b), kPi);
  return std::min(d, kPi - d);
}

// Heading error for the pi/2-periodic grid search.
inline double heading_error(double a, double b) {
  const double d = std::fmod(std::abs(a - b), kPi / 2.0);
  return std::min(d, kPi / 2.0 - d);
}

// Car-like object on flat ground z = 0: side faces and roof with the given
// point count, plus a ground disk. Returns the object's point indices.
inline IndexSet add_car(PointCloud& cloud, const TopViewBox& b, double height, std::size_t n,
                        Rng& rng, double noise = 0.01) {
  LabeledScene s;
  s.cloud = std::move(cloud);
  const std::size_t before = s.cloud.size();
  s.is_ground.assign(before, false);
  s.object.assign(before, -1);
  add_object(s, {b, height}, 0, n, 0.3, noise, rng);
  cloud = std::move(s.cloud);
  IndexSet idx;
  for (std::size_t i = before; i < cloud.size(); ++i) idx.push_back(i);
  return idx;
}

inline void add_flat_ground(PointCloud& cloud, std::size_t n, double extent, Rng& rng,
                            double noise = 0.01) {
  for (std::size_t k = 0; k < n; ++k) {
    cloud.points.push_back(
        {uniform(rng, -extent, extent), uniform(rng, -extent, extent), gaussian(rng, noise), 0.1});
  }
}

}  // namespace lidarlabel::testing

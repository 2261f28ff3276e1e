#include "lidarlabel/boxfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lidarlabel/error.hpp"

namespace lidarlabel {
namespace {

constexpr double kContainSlack = 1e-9;

Eigen::Vector2d axis1(double theta) { return {std::cos(theta), std::sin(theta)}; }
Eigen::Vector2d axis2(double theta) { return {-std::sin(theta), std::cos(theta)}; }

struct Interval {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double size() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
};

Eigen::Vector2d mean_of(std::span<const Eigen::Vector2d> points) {
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  for (const auto& p : points) m += p;
  return m / static_cast<double>(points.size());
}

std::vector<Eigen::Vector2d> centered(std::span<const Eigen::Vector2d> points,
                                      const Eigen::Vector2d& origin) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p - origin);
  return out;
}

// Two-pass variance of the chosen edge distances; scratch buffers avoid
// reallocations across the heading grid.
double loss_at(std::span<const Eigen::Vector2d> pts, double theta, std::vector<double>& c1,
               std::vector<double>& c2) {
  const Eigen::Vector2d e1 = axis1(theta);
  const Eigen::Vector2d e2 = axis2(theta);
  const std::size_t n = pts.size();
  c1.resize(n);
  c2.resize(n);
  Interval i1, i2;
  for (std::size_t i = 0; i < n; ++i) {
    c1[i] = pts[i].dot(e1);
    c2[i] = pts[i].dot(e2);
    i1.add(c1[i]);
    i2.add(c2[i]);
  }
  double s1 = 0, s2 = 0;
  std::size_t n1 = 0, n2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d1 = std::min(c1[i] - i1.lo, i1.hi - c1[i]);
    const double d2 = std::min(c2[i] - i2.lo, i2.hi - c2[i]);
    if (d1 < d2) {
      c1[i] = d1;
      c2[i] = -1.0;
      s1 += d1;
      ++n1;
    } else {
      c1[i] = -1.0;
      c2[i] = d2;
      s2 += d2;
      ++n2;
    }
  }
  const double m1 = n1 ? s1 / static_cast<double>(n1) : 0.0;
  const double m2 = n2 ? s2 / static_cast<double>(n2) : 0.0;
  double v1 = 0, v2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (c1[i] >= 0.0) v1 += (c1[i] - m1) * (c1[i] - m1);
    else v2 += (c2[i] - m2) * (c2[i] - m2);
  }
  return (n1 ? v1 / static_cast<double>(n1) : 0.0) +
         (n2 ? v2 / static_cast<double>(n2) : 0.0);
}

std::size_t grid_size(double step) {
  std::size_t n = 0;
  while (static_cast<double>(n) * step < kPi / 2.0 - 1e-12) ++n;
  return n;
}

double extent_scale(std::span<const Eigen::Vector2d> pts) {
  double s = 0.0;
  for (const auto& p : pts) s = std::max(s, p.cwiseAbs().maxCoeff());
  return std::max(1.0, 2.0 * s);
}

double yaw_distance(double a, double b) {
  const double d = std::fmod(std::abs(a - b), kPi);
  return std::min(d, kPi - d);
}

void require_points(std::span<const Eigen::Vector2d> points, std::size_t minimum) {
  if (points.size() < minimum) {
    fail(ErrorCode::kDegenerateCluster,
         "rectangle fit needs at least " + std::to_string(minimum) + " points, got " +
             std::to_string(points.size()));
  }
}

}  // namespace

std::string_view to_string(ObjectClass c) {
  switch (c) {
    case ObjectClass::kCar: return "car";
    case ObjectClass::kPedestrian: return "pedestrian";
    case ObjectClass::kCyclist: return "cyclist";
    case ObjectClass::kTruck: return "truck";
    case ObjectClass::kVan: return "van";
    case ObjectClass::kOther: return "other";
  }
  return "other";
}

ObjectClass parse_object_class(std::string_view name) {
  for (ObjectClass c : kAllClasses) {
    if (to_string(c) == name) return c;
  }
  fail(ErrorCode::kParse, "unknown object class '" + std::string(name) + "'");
}

bool is_rigid(ObjectClass c) {
  return c == ObjectClass::kCar || c == ObjectClass::kVan || c == ObjectClass::kTruck;
}

std::array<Eigen::Vector2d, 4> TopViewBox::corners() const {
  const Eigen::Vector2d c(cx, cy);
  const Eigen::Vector2d u = axis1(yaw) * (0.5 * length);
  const Eigen::Vector2d v = axis2(yaw) * (0.5 * width);
  return {c + u + v, c - u + v, c - u - v, c + u - v};
}

double canonical_yaw(double yaw) {
  double y = std::fmod(yaw, kPi);
  if (y < 0.0) y += kPi;
  if (y >= kPi) y = 0.0;
  return y;
}

void validate(const TopViewBox& box) {
  if (!(box.width > 0.0 && box.length > 0.0) || !std::isfinite(box.cx) ||
      !std::isfinite(box.cy) || !std::isfinite(box.width) || !std::isfinite(box.length)) {
    fail(ErrorCode::kParameter, "box dimensions must be finite and positive");
  }
  if (!(box.yaw >= 0.0 && box.yaw < kPi)) {
    fail(ErrorCode::kParameter, "box yaw must lie in [0, pi)");
  }
  if (box.z && box.z->min > box.z->max) {
    fail(ErrorCode::kParameter, "box z extent is inverted");
  }
}

TopViewBox normalized(TopViewBox box) {
  if (box.width > box.length) {
    std::swap(box.width, box.length);
    box.yaw += kPi / 2.0;
  }
  box.yaw = canonical_yaw(box.yaw);
  return box;
}

void validate(const FitParams& params) {
  if (!(params.theta_step > 0.0 && params.theta_step <= deg_to_rad(1.0) + 1e-15)) {
    fail(ErrorCode::kParameter, "theta step must be in (0, 1 degree]");
  }
}

double variance_loss(std::span<const Eigen::Vector2d> points, double theta) {
  require_points(points, 2);
  const auto pts = centered(points, mean_of(points));
  std::vector<double> c1, c2;
  return loss_at(pts, theta, c1, c2);
}

std::vector<LossSample> loss_curve(std::span<const Eigen::Vector2d> points,
                                   double theta_step) {
  require_points(points, 2);
  if (!(theta_step > 0.0)) fail(ErrorCode::kParameter, "theta step must be positive");
  const auto pts = centered(points, mean_of(points));
  std::vector<double> c1, c2;
  std::vector<LossSample> out;
  const std::size_t n = grid_size(theta_step);
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double theta = static_cast<double>(k) * theta_step;
    out.push_back({theta, loss_at(pts, theta, c1, c2)});
  }
  return out;
}

SearchRectangleFitter::SearchRectangleFitter(FitParams params) : params_(params) {
  validate(params_);
}

double SearchRectangleFitter::best_heading(std::span<const Eigen::Vector2d> points) const {
  require_points(points, std::max<std::size_t>(params_.min_cluster_size, 2));
  const auto pts = centered(points, mean_of(points));
  const double scale = extent_scale(pts);
  const double loss_tol = 1e-12 * scale * scale;
  const double area_tol = 1e-12 * scale * scale;

  std::vector<double> c1, c2;
  const std::size_t n = grid_size(params_.theta_step);
  std::vector<double> losses(n);
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    losses[k] = loss_at(pts, static_cast<double>(k) * params_.theta_step, c1, c2);
    best_loss = std::min(best_loss, losses[k]);
  }

  double best_theta = 0.0;
  double best_area = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    if (losses[k] > best_loss + loss_tol) continue;
    const double theta = static_cast<double>(k) * params_.theta_step;
    Interval i1, i2;
    const Eigen::Vector2d e1 = axis1(theta), e2 = axis2(theta);
    for (const auto& p : pts) {
      i1.add(p.dot(e1));
      i2.add(p.dot(e2));
    }
    const double area = i1.size() * i2.size();
    if (area < best_area - area_tol) {
      best_area = area;
      best_theta = theta;
    }
  }
  return best_theta;
}

TopViewBox SearchRectangleFitter::fit(std::span<const Eigen::Vector2d> points) const {
  const double theta = best_heading(points);
  const Eigen::Vector2d origin = mean_of(points);
  const Eigen::Vector2d e1 = axis1(theta), e2 = axis2(theta);
  Interval i1, i2;
  for (const auto& p : points) {
    const Eigen::Vector2d q = p - origin;
    i1.add(q.dot(e1));
    i2.add(q.dot(e2));
  }
  const Eigen::Vector2d center = origin + e1 * i1.mid() + e2 * i2.mid();
  TopViewBox box;
  box.cx = center.x();
  box.cy = center.y();
  box.length = i1.size();
  box.width = i2.size();
  box.yaw = theta;
  box = normalized(box);
  if (!(box.width > 0.0)) {
    fail(ErrorCode::kDegenerateCluster, "cluster has zero extent along one axis");
  }
  return box;
}

TopViewBox fit_rectangle(std::span<const Eigen::Vector2d> points, const FitParams& params) {
  return SearchRectangleFitter(params).fit(points);
}

TopViewBox fit_rectangle_frozen(std::span<const Eigen::Vector2d> points,
                                const FitParams& params, double width, double length,
                                double prior_yaw, const Eigen::Vector2d& sensor_xy) {
  if (!(width > 0.0 && length > 0.0)) {
    fail(ErrorCode::kParameter, "frozen dimensions must be positive");
  }
  const double theta = SearchRectangleFitter(params).best_heading(points);
  // Length along axis 1 (yaw = theta) or axis 2 (yaw = theta + pi/2).
  const double yaw_a = canonical_yaw(theta);
  const double yaw_b = canonical_yaw(theta + kPi / 2.0);
  const bool use_a = yaw_distance(yaw_a, prior_yaw) <= yaw_distance(yaw_b, prior_yaw);
  const double yaw = use_a ? yaw_a : yaw_b;

  const Eigen::Vector2d along = axis1(yaw);
  const Eigen::Vector2d across = axis2(yaw);
  const Eigen::Vector2d origin = mean_of(points);
  Interval il, iw;
  for (const auto& p : points) {
    const Eigen::Vector2d q = p - origin;
    il.add(q.dot(along));
    iw.add(q.dot(across));
  }
  auto anchor = [](const Interval& iv, double size, double sensor) {
    if (iv.size() >= size) return iv.mid();
    if (sensor <= iv.lo) return iv.lo + 0.5 * size;
    if (sensor >= iv.hi) return iv.hi - 0.5 * size;
    return iv.mid();
  };
  const Eigen::Vector2d s = sensor_xy - origin;
  const Eigen::Vector2d center = origin + along * anchor(il, length, s.dot(along)) +
                                 across * anchor(iw, width, s.dot(across));
  TopViewBox box;
  box.cx = center.x();
  box.cy = center.y();
  box.width = width;
  box.length = length;
  box.yaw = yaw;
  return box;
}

std::vector<Eigen::Vector2d> top_view(const PointCloud& cloud,
                                      std::span<const std::size_t> indices) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.emplace_back(cloud[i].x, cloud[i].y);
  return out;
}

TopViewBox fit_cluster_box(const PointCloud& cloud, std::span<const std::size_t> indices,
                           const FitParams& params) {
  const auto pts = top_view(cloud, indices);
  TopViewBox box = fit_rectangle(pts, params);
  ZExtent z{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (std::size_t i : indices) {
    z.min = std::min(z.min, cloud[i].z);
    z.max = std::max(z.max, cloud[i].z);
  }
  box.z = z;
  return box;
}

bool contains(const TopViewBox& box, const Point3& p) {
  const double dx = p.x - box.cx;
  const double dy = p.y - box.cy;
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double along = dx * c + dy * s;
  const double across = -dx * s + dy * c;
  if (std::abs(along) > 0.5 * box.length + kContainSlack) return false;
  if (std::abs(across) > 0.5 * box.width + kContainSlack) return false;
  if (box.z && (p.z < box.z->min - kContainSlack || p.z > box.z->max + kContainSlack)) {
    return false;
  }
  return true;
}

IndexSet points_in_box(const PointCloud& cloud, const TopViewBox& box) {
  IndexSet out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (contains(box, cloud[i])) out.push_back(i);
  }
  return out;
}

}  // namespace lidarlabel

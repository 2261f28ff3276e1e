#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "lidarlabel/cloud.hpp"

namespace lidarlabel {

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

enum class ObjectClass { kCar, kPedestrian, kCyclist, kTruck, kVan, kOther };

inline constexpr std::array<ObjectClass, 6> kAllClasses = {
    ObjectClass::kCar,   ObjectClass::kPedestrian, ObjectClass::kCyclist,
    ObjectClass::kTruck, ObjectClass::kVan,        ObjectClass::kOther};

std::string_view to_string(ObjectClass c);
// Throws kParse on unknown names.
ObjectClass parse_object_class(std::string_view name);
// Box dimensions stay frozen across tracked frames for rigid classes.
bool is_rigid(ObjectClass c);

struct ZExtent {
  double min = 0.0;
  double max = 0.0;
  bool operator==(const ZExtent&) const = default;
};

// Oriented top-view rectangle. length >= width > 0, yaw in [0, pi) along the
// length axis.
struct TopViewBox {
  double cx = 0.0;
  double cy = 0.0;
  double width = 0.0;
  double length = 0.0;
  double yaw = 0.0;
  ObjectClass label = ObjectClass::kOther;
  std::optional<ZExtent> z;

  bool operator==(const TopViewBox&) const = default;

  double area() const { return width * length; }
  // Counter-clockwise corners starting at (+l/2, +w/2) in box frame.
  std::array<Eigen::Vector2d, 4> corners() const;
};

// Maps any angle into [0, pi).
double canonical_yaw(double yaw);

// Throws kParameter if dimensions are non-positive or yaw is not canonical.
void validate(const TopViewBox& box);

// Re-sorts (width, length) so length >= width and canonicalizes yaw.
TopViewBox normalized(TopViewBox box);

struct FitParams {
  double theta_step = deg_to_rad(0.25);
  std::size_t min_cluster_size = 5;

  bool operator==(const FitParams&) const = default;
};

void validate(const FitParams& params);

// Sum of edge-distance variances for heading theta. Each point is assigned to
// the axis whose nearer bounding edge it is closer to (d1 < d2 picks axis 1);
// an empty group contributes 0. Throws kDegenerateCluster for fewer than 2
// points.
double variance_loss(std::span<const Eigen::Vector2d> points, double theta);

struct LossSample {
  double theta = 0.0;
  double loss = 0.0;
};

// Loss over the search grid {0, step, 2 step, ...} ∩ [0, pi/2).
std::vector<LossSample> loss_curve(std::span<const Eigen::Vector2d> points,
                                   double theta_step);

class RectangleFitter {
 public:
  virtual ~RectangleFitter() = default;
  virtual TopViewBox fit(std::span<const Eigen::Vector2d> points) const = 0;
};

// Grid search over heading minimizing variance_loss. Loss ties (relative
// 1e-12) resolve to the smaller rectangle, then the smaller heading. Edges are
// the min/max projections, so every input point lies inside the result.
class SearchRectangleFitter : public RectangleFitter {
 public:
  explicit SearchRectangleFitter(FitParams params = {});
  TopViewBox fit(std::span<const Eigen::Vector2d> points) const override;

  // Heading only, in [0, pi/2).
  double best_heading(std::span<const Eigen::Vector2d> points) const;

 private:
  FitParams params_;
};

TopViewBox fit_rectangle(std::span<const Eigen::Vector2d> points,
                         const FitParams& params = {});

// Heading search with (width, length) held fixed. The length axis is chosen to
// stay closest to `prior_yaw`. Along each axis the center is the extent
// midpoint when the points span the frozen size, otherwise the box is anchored
// to the observed edge facing `sensor_xy`.
TopViewBox fit_rectangle_frozen(std::span<const Eigen::Vector2d> points,
                                const FitParams& params, double width, double length,
                                double prior_yaw,
                                const Eigen::Vector2d& sensor_xy = Eigen::Vector2d::Zero());

std::vector<Eigen::Vector2d> top_view(const PointCloud& cloud,
                                      std::span<const std::size_t> indices);

// fit_rectangle on the (x, y) of the selected points; z extent from their
// min/max z.
TopViewBox fit_cluster_box(const PointCloud& cloud, std::span<const std::size_t> indices,
                           const FitParams& params = {});

// Inclusive containment (1e-9 m slack); z checked only when box.z is set.
bool contains(const TopViewBox& box, const Point3& p);
IndexSet points_in_box(const PointCloud& cloud, const TopViewBox& box);

}  // namespace lidarlabel

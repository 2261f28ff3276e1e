#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "lidarlabel/boxfit.hpp"
#include "lidarlabel/cloud.hpp"

namespace lidarlabel {

// Homogeneous point->pixel projection: [u w, v w, w]^T = M [x y z 1]^T.
struct CalibrationModel {
  Eigen::Matrix<double, 3, 4> projection = Eigen::Matrix<double, 3, 4>::Zero();
  int image_width = 0;
  int image_height = 0;
};

// Throws kCalibration if the matrix is non-finite, the image size is not
// positive, or no probe point ahead of the sensor lands in the image.
void validate(const CalibrationModel& calib);

// KITTI calib text: P2 * R0_rect * Tr_velo_to_cam (R0_rect/Tr padded to 4x4).
CalibrationModel parse_kitti_calibration(std::string_view text, int image_width,
                                         int image_height);
CalibrationModel load_kitti_calibration(const std::filesystem::path& path, int image_width,
                                        int image_height);
// 12 row-major numbers, optionally followed by image width and height.
CalibrationModel parse_flat_calibration(std::string_view text, int image_width,
                                        int image_height);
// Dispatches on content: a "P2:" key selects the KITTI parser.
CalibrationModel load_calibration(const std::filesystem::path& path, int image_width,
                                  int image_height);

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

// nullopt when the point is behind the camera (depth <= 0).
std::optional<Projection> project_point(const CalibrationModel& calib, const Point3& p);

struct Pixel {
  int u = 0;
  int v = 0;
};

// Nearest pixel of a projection when it has positive depth and lies inside the
// image.
std::optional<Pixel> pixel_of(const CalibrationModel& calib, const Point3& p);

// Per-pixel instance ids, row-major, 0 = background.
struct SegMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> ids;
  std::map<std::uint16_t, ObjectClass> classes;

  std::uint16_t at(int u, int v) const {
    return ids[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(u)];
  }
  bool operator==(const SegMask&) const = default;
};

// Throws kFormat if an instance id present in the image has no class.
void validate(const SegMask& mask);

// 16-bit grayscale PNG of instance ids plus a JSON class map {"<id>": "<class>"}.
SegMask load_mask(const std::filesystem::path& png, const std::filesystem::path& class_map);
void write_mask(const SegMask& mask, const std::filesystem::path& png,
                const std::filesystem::path& class_map);
// Class map sidecar next to a mask: "<stem>.classes.json".
std::filesystem::path class_map_path(const std::filesystem::path& png);

// Run-length blocks: per instance, (start, length) pairs over row-major pixels.
struct RleInstance {
  std::uint16_t id = 0;
  ObjectClass label = ObjectClass::kOther;
  std::vector<std::uint32_t> runs;
  bool operator==(const RleInstance&) const = default;
};

struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<RleInstance> instances;
  bool operator==(const RleMask&) const = default;
};

RleMask encode_rle(const SegMask& mask);
SegMask decode_rle(const RleMask& rle);

enum class PreLabelSource { kMaskTransfer };

struct PreLabel {
  std::size_t index = 0;
  ObjectClass label = ObjectClass::kOther;
  std::uint16_t instance = 0;
  PreLabelSource source = PreLabelSource::kMaskTransfer;
  bool operator==(const PreLabel&) const = default;
};

// One pre-label per point whose projection hits a non-background pixel.
// Sorted by point index. Throws kCalibration on size mismatch.
std::vector<PreLabel> transfer_labels(const CalibrationModel& calib, const PointCloud& cloud,
                                      const SegMask& mask);

struct PixelRect {
  int u_min = 0;
  int v_min = 0;
  int u_max = 0;
  int v_max = 0;
  bool operator==(const PixelRect&) const = default;
};

// Pixel bounds of the visible projections of `indices`, grown by margin and
// clamped to the image. Throws kNotVisible when nothing projects in view.
PixelRect crop_for_cluster(const CalibrationModel& calib, const PointCloud& cloud,
                           std::span<const std::size_t> indices, int margin);

// The pre-labeled point of `instance` closest to that instance's centroid
// (lowest index on ties). Throws kLookup for unknown instances.
std::size_t seed_from_prelabel(const PointCloud& cloud, std::span<const PreLabel> prelabels,
                               std::uint16_t instance);

}  // namespace lidarlabel

#include "lidarlabel/fusion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_map>

#include "lidarlabel/error.hpp"

namespace lidarlabel {
namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

std::vector<double> parse_numbers(std::string_view text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && std::string_view(" \t\r\n,").find(text[pos]) !=
                                    std::string_view::npos) {
      ++pos;
    }
    if (pos >= text.size()) break;
    double v = 0.0;
    const char* begin = text.data() + pos;
    if (*begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, text.data() + text.size(), v);
    if (ec != std::errc()) {
      fail(ErrorCode::kCalibration, "malformed number in calibration data");
    }
    out.push_back(v);
    pos = static_cast<std::size_t>(ptr - text.data());
  }
  return out;
}

std::unordered_map<std::string, std::vector<double>> parse_keyed(std::string_view text) {
  std::unordered_map<std::string, std::vector<double>> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    std::string key(line.substr(0, colon));
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t\r") + 1);
    out[key] = parse_numbers(line.substr(colon + 1));
  }
  return out;
}

Eigen::Matrix4d padded(const std::vector<double>& v, int rows, int cols) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

const std::vector<double>& require_key(
    const std::unordered_map<std::string, std::vector<double>>& keyed,
    std::initializer_list<const char*> names, std::size_t count) {
  for (const char* name : names) {
    const auto it = keyed.find(name);
    if (it != keyed.end()) {
      if (it->second.size() != count) {
        fail(ErrorCode::kCalibration, std::string(name) + " must have " +
                                          std::to_string(count) + " values");
      }
      return it->second;
    }
  }
  fail(ErrorCode::kCalibration, std::string("calibration is missing ") + *names.begin());
}

}  // namespace

void validate(const CalibrationModel& calib) {
  if (!calib.projection.allFinite()) {
    fail(ErrorCode::kCalibration, "projection matrix has non-finite entries");
  }
  if (calib.image_width <= 0 || calib.image_height <= 0) {
    fail(ErrorCode::kCalibration, "image size must be positive");
  }
  for (double x : {5.0, 10.0, 20.0, 40.0}) {
    for (double y : {-4.0, -1.0, 0.0, 1.0, 4.0}) {
      for (double z : {-1.5, 0.0, 1.0}) {
        if (pixel_of(calib, {x, y, z})) return;
      }
    }
  }
  fail(ErrorCode::kCalibration, "no probe point ahead of the sensor projects into the image");
}

CalibrationModel parse_kitti_calibration(std::string_view text, int image_width,
                                         int image_height) {
  const auto keyed = parse_keyed(text);
  const auto& p2 = require_key(keyed, {"P2"}, 12);
  const auto& r0 = require_key(keyed, {"R0_rect", "R_rect"}, 9);
  const auto& tr = require_key(keyed, {"Tr_velo_to_cam", "Tr_velo_cam"}, 12);

  Eigen::Matrix<double, 3, 4> p;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) p(r, c) = p2[static_cast<std::size_t>(r * 4 + c)];
  }
  CalibrationModel calib;
  calib.projection = p * padded(r0, 3, 3) * padded(tr, 3, 4);
  calib.image_width = image_width;
  calib.image_height = image_height;
  validate(calib);
  return calib;
}

CalibrationModel load_kitti_calibration(const std::filesystem::path& path, int image_width,
                                        int image_height) {
  return parse_kitti_calibration(read_text(path), image_width, image_height);
}

CalibrationModel parse_flat_calibration(std::string_view text, int image_width,
                                        int image_height) {
  const auto values = parse_numbers(text);
  if (values.size() != 12 && values.size() != 14) {
    fail(ErrorCode::kCalibration, "flat calibration needs 12 values (+ optional size)");
  }
  CalibrationModel calib;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      calib.projection(r, c) = values[static_cast<std::size_t>(r * 4 + c)];
    }
  }
  calib.image_width = values.size() == 14 ? static_cast<int>(values[12]) : image_width;
  calib.image_height = values.size() == 14 ? static_cast<int>(values[13]) : image_height;
  validate(calib);
  return calib;
}

CalibrationModel load_calibration(const std::filesystem::path& path, int image_width,
                                  int image_height) {
  const std::string text = read_text(path);
  if (text.find("P2:") != std::string::npos) {
    return parse_kitti_calibration(text, image_width, image_height);
  }
  return parse_flat_calibration(text, image_width, image_height);
}

std::optional<Projection> project_point(const CalibrationModel& calib, const Point3& p) {
  const Eigen::Vector3d h = calib.projection * Eigen::Vector4d(p.x, p.y, p.z, 1.0);
  if (!(h.z() > 0.0)) return std::nullopt;
  return Projection{h.x() / h.z(), h.y() / h.z(), h.z()};
}

std::optional<Pixel> pixel_of(const CalibrationModel& calib, const Point3& p) {
  const auto proj = project_point(calib, p);
  if (!proj) return std::nullopt;
  const double u = std::round(proj->u);
  const double v = std::round(proj->v);
  if (!(u >= 0.0 && v >= 0.0 && u < calib.image_width && v < calib.image_height)) {
    return std::nullopt;
  }
  return Pixel{static_cast<int>(u), static_cast<int>(v)};
}

void validate(const SegMask& mask) {
  if (mask.width <= 0 || mask.height <= 0 ||
      mask.ids.size() != static_cast<std::size_t>(mask.width) *
                             static_cast<std::size_t>(mask.height)) {
    fail(ErrorCode::kFormat, "mask pixel buffer does not match its dimensions");
  }
  for (std::uint16_t id : mask.ids) {
    if (id != 0 && !mask.classes.contains(id)) {
      fail(ErrorCode::kFormat, "mask instance " + std::to_string(id) + " has no class");
    }
  }
}

RleMask encode_rle(const SegMask& mask) {
  RleMask rle;
  rle.width = mask.width;
  rle.height = mask.height;
  std::map<std::uint16_t, RleInstance> by_id;
  const std::size_t n = mask.ids.size();
  std::size_t i = 0;
  while (i < n) {
    const std::uint16_t id = mask.ids[i];
    std::size_t j = i;
    while (j < n && mask.ids[j] == id) ++j;
    if (id != 0) {
      RleInstance& inst = by_id[id];
      inst.id = id;
      const auto cls = mask.classes.find(id);
      inst.label = cls == mask.classes.end() ? ObjectClass::kOther : cls->second;
      inst.runs.push_back(static_cast<std::uint32_t>(i));
      inst.runs.push_back(static_cast<std::uint32_t>(j - i));
    }
    i = j;
  }
  for (const auto& [id, cls] : mask.classes) {
    if (!by_id.contains(id)) by_id[id] = RleInstance{id, cls, {}};
  }
  for (auto& [id, inst] : by_id) rle.instances.push_back(std::move(inst));
  return rle;
}

SegMask decode_rle(const RleMask& rle) {
  SegMask mask;
  mask.width = rle.width;
  mask.height = rle.height;
  const std::size_t n = static_cast<std::size_t>(std::max(0, rle.width)) *
                        static_cast<std::size_t>(std::max(0, rle.height));
  mask.ids.assign(n, 0);
  for (const RleInstance& inst : rle.instances) {
    if (inst.id == 0) fail(ErrorCode::kFormat, "RLE instance id 0 is reserved");
    if (inst.runs.size() % 2 != 0) fail(ErrorCode::kFormat, "RLE runs must be pairs");
    mask.classes[inst.id] = inst.label;
    for (std::size_t k = 0; k < inst.runs.size(); k += 2) {
      const std::size_t start = inst.runs[k];
      const std::size_t len = inst.runs[k + 1];
      if (start + len > n) fail(ErrorCode::kFormat, "RLE run exceeds mask bounds");
      std::fill_n(mask.ids.begin() + static_cast<std::ptrdiff_t>(start), len, inst.id);
    }
  }
  return mask;
}

std::vector<PreLabel> transfer_labels(const CalibrationModel& calib, const PointCloud& cloud,
                                      const SegMask& mask) {
  if (mask.width != calib.image_width || mask.height != calib.image_height) {
    fail(ErrorCode::kCalibration, "mask size " + std::to_string(mask.width) + "x" +
                                      std::to_string(mask.height) +
                                      " does not match calibrated image size");
  }
  std::vector<PreLabel> out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto px = pixel_of(calib, cloud[i]);
    if (!px) continue;
    const std::uint16_t id = mask.at(px->u, px->v);
    if (id == 0) continue;
    const auto cls = mask.classes.find(id);
    out.push_back({i, cls == mask.classes.end() ? ObjectClass::kOther : cls->second, id,
                   PreLabelSource::kMaskTransfer});
  }
  return out;
}

PixelRect crop_for_cluster(const CalibrationModel& calib, const PointCloud& cloud,
                           std::span<const std::size_t> indices, int margin) {
  bool any = false;
  PixelRect r{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(),
              std::numeric_limits<int>::min(), std::numeric_limits<int>::min()};
  for (std::size_t i : indices) {
    const auto px = pixel_of(calib, cloud[i]);
    if (!px) continue;
    any = true;
    r.u_min = std::min(r.u_min, px->u);
    r.v_min = std::min(r.v_min, px->v);
    r.u_max = std::max(r.u_max, px->u);
    r.v_max = std::max(r.v_max, px->v);
  }
  if (!any) fail(ErrorCode::kNotVisible, "no cluster point is visible in the camera image");
  r.u_min = std::max(0, r.u_min - margin);
  r.v_min = std::max(0, r.v_min - margin);
  r.u_max = std::min(calib.image_width - 1, r.u_max + margin);
  r.v_max = std::min(calib.image_height - 1, r.v_max + margin);
  return r;
}

std::size_t seed_from_prelabel(const PointCloud& cloud, std::span<const PreLabel> prelabels,
                               std::uint16_t instance) {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  std::size_t count = 0;
  for (const PreLabel& pl : prelabels) {
    if (pl.instance != instance) continue;
    sum += to_vector(cloud[pl.index]);
    ++count;
  }
  if (count == 0) {
    fail(ErrorCode::kLookup, "no pre-labeled points for instance " + std::to_string(instance));
  }
  const Eigen::Vector3d centroid = sum / static_cast<double>(count);
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (const PreLabel& pl : prelabels) {
    if (pl.instance != instance) continue;
    const double d2 = (to_vector(cloud[pl.index]) - centroid).squaredNorm();
    if (d2 < best_d2 || (d2 == best_d2 && pl.index < best)) {
      best = pl.index;
      best_d2 = d2;
    }
  }
  return best;
}

}  // namespace lidarlabel

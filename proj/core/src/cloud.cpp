#include "lidarlabel/cloud.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "lidarlabel/error.hpp"

namespace lidarlabel {
namespace {

constexpr std::size_t kKittiRecordBytes = 16;

float read_le_float(const char* bytes) {
  std::uint32_t raw;
  std::memcpy(&raw, bytes, sizeof(raw));
  if constexpr (std::endian::native == std::endian::big) {
    raw = __builtin_bswap32(raw);
  }
  return std::bit_cast<float>(raw);
}

void write_le_float(char* bytes, float value) {
  auto raw = std::bit_cast<std::uint32_t>(value);
  if constexpr (std::endian::native == std::endian::big) {
    raw = __builtin_bswap32(raw);
  }
  std::memcpy(bytes, &raw, sizeof(raw));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) fail(ErrorCode::kIo, "read failed: " + path.string());
  return std::move(buf).str();
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(std::string_view field, std::size_t line_no) {
  double value = 0.0;
  // from_chars rejects a leading '+', which some writers emit.
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    // from_chars does not accept "nan"/"inf" spellings everywhere; treat them
    // as non-finite rather than malformed.
    std::string lower(field);
    std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
    if (lower == "nan" || lower == "-nan") return std::numeric_limits<double>::quiet_NaN();
    if (lower == "inf") return std::numeric_limits<double>::infinity();
    if (lower == "-inf") return -std::numeric_limits<double>::infinity();
    fail(ErrorCode::kFormat, "line " + std::to_string(line_no) +
                                 ": not a number '" + std::string(field) + "'");
  }
  return value;
}

void append_shortest(std::string& out, double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

}  // namespace

IndexSet PointCloud::all_indices() const {
  IndexSet out(points.size());
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

PointCloud load_kitti_bin(const std::filesystem::path& path, IngestStats* stats) {
  const std::string bytes = read_file(path);
  if (bytes.empty()) fail(ErrorCode::kEmptyCloud, "empty file: " + path.string());
  if (bytes.size() % kKittiRecordBytes != 0) {
    fail(ErrorCode::kFormat, path.string() + ": size " +
                                 std::to_string(bytes.size()) +
                                 " is not a multiple of 16 bytes");
  }
  PointCloud cloud;
  cloud.frame_id = path.stem().string();
  const std::size_t records = bytes.size() / kKittiRecordBytes;
  cloud.points.reserve(records);
  std::size_t dropped = 0;
  for (std::size_t r = 0; r < records; ++r) {
    const char* rec = bytes.data() + r * kKittiRecordBytes;
    Point3 p{read_le_float(rec), read_le_float(rec + 4), read_le_float(rec + 8),
             read_le_float(rec + 12)};
    if (!is_finite(p)) {
      ++dropped;
      continue;
    }
    cloud.points.push_back(p);
  }
  if (stats) *stats = {records, dropped};
  if (cloud.empty()) fail(ErrorCode::kEmptyCloud, "no finite points in " + path.string());
  return cloud;
}

void write_kitti_bin(const std::filesystem::path& path, const PointCloud& cloud) {
  std::string bytes(cloud.size() * kKittiRecordBytes, '\0');
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    char* rec = bytes.data() + i * kKittiRecordBytes;
    const Point3& p = cloud[i];
    write_le_float(rec, static_cast<float>(p.x));
    write_le_float(rec + 4, static_cast<float>(p.y));
    write_le_float(rec + 8, static_cast<float>(p.z));
    write_le_float(rec + 12, static_cast<float>(p.intensity));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed: " + path.string());
}

PointCloud parse_csv(std::string_view text, IngestStats* stats) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::optional<std::string_view> {
    while (pos < text.size()) {
      const auto nl = text.find('\n', pos);
      const auto line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
      pos = nl == std::string_view::npos ? text.size() : nl + 1;
      ++line_no;
      if (!trim(line).empty()) return line;
    }
    return std::nullopt;
  };

  const auto header = next_line();
  if (!header) fail(ErrorCode::kEmptyCloud, "csv has no header");
  const auto names = split_fields(*header);
  std::optional<std::size_t> cx, cy, cz, ci;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == "x") cx = i;
    else if (names[i] == "y") cy = i;
    else if (names[i] == "z") cz = i;
    else if (names[i] == "intensity") ci = i;
  }
  if (!cx || !cy || !cz) {
    fail(ErrorCode::kFormat, "csv header must contain x, y and z columns");
  }

  PointCloud cloud;
  std::size_t records = 0;
  std::size_t dropped = 0;
  while (const auto line = next_line()) {
    const auto fields = split_fields(*line);
    if (fields.size() != names.size()) {
      fail(ErrorCode::kFormat, "line " + std::to_string(line_no) + ": expected " +
                                   std::to_string(names.size()) + " fields");
    }
    ++records;
    Point3 p{parse_number(fields[*cx], line_no), parse_number(fields[*cy], line_no),
             parse_number(fields[*cz], line_no),
             ci ? parse_number(fields[*ci], line_no) : 0.0};
    if (!is_finite(p)) {
      ++dropped;
      continue;
    }
    cloud.points.push_back(p);
  }
  if (stats) *stats = {records, dropped};
  if (cloud.empty()) fail(ErrorCode::kEmptyCloud, "csv has no finite points");
  return cloud;
}

PointCloud load_csv(const std::filesystem::path& path, IngestStats* stats) {
  PointCloud cloud = parse_csv(read_file(path), stats);
  cloud.frame_id = path.stem().string();
  return cloud;
}

void write_csv(const std::filesystem::path& path, const PointCloud& cloud) {
  std::string text = "x,y,z,intensity\n";
  text.reserve(cloud.size() * 64);
  for (const Point3& p : cloud.points) {
    append_shortest(text, p.x);
    text += ',';
    append_shortest(text, p.y);
    text += ',';
    append_shortest(text, p.z);
    text += ',';
    append_shortest(text, p.intensity);
    text += '\n';
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIo, "write failed: " + path.string());
}

VoxelIndex::VoxelIndex(const PointCloud& cloud, double cell_size)
    : cloud_(&cloud), cell_size_(cell_size) {
  if (!(cell_size > 0.0)) fail(ErrorCode::kParameter, "cell_size must be positive");
  const IndexSet all = cloud.all_indices();
  build(all);
}

VoxelIndex::VoxelIndex(const PointCloud& cloud, std::span<const std::size_t> subset,
                       double cell_size)
    : cloud_(&cloud), cell_size_(cell_size) {
  if (!(cell_size > 0.0)) fail(ErrorCode::kParameter, "cell_size must be positive");
  build(subset);
}

void VoxelIndex::build(std::span<const std::size_t> subset) {
  std::vector<std::pair<CellKey, std::size_t>> keyed;
  keyed.reserve(subset.size());
  for (std::size_t idx : subset) {
    keyed.emplace_back(cell_of((*cloud_)[idx], cell_size_), idx);
  }
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.first.x != b.first.x) return a.first.x < b.first.x;
    if (a.first.y != b.first.y) return a.first.y < b.first.y;
    if (a.first.z != b.first.z) return a.first.z < b.first.z;
    return a.second < b.second;
  });
  order_.resize(keyed.size());
  cells_.reserve(keyed.size() / 2 + 1);
  std::size_t begin = 0;
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    order_[i] = keyed[i].second;
    if (i + 1 == keyed.size() || !(keyed[i + 1].first == keyed[i].first)) {
      cells_.emplace(keyed[i].first, std::make_pair(begin, i + 1));
      begin = i + 1;
    }
  }
}

std::span<const std::size_t> VoxelIndex::cell(const CellKey& key) const {
  const auto it = cells_.find(key);
  if (it == cells_.end()) return {};
  return std::span<const std::size_t>(order_).subspan(
      it->second.first, it->second.second - it->second.first);
}

IndexSet VoxelIndex::neighbors_within(const Point3& p, double radius) const {
  IndexSet out;
  if (radius < 0.0) return out;
  for_each_within(p, radius, [&](std::size_t idx) { out.push_back(idx); });
  std::sort(out.begin(), out.end());
  return out;
}

VoxelIndex build_index(const PointCloud& cloud, double cell_size) {
  return VoxelIndex(cloud, cell_size);
}

IndexSet prune_around(const PointCloud& cloud, const Point3& center, double radius) {
  const IndexSet all = cloud.all_indices();
  return prune_around(cloud, all, center, radius);
}

IndexSet prune_around(const PointCloud& cloud, std::span<const std::size_t> candidates,
                      const Point3& center, double radius) {
  if (!(radius > 0.0)) fail(ErrorCode::kParameter, "prune radius must be positive");
  const double r2 = radius * radius;
  IndexSet out;
  for (std::size_t idx : candidates) {
    const double dx = cloud[idx].x - center.x;
    const double dy = cloud[idx].y - center.y;
    if (dx * dx + dy * dy <= r2) out.push_back(idx);
  }
  std::sort(out.begin(), out.end());
  return out;
}

IndexSet voxel_downsample(const PointCloud& cloud, std::span<const std::size_t> indices,
                          double cell_size) {
  if (!(cell_size > 0.0)) fail(ErrorCode::kParameter, "cell_size must be positive");
  struct Acc {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    std::vector<std::size_t> members;
  };
  std::unordered_map<CellKey, Acc, CellKeyHash> cells;
  for (std::size_t idx : indices) {
    Acc& acc = cells[cell_of(cloud[idx], cell_size)];
    acc.sum += to_vector(cloud[idx]);
    acc.members.push_back(idx);
  }
  IndexSet out;
  out.reserve(cells.size());
  for (const auto& [key, acc] : cells) {
    const Eigen::Vector3d centroid = acc.sum / static_cast<double>(acc.members.size());
    std::size_t best = acc.members.front();
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t idx : acc.members) {
      const double d2 = (to_vector(cloud[idx]) - centroid).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
        best = idx;
        best_d2 = d2;
      }
    }
    out.push_back(best);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace lidarlabel

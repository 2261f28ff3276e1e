#include "lidarlabel/sequence.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "lidarlabel/error.hpp"

namespace lidarlabel {
namespace fs = std::filesystem;
namespace {

std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<fs::path> sibling(const fs::path& dir, const fs::path& stem,
                                const std::string& ext) {
  fs::path candidate = dir / (stem.string() + ext);
  if (fs::exists(candidate)) return candidate;
  return std::nullopt;
}

std::optional<fs::path> optional_path(const nlohmann::json& j, const char* key,
                                      const fs::path& root) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return root / j[key].get<std::string>();
}

}  // namespace

void validate(const FrameSequence& seq) {
  if (!(seq.dt > 0.0)) fail(ErrorCode::kParameter, "sequence dt must be positive");
  if (seq.frames.empty()) fail(ErrorCode::kParameter, "sequence has no frames");
}

FrameSequence load_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::kIo, "not a directory: " + dir.string());
  FrameSequence seq;
  seq.id = dir.filename().string();
  if (seq.id.empty()) seq.id = dir.parent_path().filename().string();

  const fs::path manifest = dir / "sequence.json";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
      seq.id = j.value("id", seq.id);
      seq.dt = j.value("dt", seq.dt);
      seq.image_width = j.value("image_width", seq.image_width);
      seq.image_height = j.value("image_height", seq.image_height);
      const auto shared_calib = optional_path(j, "calibration", dir);
      for (const auto& f : j.at("frames")) {
        FrameDescriptor d;
        d.cloud = dir / f.at("cloud").get<std::string>();
        d.image = optional_path(f, "image", dir);
        d.mask = optional_path(f, "mask", dir);
        d.calibration = optional_path(f, "calibration", dir);
        if (!d.calibration) d.calibration = shared_calib;
        seq.frames.push_back(std::move(d));
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, manifest.string() + ": " + e.what());
    }
    validate(seq);
    return seq;
  }

  auto clouds = list_files(dir / "velodyne", ".bin");
  if (clouds.empty()) clouds = list_files(dir / "clouds", ".csv");
  const std::optional<fs::path> shared_calib =
      fs::exists(dir / "calib.txt") ? std::optional<fs::path>(dir / "calib.txt")
                                    : std::nullopt;
  for (const auto& cloud : clouds) {
    const fs::path stem = cloud.stem();
    FrameDescriptor d;
    d.cloud = cloud;
    d.image = sibling(dir / "image_2", stem, ".png");
    d.mask = sibling(dir / "masks", stem, ".png");
    d.calibration = sibling(dir / "calib", stem, ".txt");
    if (!d.calibration) d.calibration = shared_calib;
    seq.frames.push_back(std::move(d));
  }
  validate(seq);
  return seq;
}

}  // namespace lidarlabel

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lidarlabel {

struct FrameDescriptor {
  std::filesystem::path cloud;
  std::optional<std::filesystem::path> image;
  std::optional<std::filesystem::path> mask;
  std::optional<std::filesystem::path> calibration;
};

struct FrameSequence {
  std::string id;
  double dt = 0.1;  // seconds between frames
  int image_width = 1242;
  int image_height = 375;
  std::vector<FrameDescriptor> frames;
};

// Reads `<dir>/sequence.json` when present, otherwise discovers a KITTI-style
// layout: velodyne/*.bin (or clouds/*.csv), image_2/*.png, masks/*.png and
// calib/*.txt or calib.txt. Relative paths resolve against `dir`.
FrameSequence load_sequence(const std::filesystem::path& dir);

// Throws kParameter if dt <= 0 or there are no frames.
void validate(const FrameSequence& seq);

}  // namespace lidarlabel

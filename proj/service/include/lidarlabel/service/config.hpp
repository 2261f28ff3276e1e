#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lidarlabel/json_io.hpp"
#include "lidarlabel/session.hpp"

namespace lidarlabel::service {

struct ServiceConfig {
  // Sequence directories, plus every subdirectory of each sequence root.
  std::vector<std::filesystem::path> sequences;
  std::vector<std::filesystem::path> sequence_roots;
  std::filesystem::path session_dir = "sessions";
  std::string host = "127.0.0.1";
  int port = 8080;
  SessionParams params;
  double click_radius = 1.0;  // meters, for (x, y) clicks
  int crop_margin = 16;       // pixels around a cluster's image crop
};

// Relative paths resolve against `base`. Missing keys keep their defaults.
ServiceConfig parse_config(const Json& j, const std::filesystem::path& base = {});
ServiceConfig load_config(const std::filesystem::path& path);

}  // namespace lidarlabel::service

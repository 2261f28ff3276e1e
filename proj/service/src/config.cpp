#include "lidarlabel/service/config.hpp"

#include <fstream>
#include <sstream>

#include "lidarlabel/error.hpp"

namespace lidarlabel::service {
namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

ServiceConfig parse_config(const Json& j, const std::filesystem::path& base) {
  if (!j.is_object()) fail(ErrorCode::kParse, "config must be a JSON object");
  ServiceConfig c;
  try {
    for (const auto& s : j.value("sequences", std::vector<std::string>{})) {
      c.sequences.push_back(resolve(base, s));
    }
    for (const auto& s : j.value("sequence_roots", std::vector<std::string>{})) {
      c.sequence_roots.push_back(resolve(base, s));
    }
    if (j.contains("session_dir")) {
      c.session_dir = resolve(base, j["session_dir"].get<std::string>());
    } else {
      c.session_dir = resolve(base, c.session_dir.string());
    }
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.click_radius = j.value("click_radius", c.click_radius);
    c.crop_margin = j.value("crop_margin", c.crop_margin);
    // Module sections sit at the top level; a "params" wrapper overrides them.
    from_json(j, c.params);
    if (j.contains("params")) from_json(j["params"], c.params);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("config: ") + e.what());
  }
  if (c.port < 0 || c.port > 65535) fail(ErrorCode::kParameter, "port out of range");
  if (!(c.click_radius > 0.0)) fail(ErrorCode::kParameter, "click_radius must be positive");
  if (c.crop_margin < 0) fail(ErrorCode::kParameter, "crop_margin must be >= 0");
  return c;
}

ServiceConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(parse_json(ss.str()), path.parent_path());
}

}  // namespace lidarlabel::service

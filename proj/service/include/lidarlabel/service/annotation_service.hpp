#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "lidarlabel/error.hpp"
#include "lidarlabel/fusion.hpp"
#include "lidarlabel/ground.hpp"
#include "lidarlabel/json_io.hpp"
#include "lidarlabel/sequence.hpp"
#include "lidarlabel/service/config.hpp"
#include "lidarlabel/session.hpp"

namespace lidarlabel::service {

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

int http_status(ErrorCode code);
// {"error": {"code": "<snake_case>", "message": "..."}}
Json error_payload(ErrorCode code, std::string_view message);

// Immutable per-frame data shared by all sessions on a sequence.
struct FrameData {
  PointCloud cloud;
  GroundResult ground;
  std::optional<CalibrationModel> calibration;
  std::vector<PreLabel> prelabels;
  std::optional<std::string> image;
};

using Clock = std::function<std::int64_t()>;  // UTC milliseconds

std::int64_t system_clock_ms();

// Transport-independent annotation API. handle() routes a request to the
// operation and turns lidarlabel::Error into a structured error response.
class AnnotationService {
 public:
  explicit AnnotationService(ServiceConfig config, Clock clock = system_clock_ms);

  Response handle(std::string_view method, std::string_view path, std::string_view body);

  Json list_sequences() const;
  Json frame_payload(const std::string& sequence_id, int frame);
  Json classes() const;

  Json create_session(const Json& body);
  Json get_session(const std::string& session_id);
  Json click(const std::string& session_id, const Json& body);
  Json create_annotation(const std::string& session_id, const Json& body);
  Json patch_annotation(const std::string& session_id, std::uint64_t annotation_id,
                        const Json& body);
  Json delete_annotation(const std::string& session_id, std::uint64_t annotation_id,
                         const Json& body);
  Json advance(const std::string& session_id, const Json& body);
  Json attach_mask(const std::string& session_id, int frame, const Json& body);
  Json metrics(const std::string& session_id);
  std::string export_frame(const std::string& session_id, int frame);
  std::string pointwise(const std::string& session_id, int frame);
  Json save(const std::string& session_id);
  // Replays the log into a fresh session and compares it with the live one.
  Json verify_replay(const std::string& session_id);
  Json loss_curve(const std::string& session_id, const Json& body);

  // Copy taken at an event boundary.
  Session snapshot(const std::string& session_id);

  // Cached frame; loads and runs ground removal on first use.
  std::shared_ptr<const FrameData> frame(const std::string& sequence_id, int frame,
                                         const GroundParams& ground);

  const ServiceConfig& config() const { return config_; }

 private:
  struct SessionSlot {
    std::mutex mutex;
    Session session;
  };

  const FrameSequence& sequence(const std::string& id) const;
  std::shared_ptr<SessionSlot> slot(const std::string& session_id);
  std::size_t resolve_seed(const FrameData& data, const Json& body) const;
  void persist(const Session& session) const;

  ServiceConfig config_;
  Clock clock_;
  std::map<std::string, FrameSequence> sequences_;

  std::shared_mutex frames_mutex_;
  std::map<std::string, std::shared_ptr<const FrameData>> frames_;

  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;
  std::uint64_t session_counter_ = 0;
};

}  // namespace lidarlabel::service

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lidarlabel/boxfit.hpp"
#include "lidarlabel/cluster.hpp"
#include "lidarlabel/fusion.hpp"
#include "lidarlabel/ground.hpp"
#include "lidarlabel/track.hpp"

namespace lidarlabel {

enum class AnnotationSource { kManual, kOneClick, kTracked };

std::string_view to_string(AnnotationSource s);
AnnotationSource parse_annotation_source(std::string_view name);

struct AnnotationRecord {
  std::uint64_t id = 0;
  int frame = 0;
  TopViewBox box;
  AnnotationSource source = AnnotationSource::kManual;
  std::int64_t created_ms = 0;   // UTC milliseconds
  std::int64_t modified_ms = 0;
  std::optional<std::uint64_t> track_id;

  bool operator==(const AnnotationRecord&) const = default;
};

enum class EventKind {
  kClick,
  kBoxCreate,
  kResize,
  kRotate,
  kTranslate,
  kClassAssign,
  kFrameAdvance,
  kDelete,
};

std::string_view to_string(EventKind k);
EventKind parse_event_kind(std::string_view name);
// Adjustments and class assignments: the operations counted per instance.
bool is_countable_op(EventKind k);

// One entry of the append-only session log. Mutating events carry the
// resulting box so the log alone reproduces the session.
struct Event {
  EventKind kind = EventKind::kClick;
  std::int64_t timestamp_ms = 0;
  std::uint64_t annotation_id = 0;
  int frame = 0;
  std::optional<TopViewBox> box;
  std::optional<AnnotationSource> source;
  std::optional<std::uint64_t> track_id;
  std::optional<std::size_t> seed;
  std::vector<std::uint64_t> lost_tracks;  // frame_advance only

  bool operator==(const Event&) const = default;
};

struct TrackRecord {
  std::uint64_t id = 0;
  int born_frame = 0;
  TrackState prior;  // prediction for the current frame
  TrackState state;  // prior updated with the current frame's observation
  bool paused = false;

  bool operator==(const TrackRecord&) const = default;
};

struct SessionParams {
  GroundParams ground;
  ClusterParams cluster;
  FitParams fit;
  KalmanParams kalman;
  std::size_t display_cap = 60000;

  bool operator==(const SessionParams&) const = default;
};

// Annotation state for one frame sequence. All mutation goes through apply(),
// which validates an event, updates annotations and tracks, and appends the
// event to the log.
class Session {
 public:
  Session() = default;
  Session(std::string id, std::string sequence_id, int frame_count, std::int64_t started_ms,
          SessionParams params = {});

  const std::string& id() const { return id_; }
  const std::string& sequence_id() const { return sequence_id_; }
  int frame_count() const { return frame_count_; }
  int current_frame() const { return current_frame_; }
  std::int64_t started_ms() const { return started_ms_; }
  const SessionParams& params() const { return params_; }
  std::uint64_t next_annotation_id() const { return next_id_; }

  const std::map<std::uint64_t, AnnotationRecord>& annotations() const { return annotations_; }
  const std::map<std::uint64_t, TrackRecord>& tracks() const { return tracks_; }
  const std::vector<Event>& log() const { return log_; }
  const std::map<int, RleMask>& masks() const { return masks_; }

  const AnnotationRecord& annotation(std::uint64_t id) const;
  std::vector<AnnotationRecord> frame_annotations(int frame) const;

  // Tracks whose latest annotation sits on the current frame and that are not
  // paused; these are propagated on the next advance.
  std::vector<TrackRecord> live_tracks() const;

  void apply(const Event& event);

  // Inline RLE mask for a frame (not an event; masks are input data).
  void attach_mask(int frame, RleMask mask);

  // Same header, empty state; apply() every logged event again.
  Session replayed() const;

  // Rebuilds a session from persisted parts without re-applying events.
  static Session restore(std::string id, std::string sequence_id, int frame_count,
                         std::int64_t started_ms, SessionParams params, int current_frame,
                         std::uint64_t next_id,
                         std::map<std::uint64_t, AnnotationRecord> annotations,
                         std::map<std::uint64_t, TrackRecord> tracks, std::vector<Event> log,
                         std::map<int, RleMask> masks);

  bool operator==(const Session&) const = default;

 private:
  void apply_create(const Event& e);
  void apply_adjust(const Event& e);
  void apply_advance(const Event& e);
  void apply_delete(const Event& e);
  void observe(TrackRecord& track, const AnnotationRecord& record);

  std::string id_;
  std::string sequence_id_;
  int frame_count_ = 0;
  int current_frame_ = 0;
  std::int64_t started_ms_ = 0;
  SessionParams params_;
  std::uint64_t next_id_ = 1;
  std::map<std::uint64_t, AnnotationRecord> annotations_;
  std::map<std::uint64_t, TrackRecord> tracks_;
  std::vector<Event> log_;
  std::map<int, RleMask> masks_;
};

struct SessionMetrics {
  std::size_t instances = 0;
  std::size_t operations = 0;
  double attributed_seconds = 0.0;
  // Absent when there are no instances.
  std::optional<double> mean_seconds_per_instance;
  std::optional<double> mean_ops_per_instance;
};

// Frame time runs from the frame becoming active (session start or its
// frame_advance) to the frame's last event; it is shared equally by the
// session's instances.
SessionMetrics report_metrics(const Session& session);

// Versioned JSON document.
inline constexpr int kSessionSchemaVersion = 1;
std::string session_to_json(const Session& session);
Session session_from_json(std::string_view text);
void save_session(const std::filesystem::path& path, const Session& session);
Session load_session(const std::filesystem::path& path);

// "class cx cy z_min z_max width length yaw" per line, fixed 6 decimals,
// ordered by annotation id. Missing z extent is written as 0 0.
std::string format_labels(std::span<const TopViewBox> boxes);
std::vector<TopViewBox> parse_labels(std::string_view text);
// Throws kLookup for frames outside the sequence.
std::string export_labels(const Session& session, int frame);

struct LabelConflict {
  std::size_t point = 0;
  std::vector<std::uint64_t> annotation_ids;  // all boxes containing the point
  std::uint64_t chosen = 0;
  bool operator==(const LabelConflict&) const = default;
};

struct PointwiseLabels {
  std::vector<std::optional<ObjectClass>> labels;  // nullopt = background
  std::vector<LabelConflict> conflicts;
};

// Points inside one box take its class; points inside several take the box
// with the nearest center (lowest id on ties) and are reported as conflicts.
PointwiseLabels derive_pointwise_labels(const PointCloud& cloud,
                                        std::span<const AnnotationRecord> annotations);
// "index,class" rows for every point; background points read "background".
std::string format_pointwise_csv(const PointwiseLabels& labels);

}  // namespace lidarlabel

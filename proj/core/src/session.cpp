#include "lidarlabel/session.hpp"

#include <algorithm>
#include <string>

#include "lidarlabel/error.hpp"

namespace lidarlabel {

std::string_view to_string(AnnotationSource s) {
  switch (s) {
    case AnnotationSource::kManual: return "manual";
    case AnnotationSource::kOneClick: return "one_click";
    case AnnotationSource::kTracked: return "tracked";
  }
  return "manual";
}

AnnotationSource parse_annotation_source(std::string_view name) {
  for (auto s : {AnnotationSource::kManual, AnnotationSource::kOneClick,
                 AnnotationSource::kTracked}) {
    if (to_string(s) == name) return s;
  }
  fail(ErrorCode::kParse, "unknown annotation source '" + std::string(name) + "'");
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::kClick: return "click";
    case EventKind::kBoxCreate: return "box_create";
    case EventKind::kResize: return "resize";
    case EventKind::kRotate: return "rotate";
    case EventKind::kTranslate: return "translate";
    case EventKind::kClassAssign: return "class_assign";
    case EventKind::kFrameAdvance: return "frame_advance";
    case EventKind::kDelete: return "delete";
  }
  return "click";
}

EventKind parse_event_kind(std::string_view name) {
  for (auto k : {EventKind::kClick, EventKind::kBoxCreate, EventKind::kResize,
                 EventKind::kRotate, EventKind::kTranslate, EventKind::kClassAssign,
                 EventKind::kFrameAdvance, EventKind::kDelete}) {
    if (to_string(k) == name) return k;
  }
  fail(ErrorCode::kParse, "unknown event kind '" + std::string(name) + "'");
}

bool is_countable_op(EventKind k) {
  return k == EventKind::kResize || k == EventKind::kRotate || k == EventKind::kTranslate ||
         k == EventKind::kClassAssign;
}

Session::Session(std::string id, std::string sequence_id, int frame_count,
                 std::int64_t started_ms, SessionParams params)
    : id_(std::move(id)),
      sequence_id_(std::move(sequence_id)),
      frame_count_(frame_count),
      started_ms_(started_ms),
      params_(params) {
  if (frame_count_ < 1) fail(ErrorCode::kParameter, "session needs at least one frame");
  validate(params_.kalman);
}

const AnnotationRecord& Session::annotation(std::uint64_t id) const {
  const auto it = annotations_.find(id);
  if (it == annotations_.end()) {
    fail(ErrorCode::kLookup, "unknown annotation " + std::to_string(id));
  }
  return it->second;
}

std::vector<AnnotationRecord> Session::frame_annotations(int frame) const {
  std::vector<AnnotationRecord> out;
  for (const auto& [id, rec] : annotations_) {
    if (rec.frame == frame) out.push_back(rec);
  }
  return out;
}

std::vector<TrackRecord> Session::live_tracks() const {
  std::vector<TrackRecord> out;
  for (const auto& [id, track] : tracks_) {
    if (track.paused) continue;
    const auto rec = annotations_.find(track.state.annotation_id);
    if (rec != annotations_.end() && rec->second.frame == current_frame_) {
      out.push_back(track);
    }
  }
  return out;
}

void Session::attach_mask(int frame, RleMask mask) {
  if (frame < 0 || frame >= frame_count_) {
    fail(ErrorCode::kLookup, "frame " + std::to_string(frame) + " outside sequence");
  }
  masks_[frame] = std::move(mask);
}

void Session::apply(const Event& e) {
  if (!log_.empty() && e.timestamp_ms < log_.back().timestamp_ms) {
    fail(ErrorCode::kProtocol, "event timestamps must be non-decreasing");
  }
  switch (e.kind) {
    case EventKind::kClick:
      if (e.frame != current_frame_) fail(ErrorCode::kConflict, "click on a stale frame");
      break;
    case EventKind::kBoxCreate:
      apply_create(e);
      break;
    case EventKind::kResize:
    case EventKind::kRotate:
    case EventKind::kTranslate:
    case EventKind::kClassAssign:
      apply_adjust(e);
      break;
    case EventKind::kFrameAdvance:
      apply_advance(e);
      break;
    case EventKind::kDelete:
      apply_delete(e);
      break;
  }
  log_.push_back(e);
}

void Session::observe(TrackRecord& track, const AnnotationRecord& record) {
  const bool rigid = is_rigid(record.box.label);
  if (track.born_frame == current_frame_ && track.id == record.id) {
    track.state = init_track(record.box, rigid, params_.kalman, record.id);
    track.prior = track.state;
    return;
  }
  // Each observation replaces the previous one for this frame: the update
  // always starts from the frame's prediction.
  track.state = update(track.prior, {record.box.cx, record.box.cy}, params_.kalman);
  track.state.annotation_id = record.id;
  track.state.rigid = rigid;
}

void Session::apply_create(const Event& e) {
  if (e.frame != current_frame_) {
    fail(ErrorCode::kConflict, "box created on frame " + std::to_string(e.frame) +
                                   " but the active frame is " +
                                   std::to_string(current_frame_));
  }
  if (!e.box || !e.source) fail(ErrorCode::kProtocol, "box_create needs a box and a source");
  validate(*e.box);
  if (e.annotation_id != next_id_) {
    fail(ErrorCode::kProtocol, "annotation ids are assigned sequentially; expected " +
                                   std::to_string(next_id_));
  }
  if (e.track_id && !tracks_.contains(*e.track_id)) {
    fail(ErrorCode::kLookup, "unknown track " + std::to_string(*e.track_id));
  }

  AnnotationRecord rec;
  rec.id = e.annotation_id;
  rec.frame = e.frame;
  rec.box = *e.box;
  rec.source = *e.source;
  rec.created_ms = e.timestamp_ms;
  rec.modified_ms = e.timestamp_ms;

  if (e.track_id) {
    TrackRecord& track = tracks_.at(*e.track_id);
    track.paused = false;
    rec.track_id = track.id;
    observe(track, rec);
  } else {
    TrackRecord track;
    track.id = rec.id;
    track.born_frame = current_frame_;
    rec.track_id = track.id;
    observe(track, rec);
    tracks_.emplace(track.id, track);
  }
  annotations_.emplace(rec.id, rec);
  ++next_id_;
}

void Session::apply_adjust(const Event& e) {
  auto it = annotations_.find(e.annotation_id);
  if (it == annotations_.end()) {
    fail(ErrorCode::kLookup, "unknown annotation " + std::to_string(e.annotation_id));
  }
  AnnotationRecord& rec = it->second;
  if (rec.frame != current_frame_ || e.frame != current_frame_) {
    fail(ErrorCode::kConflict, "annotation " + std::to_string(rec.id) +
                                   " is not on the active frame");
  }
  if (!e.box) fail(ErrorCode::kProtocol, std::string(to_string(e.kind)) + " needs a box");
  validate(*e.box);
  rec.box = *e.box;
  rec.modified_ms = e.timestamp_ms;
  if (rec.track_id) {
    auto track = tracks_.find(*rec.track_id);
    if (track != tracks_.end() && track->second.state.annotation_id == rec.id) {
      observe(track->second, rec);
    }
  }
}

void Session::apply_advance(const Event& e) {
  if (e.frame != current_frame_ + 1) {
    fail(ErrorCode::kProtocol, "frames advance one at a time; expected " +
                                   std::to_string(current_frame_ + 1));
  }
  if (e.frame >= frame_count_) fail(ErrorCode::kEndOfSequence, "no frame after the last");
  current_frame_ = e.frame;
  for (auto& [id, track] : tracks_) {
    track.prior = predict(track.state, params_.kalman);
    track.state = track.prior;
  }
  for (std::uint64_t lost : e.lost_tracks) {
    auto it = tracks_.find(lost);
    if (it == tracks_.end()) fail(ErrorCode::kLookup, "unknown track " + std::to_string(lost));
    it->second.paused = true;
  }
}

void Session::apply_delete(const Event& e) {
  auto it = annotations_.find(e.annotation_id);
  if (it == annotations_.end()) {
    fail(ErrorCode::kLookup, "unknown annotation " + std::to_string(e.annotation_id));
  }
  if (it->second.frame != current_frame_) {
    fail(ErrorCode::kConflict, "annotation is not on the active frame");
  }
  std::erase_if(tracks_, [&](const auto& kv) {
    return kv.second.state.annotation_id == e.annotation_id;
  });
  annotations_.erase(it);
}

Session Session::replayed() const {
  Session fresh(id_, sequence_id_, frame_count_, started_ms_, params_);
  fresh.masks_ = masks_;
  for (const Event& e : log_) fresh.apply(e);
  return fresh;
}

Session Session::restore(std::string id, std::string sequence_id, int frame_count,
                         std::int64_t started_ms, SessionParams params, int current_frame,
                         std::uint64_t next_id,
                         std::map<std::uint64_t, AnnotationRecord> annotations,
                         std::map<std::uint64_t, TrackRecord> tracks, std::vector<Event> log,
                         std::map<int, RleMask> masks) {
  Session s(std::move(id), std::move(sequence_id), frame_count, started_ms, params);
  if (current_frame < 0 || current_frame >= frame_count) {
    fail(ErrorCode::kParse, "current frame outside the sequence");
  }
  s.current_frame_ = current_frame;
  s.next_id_ = next_id;
  s.annotations_ = std::move(annotations);
  s.tracks_ = std::move(tracks);
  s.log_ = std::move(log);
  s.masks_ = std::move(masks);
  return s;
}

SessionMetrics report_metrics(const Session& session) {
  SessionMetrics m;
  m.instances = session.annotations().size();

  std::map<int, std::int64_t> activated{{0, session.started_ms()}};
  std::map<int, std::int64_t> last_event;
  for (const Event& e : session.log()) {
    if (is_countable_op(e.kind)) ++m.operations;
    if (e.kind == EventKind::kFrameAdvance) {
      activated[e.frame] = e.timestamp_ms;
      continue;
    }
    auto& last = last_event[e.frame];
    last = std::max(last, e.timestamp_ms);
  }
  std::int64_t total_ms = 0;
  for (const auto& [frame, last] : last_event) {
    const auto start = activated.find(frame);
    if (start == activated.end()) continue;
    total_ms += std::max<std::int64_t>(0, last - start->second);
  }
  m.attributed_seconds = static_cast<double>(total_ms) / 1000.0;
  if (m.instances > 0) {
    const auto n = static_cast<double>(m.instances);
    m.mean_seconds_per_instance = m.attributed_seconds / n;
    m.mean_ops_per_instance = static_cast<double>(m.operations) / n;
  }
  return m;
}

}  // namespace lidarlabel

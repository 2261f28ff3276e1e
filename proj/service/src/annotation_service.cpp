#include "lidarlabel/service/annotation_service.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>

#include "lidarlabel/boxfit.hpp"
#include "lidarlabel/cluster.hpp"
#include "lidarlabel/track.hpp"

namespace lidarlabel::service {
namespace {

// Shared with the UI so exports and highlights agree.
constexpr std::pair<ObjectClass, const char*> kClassColors[] = {
    {ObjectClass::kCar, "#e6194b"},   {ObjectClass::kPedestrian, "#3cb44b"},
    {ObjectClass::kCyclist, "#ffe119"}, {ObjectClass::kTruck, "#4363d8"},
    {ObjectClass::kVan, "#f58231"},   {ObjectClass::kOther, "#a9a9a9"}};

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  const auto q = path.find('?');
  if (q != std::string_view::npos) path = path.substr(0, q);
  while (!path.empty()) {
    const auto start = path.find_first_not_of('/');
    if (start == std::string_view::npos) break;
    path.remove_prefix(start);
    const auto end = path.find('/');
    parts.push_back(path.substr(0, end));
    path.remove_prefix(end == std::string_view::npos ? path.size() : end);
  }
  return parts;
}

template <typename T>
T parse_id(std::string_view s, const char* what) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail(ErrorCode::kLookup, std::string("bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

Response ok(const Json& body, int status = 200) {
  return {status, "application/json", body.dump()};
}

std::int64_t elapsed_ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

int require_frame(const Json& body, const Session& s) {
  const int frame = body.value("frame", s.current_frame());
  if (frame != s.current_frame()) {
    fail(ErrorCode::kConflict, "request targets frame " + std::to_string(frame) +
                                   " but the session is on frame " +
                                   std::to_string(s.current_frame()));
  }
  return frame;
}

// Lenient box reader for client input: (width, length) in any order and any
// yaw; the stored box is normalized.
TopViewBox box_from_request(const Json& body) {
  const Json& jb = body.at("box");
  TopViewBox b;
  b.cx = jb.at("cx").get<double>();
  b.cy = jb.at("cy").get<double>();
  b.width = jb.at("width").get<double>();
  b.length = jb.at("length").get<double>();
  b.yaw = jb.value("yaw", 0.0);
  if (jb.contains("class")) {
    b.label = jb["class"].get<ObjectClass>();
  } else if (body.contains("class")) {
    b.label = body["class"].get<ObjectClass>();
  } else {
    fail(ErrorCode::kParse, "box needs a class");
  }
  if (jb.contains("z") && !jb["z"].is_null()) b.z = jb["z"].get<ZExtent>();
  for (double v : {b.cx, b.cy, b.width, b.length, b.yaw}) {
    if (!std::isfinite(v)) fail(ErrorCode::kParameter, "box values must be finite");
  }
  b = normalized(b);
  validate(b);
  return b;
}

Json record_payload(const Session& s, const AnnotationRecord& rec) {
  Json j = rec;
  if (rec.track_id) {
    const auto it = s.tracks().find(*rec.track_id);
    if (it != s.tracks().end()) {
      const TrackState& st = it->second.state;
      j["track"] = Json{{"id", it->second.id},
                        {"position", {st.x[0], st.x[1]}},
                        {"velocity", {st.x[2], st.x[3]}},
                        {"paused", it->second.paused}};
    }
  }
  return j;
}

Json session_summary(const Session& s) {
  return Json{{"id", s.id()},
              {"sequence", s.sequence_id()},
              {"frame_count", s.frame_count()},
              {"current_frame", s.current_frame()},
              {"params", s.params()}};
}

}  // namespace

std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kLookup: return 404;
    case ErrorCode::kConflict:
    case ErrorCode::kEndOfSequence: return 409;
    case ErrorCode::kParse:
    case ErrorCode::kParameter:
    case ErrorCode::kProtocol:
    case ErrorCode::kSchemaVersion:
    case ErrorCode::kFormat: return 400;
    case ErrorCode::kSeedOnGround:
    case ErrorCode::kNoSeed:
    case ErrorCode::kDegenerateCluster:
    case ErrorCode::kNotVisible:
    case ErrorCode::kInsufficientPoints:
    case ErrorCode::kDegenerateGeometry:
    case ErrorCode::kEmptyCloud: return 422;
    case ErrorCode::kIo:
    case ErrorCode::kCalibration:
    case ErrorCode::kNumerical: return 500;
  }
  return 500;
}

Json error_payload(ErrorCode code, std::string_view message) {
  return Json{{"error", {{"code", to_string(code)}, {"message", message}}}};
}

AnnotationService::AnnotationService(ServiceConfig config, Clock clock)
    : config_(std::move(config)), clock_(std::move(clock)) {
  auto add = [&](FrameSequence seq) {
    validate(seq);
    if (sequences_.contains(seq.id)) {
      fail(ErrorCode::kConflict, "duplicate sequence id '" + seq.id + "'");
    }
    const std::string id = seq.id;
    sequences_.emplace(id, std::move(seq));
  };
  for (const auto& dir : config_.sequences) add(load_sequence(dir));
  for (const auto& root : config_.sequence_roots) {
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
      if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
      try {
        add(load_sequence(dir));
      } catch (const Error& e) {
        // Not a sequence; roots may hold other material.
        if (e.code() == ErrorCode::kConflict) throw;
      }
    }
  }
}

const FrameSequence& AnnotationService::sequence(const std::string& id) const {
  const auto it = sequences_.find(id);
  if (it == sequences_.end()) fail(ErrorCode::kLookup, "unknown sequence '" + id + "'");
  return it->second;
}

std::shared_ptr<const FrameData> AnnotationService::frame(const std::string& sequence_id,
                                                          int k, const GroundParams& ground) {
  const FrameSequence& seq = sequence(sequence_id);
  if (k < 0 || k >= static_cast<int>(seq.frames.size())) {
    fail(ErrorCode::kLookup, "frame " + std::to_string(k) + " not in sequence '" +
                                 sequence_id + "'");
  }
  const std::string key =
      sequence_id + '\n' + std::to_string(k) + '\n' + Json(ground).dump();
  {
    std::shared_lock lock(frames_mutex_);
    if (auto it = frames_.find(key); it != frames_.end()) return it->second;
  }

  const FrameDescriptor& d = seq.frames[static_cast<std::size_t>(k)];
  auto data = std::make_shared<FrameData>();
  data->cloud = d.cloud.extension() == ".csv" ? load_csv(d.cloud) : load_kitti_bin(d.cloud);
  data->cloud.frame_id = sequence_id + "/" + std::to_string(k);
  data->ground = remove_ground(data->cloud, ground);
  if (d.calibration) {
    data->calibration = load_calibration(*d.calibration, seq.image_width, seq.image_height);
    validate(*data->calibration);
    if (d.mask) {
      const SegMask mask = load_mask(*d.mask, class_map_path(*d.mask));
      data->prelabels = transfer_labels(*data->calibration, data->cloud, mask);
    }
  }
  if (d.image) data->image = d.image->string();

  std::unique_lock lock(frames_mutex_);
  auto [it, inserted] = frames_.emplace(key, std::move(data));
  return it->second;
}

std::shared_ptr<AnnotationService::SessionSlot> AnnotationService::slot(
    const std::string& session_id) {
  std::lock_guard lock(sessions_mutex_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) fail(ErrorCode::kLookup, "unknown session '" + session_id + "'");
  return it->second;
}

Session AnnotationService::snapshot(const std::string& session_id) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mutex);
  return s->session;
}

Json AnnotationService::list_sequences() const {
  Json out = Json::array();
  for (const auto& [id, seq] : sequences_) {
    out.push_back(Json{{"id", id},
                       {"frames", seq.frames.size()},
                       {"dt", seq.dt},
                       {"image_width", seq.image_width},
                       {"image_height", seq.image_height}});
  }
  return Json{{"sequences", out}};
}

Json AnnotationService::classes() const {
  Json out = Json::array();
  for (const auto& [cls, color] : kClassColors) {
    out.push_back(Json{{"name", to_string(cls)}, {"color", color}, {"rigid", is_rigid(cls)}});
  }
  return Json{{"classes", out}};
}

Json AnnotationService::frame_payload(const std::string& sequence_id, int k) {
  const auto data = frame(sequence_id, k, config_.params.ground);
  const PointCloud& cloud = data->cloud;
  const std::size_t n = cloud.size();
  const std::size_t cap = std::max<std::size_t>(1, config_.params.display_cap);
  const std::size_t stride = (n + cap - 1) / cap;

  Json points = Json::array();
  Json index_map = Json::array();
  Json ground = Json::array();
  for (std::size_t i = 0; i < n; i += std::max<std::size_t>(stride, 1)) {
    const Point3& p = cloud[i];
    points.push_back({p.x, p.y, p.z, p.intensity});
    index_map.push_back(i);
    ground.push_back(data->ground.is_ground[i] ? 1 : 0);
  }

  Json prelabels = Json::array();
  std::map<std::uint16_t, std::pair<ObjectClass, IndexSet>> instances;
  for (const PreLabel& pl : data->prelabels) {
    prelabels.push_back(Json{{"index", pl.index}, {"class", pl.label}, {"instance", pl.instance}});
    auto& inst = instances[pl.instance];
    inst.first = pl.label;
    inst.second.push_back(pl.index);
  }
  Json crops = Json::array();
  if (data->calibration) {
    for (const auto& [id, inst] : instances) {
      try {
        const PixelRect r =
            crop_for_cluster(*data->calibration, cloud, inst.second, config_.crop_margin);
        crops.push_back(Json{{"instance", id},
                             {"class", inst.first},
                             {"rect", {r.u_min, r.v_min, r.u_max, r.v_max}}});
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNotVisible) throw;
      }
    }
  }

  const PlaneModel& plane = data->ground.plane;
  return Json{{"sequence", sequence_id},
              {"frame", k},
              {"n_points", n},
              {"n_display", index_map.size()},
              {"points", points},
              {"index_map", index_map},
              {"ground", ground},
              {"ground_plane",
               {{"normal", {plane.normal.x(), plane.normal.y(), plane.normal.z()}},
                {"offset", plane.offset}}},
              {"prelabels", prelabels},
              {"crops", crops},
              {"image", data->image ? Json(*data->image) : Json(nullptr)}};
}

Json AnnotationService::create_session(const Json& body) {
  const std::string seq_id = body.at("sequence").get<std::string>();
  const FrameSequence& seq = sequence(seq_id);

  std::lock_guard lock(sessions_mutex_);
  std::string id;
  if (body.contains("id")) {
    id = body["id"].get<std::string>();
    if (id.empty() || id.find_first_of("/\\.") != std::string::npos) {
      fail(ErrorCode::kParameter, "session id must be a plain name");
    }
  } else {
    do {
      id = "session-" + std::to_string(++session_counter_);
    } while (sessions_.contains(id));
  }
  if (sessions_.contains(id)) fail(ErrorCode::kConflict, "session '" + id + "' already exists");

  auto s = std::make_shared<SessionSlot>();
  if (body.value("load", false)) {
    s->session = load_session(config_.session_dir / (id + ".json"));
    if (s->session.sequence_id() != seq_id) {
      fail(ErrorCode::kConflict, "stored session belongs to sequence '" +
                                     s->session.sequence_id() + "'");
    }
  } else {
    SessionParams params = config_.params;
    if (body.contains("params")) from_json(body["params"], params);
    KalmanParams& kp = params.kalman;
    if (!body.contains("params") || !body["params"].contains("tracking") ||
        !body["params"]["tracking"].contains("dt")) {
      kp.dt = seq.dt;
    }
    s->session = Session(id, seq_id, static_cast<int>(seq.frames.size()), clock_(), params);
  }
  sessions_.emplace(id, s);
  return session_summary(s->session);
}

Json AnnotationService::get_session(const std::string& session_id) {
  return session_document(snapshot(session_id));
}

std::size_t AnnotationService::resolve_seed(const FrameData& data, const Json& body) const {
  if (body.contains("index")) {
    const auto idx = body["index"].get<std::size_t>();
    if (idx >= data.cloud.size()) {
      fail(ErrorCode::kLookup, "point index " + std::to_string(idx) + " out of range");
    }
    return idx;
  }
  if (body.contains("instance")) {
    return seed_from_prelabel(data.cloud, data.prelabels, body["instance"].get<std::uint16_t>());
  }
  if (body.contains("x") && body.contains("y")) {
    const double x = body["x"].get<double>();
    const double y = body["y"].get<double>();
    const double r2 = config_.click_radius * config_.click_radius;
    double best = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> seed;
    for (std::size_t i : data.ground.nonground) {
      const double dx = data.cloud[i].x - x;
      const double dy = data.cloud[i].y - y;
      const double d2 = dx * dx + dy * dy;
      if (d2 <= r2 && d2 < best) {
        best = d2;
        seed = i;
      }
    }
    if (!seed) {
      fail(ErrorCode::kNoSeed, "no object point within " + std::to_string(config_.click_radius) +
                                   " m of the click");
    }
    return *seed;
  }
  fail(ErrorCode::kParse, "click needs an index, an instance or x and y");
}

Json AnnotationService::click(const std::string& session_id, const Json& body) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mutex);
  Session& session = s->session;
  const int k = require_frame(body, session);
  const SessionParams& p = session.params();
  const auto data = frame(session.sequence_id(), k, p.ground);

  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t seed = resolve_seed(*data, body);
  const Cluster cluster = expand_cluster(data->cloud, data->ground.nonground, seed, p.cluster);
  const IndexSet members = restore_full_resolution(data->cloud, cluster, p.cluster.epsilon);
  TopViewBox box = fit_cluster_box(data->cloud, members, p.fit);
  if (body.contains("class")) box.label = body["class"].get<ObjectClass>();
  const std::int64_t elapsed = elapsed_ms_since(t0);

  Event e;
  e.kind = EventKind::kClick;
  e.timestamp_ms = clock_();
  e.frame = k;
  e.seed = seed;
  session.apply(e);

  Json crop = nullptr;
  if (data->calibration) {
    try {
      const PixelRect r = crop_for_cluster(*data->calibration, data->cloud, members,
                                           config_.crop_margin);
      crop = {r.u_min, r.v_min, r.u_max, r.v_max};
    } catch (const Error& err) {
      if (err.code() != ErrorCode::kNotVisible) throw;
    }
  }
  return Json{{"box", box},
              {"seed", seed},
              {"members", members},
              {"downsampled", cluster.downsampled},
              {"crop", crop},
              {"image", data->image ? Json(*data->image) : Json(nullptr)},
              {"elapsed_ms", elapsed}};
}

Json AnnotationService::create_annotation(const std::string& session_id, const Json& body) {
  const TopViewBox box = box_from_request(body);
  auto s = slot(session_id);
  std::lock_guard lock(s->mutex);
  Session& session = s->session;

  Event e;
  e.kind = EventKind::kBoxCreate;
  e.timestamp_ms = clock_();
  e.frame = require_frame(body, session);
  e.annotation_id = session.next_annotation_id();
  e.box = box;
  e.source = parse_annotation_source(body.value("source", std::string("manual")));
  if (*e.source == AnnotationSource::kTracked) {
    fail(ErrorCode::kProtocol, "tracked annotations come from advance");
  }
  if (body.contains("seed")) e.seed = body["seed"].get<std::size_t>();
  if (body.contains("track_id")) e.track_id = body["track_id"].get<std::uint64_t>();
  session.apply(e);
  return record_payload(session, session.annotation(e.annotation_id));
}

Json AnnotationService::patch_annotation(const std::string& session_id,
                                         std::uint64_t annotation_id, const Json& body) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mutex);
  Session& session = s->session;
  const int k = require_frame(body, session);
  TopViewBox box = session.annotation(annotation_id).box;

  // One event per gesture kind so operation counts stay exact.
  std::vector<std::pair<EventKind, TopViewBox>> steps;
  if (body.contains("box")) {
    if (!body.contains("kind")) fail(ErrorCode::kParse, "box replacement needs a kind");
    const EventKind kind = parse_event_kind(body["kind"].get<std::string>());
    if (!is_countable_op(kind)) fail(ErrorCode::kProtocol, "kind must be an adjustment");
    Json b = body;
    if (!b["box"].contains("class")) b["box"]["class"] = box.label;
    steps.emplace_back(kind, box_from_request(b));
  } else {
    if (body.contains("dx") || body.contains("dy")) {
      box.cx += body.value("dx", 0.0);
      box.cy += body.value("dy", 0.0);
      steps.emplace_back(EventKind::kTranslate, box);
    }
    if (body.contains("dyaw")) {
      box.yaw = canonical_yaw(box.yaw + body["dyaw"].get<double>());
      steps.emplace_back(EventKind::kRotate, box);
    }
    if (body.contains("dwidth") || body.contains("dlength")) {
      box.width += body.value("dwidth", 0.0);
      box.length += body.value("dlength", 0.0);
      box = normalized(box);
      steps.emplace_back(EventKind::kResize, box);
    }
    if (body.contains("class")) {
      box.label = body["class"].get<ObjectClass>();
      steps.emplace_back(EventKind::kClassAssign, box);
    }
  }
  if (steps.empty()) fail(ErrorCode::kParse, "patch changes nothing");
  for (const auto& [kind, b] : steps) validate(b);

  for (const auto& [kind, b] : steps) {
    Event e;
    e.kind = kind;
    e.timestamp_ms = clock_();
    e.frame = k;
    e.annotation_id = annotation_id;
    e.box = b;
    session.apply(e);
  }
  return record_payload(session, session.annotation(annotation_id));
}

Json AnnotationService::delete_annotation(const std::string& session_id,
                                          std::uint64_t annotation_id, const Json& body) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mutex);
  Session& session = s->session;
  Event e;
  e.kind = EventKind::kDelete;
  e.timestamp_ms = clock_();
  e.frame = require_frame(body, session);
  e.annotation_id = annotation_id;
  session.apply(e);
  return Json{{"deleted", annotation_id}};
}

Json AnnotationService::advance(const std::string& session_id, const Json& body) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mutex);
  Session& session = s->session;
  const int to = body.value("to", session.current_frame() + 1);
  if (to != session.current_frame() + 1) {
    fail(ErrorCode::kProtocol, "frames advance one at a time; expected " +
                                   std::to_string(session.current_frame() + 1));
  }
  if (to >= session.frame_count()) fail(ErrorCode::kEndOfSequence, "no frame after the last");

  const SessionParams& p = session.params();
  const auto data = frame(session.sequence_id(), to, p.ground);
  PropagationParams pp;
  pp.cluster = p.cluster;
  pp.fit = p.fit;

  struct Pending {
    std::uint64_t track_id;
    Proposal proposal;
  };
  std::vector<Pending> proposals;
  std::vector<std::uint64_t> lost;
  for (const TrackRecord& track : session.live_tracks()) {
    const TrackState predicted = predict(track.state, p.kalman);
    const TopViewBox& prior = session.annotation(track.state.annotation_id).box;
    std::optional<Proposal> proposal;
    try {
      proposal = propagate_annotation(data->cloud, data->ground.nonground, predicted, prior, pp);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateCluster) throw;
    }
    if (proposal) {
      proposals.push_back({track.id, std::move(*proposal)});
    } else {
      lost.push_back(track.id);
    }
  }

  Event adv;
  adv.kind = EventKind::kFrameAdvance;
  adv.timestamp_ms = clock_();
  adv.frame = to;
  adv.lost_tracks = lost;
  session.apply(adv);

  Json out = Json::array();
  for (const Pending& pending : proposals) {
    Event e;
    e.kind = EventKind::kBoxCreate;
    e.timestamp_ms = adv.timestamp_ms;
    e.frame = to;
    e.annotation_id = session.next_annotation_id();
    e.box = pending.proposal.box;
    e.source = AnnotationSource::kTracked;
    e.track_id = pending.track_id;
    e.seed = pending.proposal.seed;
    session.apply(e);
    Json rec = record_payload(session, session.annotation(e.annotation_id));
    rec["members"] = pending.proposal.members.size();
    out.push_back(std::move(rec));
  }
  return Json{{"frame", to}, {"proposals", out}, {"lost_tracks", lost}};
}

Json AnnotationService::attach_mask(const std::string& session_id, int k, const Json& body) {
  const RleMask mask = body.get<RleMask>();
  decode_rle(mask);  // validates runs against the image size
  auto s = slot(session_id);
  std::lock_guard lock(s->mutex);
  s->session.attach_mask(k, mask);
  return Json{{"frame", k}, {"instances", mask.instances.size()}};
}

Json AnnotationService::metrics(const std::string& session_id) {
  const SessionMetrics m = report_metrics(snapshot(session_id));
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return Json{{"instances", m.instances},
              {"operations", m.operations},
              {"attributed_seconds", m.attributed_seconds},
              {"mean_seconds_per_instance", opt(m.mean_seconds_per_instance)},
              {"mean_ops_per_instance", opt(m.mean_ops_per_instance)}};
}

std::string AnnotationService::export_frame(const std::string& session_id, int k) {
  return export_labels(snapshot(session_id), k);
}

std::string AnnotationService::pointwise(const std::string& session_id, int k) {
  const Session s = snapshot(session_id);
  const auto data = frame(s.sequence_id(), k, s.params().ground);
  const auto records = s.frame_annotations(k);
  return format_pointwise_csv(derive_pointwise_labels(data->cloud, records));
}

Json AnnotationService::save(const std::string& session_id) {
  const Session s = snapshot(session_id);
  persist(s);
  return Json{{"path", (config_.session_dir / (s.id() + ".json")).string()},
              {"events", s.log().size()}};
}

void AnnotationService::persist(const Session& session) const {
  std::error_code ec;
  std::filesystem::create_directories(config_.session_dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + config_.session_dir.string());
  save_session(config_.session_dir / (session.id() + ".json"), session);
}

Json AnnotationService::verify_replay(const std::string& session_id) {
  const Session s = snapshot(session_id);
  const Session r = s.replayed();
  return Json{{"events", s.log().size()},
              {"identical", r == s && session_to_json(r) == session_to_json(s)}};
}

Json AnnotationService::loss_curve(const std::string& session_id, const Json& body) {
  const Session s = snapshot(session_id);
  const int k = body.value("frame", s.current_frame());
  const SessionParams& p = s.params();
  const auto data = frame(s.sequence_id(), k, p.ground);
  const std::size_t seed = resolve_seed(*data, body);
  const Cluster cluster = expand_cluster(data->cloud, data->ground.nonground, seed, p.cluster);
  const IndexSet members = restore_full_resolution(data->cloud, cluster, p.cluster.epsilon);
  const auto pts = top_view(data->cloud, members);
  Json samples = Json::array();
  for (const LossSample& ls : lidarlabel::loss_curve(pts, p.fit.theta_step)) {
    samples.push_back({ls.theta, ls.loss});
  }
  return Json{{"seed", seed},
              {"members", members.size()},
              {"best_heading", SearchRectangleFitter(p.fit).best_heading(pts)},
              {"samples", samples}};
}

Response AnnotationService::handle(std::string_view method, std::string_view path,
                                   std::string_view body_text) {
  try {
    const auto parts = split_path(path);
    const std::size_t n = parts.size();
    auto body = [&] {
      if (body_text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
        return Json::object();
      }
      Json j = parse_json(body_text);
      if (!j.is_object()) fail(ErrorCode::kParse, "request body must be a JSON object");
      return j;
    };
    auto is = [&](std::string_view m) { return method == m; };

    if (n == 1 && parts[0] == "sequences" && is("GET")) return ok(list_sequences());
    if (n == 1 && parts[0] == "classes" && is("GET")) return ok(classes());
    if (n == 4 && parts[0] == "sequences" && parts[2] == "frames" && is("GET")) {
      return ok(frame_payload(std::string(parts[1]), parse_id<int>(parts[3], "frame")));
    }
    if (n == 1 && parts[0] == "sessions" && is("POST")) return ok(create_session(body()), 201);

    if (n >= 2 && parts[0] == "sessions") {
      const std::string sid(parts[1]);
      if (n == 2 && is("GET")) return ok(get_session(sid));
      const std::string_view op = n >= 3 ? parts[2] : std::string_view();
      if (n == 3 && op == "click" && is("POST")) return ok(click(sid, body()));
      if (n == 3 && op == "annotations" && is("POST")) {
        return ok(create_annotation(sid, body()), 201);
      }
      if (n == 4 && op == "annotations") {
        const auto aid = parse_id<std::uint64_t>(parts[3], "annotation id");
        if (is("PATCH")) return ok(patch_annotation(sid, aid, body()));
        if (is("DELETE")) return ok(delete_annotation(sid, aid, body()));
      }
      if (n == 3 && op == "advance" && is("POST")) return ok(advance(sid, body()));
      if (n == 3 && op == "metrics" && is("GET")) return ok(metrics(sid));
      if (n == 3 && op == "save" && is("POST")) return ok(save(sid));
      if (n == 3 && op == "replay" && is("GET")) return ok(verify_replay(sid));
      if (n == 3 && op == "loss-curve" && is("POST")) return ok(loss_curve(sid, body()));
      if (n == 4 && op == "masks" && is("PUT")) {
        return ok(attach_mask(sid, parse_id<int>(parts[3], "frame"), body()));
      }
      if (n == 4 && op == "export" && is("GET")) {
        return {200, "text/plain", export_frame(sid, parse_id<int>(parts[3], "frame"))};
      }
      if (n == 4 && op == "pointwise" && is("GET")) {
        return {200, "text/csv", pointwise(sid, parse_id<int>(parts[3], "frame"))};
      }
    }
    return {404, "application/json",
            error_payload(ErrorCode::kLookup,
                          "no route for " + std::string(method) + " " + std::string(path))
                .dump()};
  } catch (const Error& e) {
    return {http_status(e.code()), "application/json", error_payload(e.code(), e.what()).dump()};
  } catch (const nlohmann::json::exception& e) {
    return {400, "application/json", error_payload(ErrorCode::kParse, e.what()).dump()};
  }
}

}  // namespace lidarlabel::service

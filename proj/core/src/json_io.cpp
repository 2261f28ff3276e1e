#include "lidarlabel/json_io.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include "lidarlabel/error.hpp"

namespace lidarlabel {
namespace {

template <typename T>
void read_optional(const Json& j, const char* key, T& out) {
  if (const auto it = j.find(key); it != j.end()) it->get_to(out);
}

template <typename Derived>
Json to_array(const Eigen::MatrixBase<Derived>& m) {
  // Row-major flattening.
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  }
  return a;
}

template <typename Derived>
void from_array(const Json& j, Eigen::MatrixBase<Derived>& m) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(m.size())) {
    fail(ErrorCode::kParse, "expected an array of " + std::to_string(m.size()) + " numbers");
  }
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = j.at(k++).get<double>();
  }
}

}  // namespace

void to_json(Json& j, ObjectClass c) { j = std::string(to_string(c)); }
void from_json(const Json& j, ObjectClass& c) { c = parse_object_class(j.get<std::string>()); }

void to_json(Json& j, const ZExtent& z) { j = Json{{"min", z.min}, {"max", z.max}}; }
void from_json(const Json& j, ZExtent& z) {
  j.at("min").get_to(z.min);
  j.at("max").get_to(z.max);
}

void to_json(Json& j, const TopViewBox& box) {
  j = Json{{"cx", box.cx},         {"cy", box.cy},   {"width", box.width},
           {"length", box.length}, {"yaw", box.yaw}, {"class", box.label}};
  if (box.z) j["z"] = *box.z;
}

void from_json(const Json& j, TopViewBox& box) {
  box = TopViewBox{};
  j.at("cx").get_to(box.cx);
  j.at("cy").get_to(box.cy);
  j.at("width").get_to(box.width);
  j.at("length").get_to(box.length);
  j.at("yaw").get_to(box.yaw);
  j.at("class").get_to(box.label);
  if (const auto it = j.find("z"); it != j.end() && !it->is_null()) box.z = it->get<ZExtent>();
  validate(box);
}

void to_json(Json& j, const GroundParams& p) {
  j = Json{{"seed_fraction", p.seed_fraction},
           {"distance_threshold", p.distance_threshold},
           {"max_iterations", p.max_iterations},
           {"convergence_angle", p.convergence_angle},
           {"tile_size", p.tile_size}};
}
void from_json(const Json& j, GroundParams& p) {
  read_optional(j, "seed_fraction", p.seed_fraction);
  read_optional(j, "distance_threshold", p.distance_threshold);
  read_optional(j, "max_iterations", p.max_iterations);
  read_optional(j, "convergence_angle", p.convergence_angle);
  read_optional(j, "tile_size", p.tile_size);
  validate(p);
}

void to_json(Json& j, const ClusterParams& p) {
  j = Json{{"epsilon", p.epsilon},
           {"prune_radius", p.prune_radius},
           {"downsample_cell", p.downsample_cell},
           {"max_points_before_downsample", p.max_points_before_downsample}};
}
void from_json(const Json& j, ClusterParams& p) {
  read_optional(j, "epsilon", p.epsilon);
  read_optional(j, "prune_radius", p.prune_radius);
  read_optional(j, "downsample_cell", p.downsample_cell);
  read_optional(j, "max_points_before_downsample", p.max_points_before_downsample);
  validate(p);
}

void to_json(Json& j, const FitParams& p) {
  j = Json{{"theta_step", p.theta_step}, {"min_cluster_size", p.min_cluster_size}};
}
void from_json(const Json& j, FitParams& p) {
  read_optional(j, "theta_step", p.theta_step);
  read_optional(j, "min_cluster_size", p.min_cluster_size);
  validate(p);
}

void to_json(Json& j, const KalmanParams& p) {
  j = Json{{"dt", p.dt},
           {"process_noise", to_array(p.process_noise)},
           {"observation_noise", to_array(p.observation_noise)},
           {"initial_covariance", to_array(p.initial_covariance)}};
}
void from_json(const Json& j, KalmanParams& p) {
  read_optional(j, "dt", p.dt);
  if (j.contains("process_noise")) from_array(j["process_noise"], p.process_noise);
  if (j.contains("observation_noise")) from_array(j["observation_noise"], p.observation_noise);
  if (j.contains("initial_covariance")) {
    from_array(j["initial_covariance"], p.initial_covariance);
  }
  validate(p);
}

void to_json(Json& j, const SessionParams& p) {
  j = Json{{"ground", p.ground},
           {"cluster", p.cluster},
           {"fit", p.fit},
           {"tracking", p.kalman},
           {"display_cap", p.display_cap}};
}
void from_json(const Json& j, SessionParams& p) {
  read_optional(j, "ground", p.ground);
  read_optional(j, "cluster", p.cluster);
  read_optional(j, "fit", p.fit);
  read_optional(j, "tracking", p.kalman);
  read_optional(j, "display_cap", p.display_cap);
}

void to_json(Json& j, const TrackState& s) {
  j = Json{{"x", to_array(s.x)},
           {"P", to_array(s.P)},
           {"annotation_id", s.annotation_id},
           {"rigid", s.rigid}};
}
void from_json(const Json& j, TrackState& s) {
  from_array(j.at("x"), s.x);
  from_array(j.at("P"), s.P);
  j.at("annotation_id").get_to(s.annotation_id);
  j.at("rigid").get_to(s.rigid);
}

void to_json(Json& j, const TrackRecord& t) {
  j = Json{{"id", t.id},
           {"born_frame", t.born_frame},
           {"prior", t.prior},
           {"state", t.state},
           {"paused", t.paused}};
}
void from_json(const Json& j, TrackRecord& t) {
  j.at("id").get_to(t.id);
  j.at("born_frame").get_to(t.born_frame);
  j.at("prior").get_to(t.prior);
  j.at("state").get_to(t.state);
  j.at("paused").get_to(t.paused);
}

void to_json(Json& j, const AnnotationRecord& r) {
  j = Json{{"id", r.id},
           {"frame", r.frame},
           {"box", r.box},
           {"source", to_string(r.source)},
           {"created_ms", r.created_ms},
           {"modified_ms", r.modified_ms}};
  if (r.track_id) j["track_id"] = *r.track_id;
}
void from_json(const Json& j, AnnotationRecord& r) {
  r = AnnotationRecord{};
  j.at("id").get_to(r.id);
  j.at("frame").get_to(r.frame);
  j.at("box").get_to(r.box);
  r.source = parse_annotation_source(j.at("source").get<std::string>());
  j.at("created_ms").get_to(r.created_ms);
  j.at("modified_ms").get_to(r.modified_ms);
  if (j.contains("track_id")) r.track_id = j["track_id"].get<std::uint64_t>();
}

void to_json(Json& j, const Event& e) {
  j = Json{{"kind", to_string(e.kind)},
           {"timestamp_ms", e.timestamp_ms},
           {"annotation_id", e.annotation_id},
           {"frame", e.frame}};
  if (e.box) j["box"] = *e.box;
  if (e.source) j["source"] = to_string(*e.source);
  if (e.track_id) j["track_id"] = *e.track_id;
  if (e.seed) j["seed"] = *e.seed;
  if (e.kind == EventKind::kFrameAdvance) j["lost_tracks"] = e.lost_tracks;
}
void from_json(const Json& j, Event& e) {
  e = Event{};
  e.kind = parse_event_kind(j.at("kind").get<std::string>());
  j.at("timestamp_ms").get_to(e.timestamp_ms);
  j.at("annotation_id").get_to(e.annotation_id);
  j.at("frame").get_to(e.frame);
  if (j.contains("box")) e.box = j["box"].get<TopViewBox>();
  if (j.contains("source")) e.source = parse_annotation_source(j["source"].get<std::string>());
  if (j.contains("track_id")) e.track_id = j["track_id"].get<std::uint64_t>();
  if (j.contains("seed")) e.seed = j["seed"].get<std::size_t>();
  read_optional(j, "lost_tracks", e.lost_tracks);
}

void to_json(Json& j, const RleMask& m) {
  Json instances = Json::array();
  for (const RleInstance& inst : m.instances) {
    instances.push_back(Json{{"id", inst.id}, {"class", inst.label}, {"runs", inst.runs}});
  }
  j = Json{{"width", m.width}, {"height", m.height}, {"instances", instances}};
}
void from_json(const Json& j, RleMask& m) {
  m = RleMask{};
  j.at("width").get_to(m.width);
  j.at("height").get_to(m.height);
  for (const Json& ij : j.at("instances")) {
    RleInstance inst;
    ij.at("id").get_to(inst.id);
    ij.at("class").get_to(inst.label);
    ij.at("runs").get_to(inst.runs);
    if (inst.runs.size() % 2 != 0) fail(ErrorCode::kParse, "RLE runs must come in pairs");
    m.instances.push_back(std::move(inst));
  }
}

Json session_document(const Session& s) {
  Json annotations = Json::array();
  for (const auto& [id, rec] : s.annotations()) annotations.push_back(rec);
  Json tracks = Json::array();
  for (const auto& [id, track] : s.tracks()) tracks.push_back(track);
  Json masks = Json::array();
  for (const auto& [frame, mask] : s.masks()) {
    Json m = mask;
    m["frame"] = frame;
    masks.push_back(std::move(m));
  }
  return Json{{"schema_version", kSessionSchemaVersion},
              {"id", s.id()},
              {"sequence_id", s.sequence_id()},
              {"frame_count", s.frame_count()},
              {"current_frame", s.current_frame()},
              {"started_ms", s.started_ms()},
              {"next_annotation_id", s.next_annotation_id()},
              {"params", s.params()},
              {"annotations", annotations},
              {"tracks", tracks},
              {"log", s.log()},
              {"masks", masks}};
}

Session session_from_document(const Json& doc) {
  try {
    if (!doc.is_object()) fail(ErrorCode::kParse, "session document must be an object");
    const int version = doc.at("schema_version").get<int>();
    if (version != kSessionSchemaVersion) {
      fail(ErrorCode::kSchemaVersion, "session schema version " + std::to_string(version) +
                                          " is not supported (expected " +
                                          std::to_string(kSessionSchemaVersion) + ")");
    }
    std::map<std::uint64_t, AnnotationRecord> annotations;
    for (const Json& a : doc.at("annotations")) {
      auto rec = a.get<AnnotationRecord>();
      if (!annotations.emplace(rec.id, rec).second) {
        fail(ErrorCode::kParse, "duplicate annotation id " + std::to_string(rec.id));
      }
    }
    std::map<std::uint64_t, TrackRecord> tracks;
    for (const Json& t : doc.at("tracks")) {
      auto track = t.get<TrackRecord>();
      tracks.emplace(track.id, track);
    }
    std::map<int, RleMask> masks;
    for (const Json& m : doc.at("masks")) masks[m.at("frame").get<int>()] = m.get<RleMask>();
    return Session::restore(doc.at("id").get<std::string>(),
                            doc.at("sequence_id").get<std::string>(),
                            doc.at("frame_count").get<int>(), doc.at("started_ms").get<std::int64_t>(),
                            doc.at("params").get<SessionParams>(),
                            doc.at("current_frame").get<int>(),
                            doc.at("next_annotation_id").get<std::uint64_t>(),
                            std::move(annotations), std::move(tracks),
                            doc.at("log").get<std::vector<Event>>(), std::move(masks));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed session: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSchemaVersion) throw;
    fail(ErrorCode::kParse, std::string("malformed session: ") + e.what());
  }
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, e.what());
  }
}

std::string session_to_json(const Session& session) {
  return session_document(session).dump(2) + "\n";
}

Session session_from_json(std::string_view text) {
  return session_from_document(parse_json(text));
}

void save_session(const std::filesystem::path& path, const Session& session) {
  const std::string text = session_to_json(session);
  // Write then rename so a crash never leaves a truncated session behind.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + tmp.string());
    out << text;
    if (!out.flush()) fail(ErrorCode::kIo, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::kIo, "cannot rename to " + path.string() + ": " + ec.message());
}

Session load_session(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return session_from_json(ss.str());
}

}  // namespace lidarlabel

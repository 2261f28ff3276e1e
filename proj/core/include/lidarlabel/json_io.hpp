#pragma once

// nlohmann::json conversions for the domain types. Doubles are written in
// shortest round-trip form, so dump(parse(dump(x))) is byte-identical.

#include <json.hpp>

#include "lidarlabel/boxfit.hpp"
#include "lidarlabel/cluster.hpp"
#include "lidarlabel/fusion.hpp"
#include "lidarlabel/ground.hpp"
#include "lidarlabel/session.hpp"
#include "lidarlabel/track.hpp"

namespace lidarlabel {

using Json = nlohmann::json;

void to_json(Json& j, ObjectClass c);
void from_json(const Json& j, ObjectClass& c);
void to_json(Json& j, const ZExtent& z);
void from_json(const Json& j, ZExtent& z);
// Validates the box on read.
void to_json(Json& j, const TopViewBox& box);
void from_json(const Json& j, TopViewBox& box);

void to_json(Json& j, const GroundParams& p);
void from_json(const Json& j, GroundParams& p);
void to_json(Json& j, const ClusterParams& p);
void from_json(const Json& j, ClusterParams& p);
void to_json(Json& j, const FitParams& p);
void from_json(const Json& j, FitParams& p);
void to_json(Json& j, const KalmanParams& p);
void from_json(const Json& j, KalmanParams& p);
// Missing sections and keys keep their defaults.
void to_json(Json& j, const SessionParams& p);
void from_json(const Json& j, SessionParams& p);

void to_json(Json& j, const TrackState& s);
void from_json(const Json& j, TrackState& s);
void to_json(Json& j, const TrackRecord& t);
void from_json(const Json& j, TrackRecord& t);
void to_json(Json& j, const AnnotationRecord& r);
void from_json(const Json& j, AnnotationRecord& r);
void to_json(Json& j, const Event& e);
void from_json(const Json& j, Event& e);

void to_json(Json& j, const RleMask& m);
void from_json(const Json& j, RleMask& m);

Json session_document(const Session& session);
// Throws kSchemaVersion on a version mismatch and kParse on malformed input.
Session session_from_document(const Json& doc);

// Parses text, mapping library exceptions to kParse.
Json parse_json(std::string_view text);

}  // namespace lidarlabel

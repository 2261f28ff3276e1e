#include "lidarlabel/error.hpp"

namespace lidarlabel {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kFormat: return "format_error";
    case ErrorCode::kEmptyCloud: return "empty_cloud";
    case ErrorCode::kParameter: return "parameter_error";
    case ErrorCode::kInsufficientPoints: return "insufficient_points";
    case ErrorCode::kDegenerateGeometry: return "degenerate_geometry";
    case ErrorCode::kSeedOnGround: return "seed_on_ground";
    case ErrorCode::kNoSeed: return "no_seed";
    case ErrorCode::kDegenerateCluster: return "degenerate_cluster";
    case ErrorCode::kNotVisible: return "not_visible";
    case ErrorCode::kLookup: return "not_found";
    case ErrorCode::kCalibration: return "calibration_error";
    case ErrorCode::kNumerical: return "numerical_error";
    case ErrorCode::kSchemaVersion: return "schema_version";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kProtocol: return "protocol_error";
    case ErrorCode::kEndOfSequence: return "end_of_sequence";
  }
  return "unknown";
}

}  // namespace lidarlabel

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lidarlabel {

enum class ErrorCode {
  kIo,
  kFormat,
  kEmptyCloud,
  kParameter,
  kInsufficientPoints,
  kDegenerateGeometry,
  kSeedOnGround,
  kNoSeed,
  kDegenerateCluster,
  kNotVisible,
  kLookup,
  kCalibration,
  kNumerical,
  kSchemaVersion,
  kParse,
  kConflict,
  kProtocol,
  kEndOfSequence,
};

// Stable snake_case name, used in service error payloads.
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace lidarlabel

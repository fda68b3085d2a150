#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace posekit {

enum class ErrorCode {
  InvalidArgument,
  NearSingularity,
  BehindCamera,
  PointAtInfinity,
  NoConvergence,
  // ingest
  MissingFile,
  MalformedLine,
  UnknownCameraModel,
  NonUnitQuaternion,
  NonMonotonicTimestamps,
  UnsupportedFormat,
  IndexOutOfRange,
  DimensionMismatch,
  TrailingGarbage,
  // align
  Degenerate,
  Reflection,
  NoConsensus,
  InsufficientRegistration,
  // refine
  EmptySilhouette,
  CannotStart,
  // service
  NotFound,
  Io,
  UnavailableFrame,
  Busy,
};

std::string_view to_string(ErrorCode code);

/// Every domain failure in the library is reported as an Error carrying a
/// machine-readable code; the message is meant for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failure tied to a location in a text file (line is 1-based, 0 when
/// not applicable).
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, const std::string& file, std::size_t line,
             const std::string& what);

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace posekit

#include "posekit/error.hpp"

namespace posekit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::NearSingularity: return "near_singularity";
    case ErrorCode::BehindCamera: return "behind_camera";
    case ErrorCode::PointAtInfinity: return "point_at_infinity";
    case ErrorCode::NoConvergence: return "no_convergence";
    case ErrorCode::MissingFile: return "missing_file";
    case ErrorCode::MalformedLine: return "malformed_line";
    case ErrorCode::UnknownCameraModel: return "unknown_camera_model";
    case ErrorCode::NonUnitQuaternion: return "non_unit_quaternion";
    case ErrorCode::NonMonotonicTimestamps: return "non_monotonic_timestamps";
    case ErrorCode::UnsupportedFormat: return "unsupported_format";
    case ErrorCode::IndexOutOfRange: return "index_out_of_range";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::TrailingGarbage: return "trailing_garbage";
    case ErrorCode::Degenerate: return "degenerate";
    case ErrorCode::Reflection: return "reflection";
    case ErrorCode::NoConsensus: return "no_consensus";
    case ErrorCode::InsufficientRegistration: return "insufficient_registration";
    case ErrorCode::EmptySilhouette: return "empty_silhouette";
    case ErrorCode::CannotStart: return "cannot_start";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::Io: return "io";
    case ErrorCode::UnavailableFrame: return "unavailable_frame";
    case ErrorCode::Busy: return "busy";
  }
  return "unknown";
}

ParseError::ParseError(ErrorCode code, const std::string& file,
                       std::size_t line, const std::string& what)
    : Error(code, file + (line ? ":" + std::to_string(line) : std::string()) +
                      ": " + what),
      file_(file),
      line_(line) {}

}  // namespace posekit

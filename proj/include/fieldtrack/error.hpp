#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fieldtrack {

enum class ErrorCode {
  PointAtInfinity,
  SingularMatrix,
  DegenerateConfiguration,
  InsufficientPoints,
  NoConsensus,
  DimensionMismatch,
  UnknownKeypointId,
  SingularInnovation,
  NumericalDegeneracy,
  NoSamples,
  DegenerateProjection,
  EmptyVisibleRegion,
  NoMatchedKeypoints,
  DegenerateHomography,
  NoInitializableFrame,
  FormatError,
  FrameMismatch,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::PointAtInfinity: return "PointAtInfinity";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownKeypointId: return "UnknownKeypointId";
    case ErrorCode::SingularInnovation: return "SingularInnovation";
    case ErrorCode::NumericalDegeneracy: return "NumericalDegeneracy";
    case ErrorCode::NoSamples: return "NoSamples";
    case ErrorCode::DegenerateProjection: return "DegenerateProjection";
    case ErrorCode::EmptyVisibleRegion: return "EmptyVisibleRegion";
    case ErrorCode::NoMatchedKeypoints: return "NoMatchedKeypoints";
    case ErrorCode::DegenerateHomography: return "DegenerateHomography";
    case ErrorCode::NoInitializableFrame: return "NoInitializableFrame";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::FrameMismatch: return "FrameMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// The description without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace fieldtrack

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lpvcar {

enum class ErrorCode {
  kDegenerateSpeed,
  kNonpositiveLoad,
  kSingularDenominator,
  kInvalidBounds,
  kSingularGeometry,
  kLoopDiverged,
  kManeuverInfeasible,
  kSingularLoop,
  kDegenerateFamily,
  kTooManyParameters,
  kInvalidStrip,
  kInvalidArgument,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateSpeed: return "DegenerateSpeed";
    case ErrorCode::kNonpositiveLoad: return "NonpositiveLoad";
    case ErrorCode::kSingularDenominator: return "SingularDenominator";
    case ErrorCode::kInvalidBounds: return "InvalidBounds";
    case ErrorCode::kSingularGeometry: return "SingularGeometry";
    case ErrorCode::kLoopDiverged: return "LoopDiverged";
    case ErrorCode::kManeuverInfeasible: return "ManeuverInfeasible";
    case ErrorCode::kSingularLoop: return "SingularLoop";
    case ErrorCode::kDegenerateFamily: return "DegenerateFamily";
    case ErrorCode::kTooManyParameters: return "TooManyParameters";
    case ErrorCode::kInvalidStrip: return "InvalidStrip";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

}  // namespace lpvcar

#pragma once

#include <stdexcept>
#include <string>

namespace spoc {

enum class ErrorCode {
  ParseError,
  DimensionMismatch,
  SingularData,
  SingularA22,
  UnstableLayer,
  MeshMismatch,
  ResidualTooLarge,
  MissingMultipliers,
  ToleranceNotMet,
  DegenerateReduced,
  MaxIter,
  Infeasible,
  InvalidArgument,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularData: return "SingularData";
    case ErrorCode::SingularA22: return "SingularA22";
    case ErrorCode::UnstableLayer: return "UnstableLayer";
    case ErrorCode::MeshMismatch: return "MeshMismatch";
    case ErrorCode::ResidualTooLarge: return "ResidualTooLarge";
    case ErrorCode::MissingMultipliers: return "MissingMultipliers";
    case ErrorCode::ToleranceNotMet: return "ToleranceNotMet";
    case ErrorCode::DegenerateReduced: return "DegenerateReduced";
    case ErrorCode::MaxIter: return "MaxIter";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace spoc

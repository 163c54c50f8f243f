#ifndef CONEFLOW_ERROR_HPP
#define CONEFLOW_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace coneflow {

enum class ErrorKind {
  DimensionMismatch,
  NotInterior,
  SpaceMismatch,
  ExponentOverflow,
  NotIsometricOnSupport,
  BadPartition,
  ZeroState,
  BadRegion,
  NotACocycle,
  DegenerateSample,
  EmptyWindow,
  ConeMismatch,
  RepMismatch,
  ParseError,
  InvalidArgument,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotInterior: return "NotInterior";
    case ErrorKind::SpaceMismatch: return "SpaceMismatch";
    case ErrorKind::ExponentOverflow: return "ExponentOverflow";
    case ErrorKind::NotIsometricOnSupport: return "NotIsometricOnSupport";
    case ErrorKind::BadPartition: return "BadPartition";
    case ErrorKind::ZeroState: return "ZeroState";
    case ErrorKind::BadRegion: return "BadRegion";
    case ErrorKind::NotACocycle: return "NotACocycle";
    case ErrorKind::DegenerateSample: return "DegenerateSample";
    case ErrorKind::EmptyWindow: return "EmptyWindow";
    case ErrorKind::ConeMismatch: return "ConeMismatch";
    case ErrorKind::RepMismatch: return "RepMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace coneflow

#endif  // CONEFLOW_ERROR_HPP

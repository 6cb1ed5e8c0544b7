#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tipgan {

/// Failure categories surfaced by the library. The CLI maps every kind except
/// `Usage` to exit code 1 and prints the kind name in its error record.
enum class ErrorKind {
  DegenerateState,
  StateBlowUp,
  OutOfBounds,
  InvalidArgument,
  ShapeMismatch,
  ClassCountMismatch,
  LabelDomain,
  NonFiniteLoss,
  OracleFailure,
  EmptyInput,
  LengthMismatch,
  NonMonotoneLabel,
  MissingArtifact,
  HashMismatch,
  CalibrationFailed,
  Parse,
  Io,
  Usage,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateState: return "DegenerateState";
    case ErrorKind::StateBlowUp: return "StateBlowUp";
    case ErrorKind::OutOfBounds: return "OutOfBounds";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::ClassCountMismatch: return "ClassCountMismatch";
    case ErrorKind::LabelDomain: return "LabelDomain";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::OracleFailure: return "OracleFailure";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NonMonotoneLabel: return "NonMonotoneLabel";
    case ErrorKind::MissingArtifact: return "MissingArtifact";
    case ErrorKind::HashMismatch: return "HashMismatch";
    case ErrorKind::CalibrationFailed: return "CalibrationFailed";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Usage: return "Usage";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace tipgan

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hairforge {

enum class ErrorCode {
  InvalidArgument,
  InvalidHairstyle,
  EmptySelection,
  NonFiniteInput,
  NumericalBlowup,
  NonUnitDirection,
  NonRigidTransform,
  EmptyGrab,
  StaleHandle,
  EmptyText,
  ProviderUnavailable,
  DuplicateId,
  ProviderMismatch,
  DimensionMismatch,
  BadThresholds,
  EmptyImage,
  DegenerateCamera,
  AllEmpty,
  ServiceUnavailable,
  Timeout,
  MalformedResponse,
  BadMagic,
  TruncatedFile,
  VersionUnsupported,
  IoError,
  MalformedCommand,
  NotFound,
  InvalidState,
};

// Stable snake_case name, used in protocol error events and CLI output.
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hairforge

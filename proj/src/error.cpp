#include "hairforge/error.hpp"

namespace hairforge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::InvalidHairstyle: return "invalid_hairstyle";
    case ErrorCode::EmptySelection: return "empty_selection";
    case ErrorCode::NonFiniteInput: return "non_finite_input";
    case ErrorCode::NumericalBlowup: return "numerical_blowup";
    case ErrorCode::NonUnitDirection: return "non_unit_direction";
    case ErrorCode::NonRigidTransform: return "non_rigid_transform";
    case ErrorCode::EmptyGrab: return "empty_grab";
    case ErrorCode::StaleHandle: return "stale_handle";
    case ErrorCode::EmptyText: return "empty_text";
    case ErrorCode::ProviderUnavailable: return "provider_unavailable";
    case ErrorCode::DuplicateId: return "duplicate_id";
    case ErrorCode::ProviderMismatch: return "provider_mismatch";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::BadThresholds: return "bad_thresholds";
    case ErrorCode::EmptyImage: return "empty_image";
    case ErrorCode::DegenerateCamera: return "degenerate_camera";
    case ErrorCode::AllEmpty: return "all_empty";
    case ErrorCode::ServiceUnavailable: return "service_unavailable";
    case ErrorCode::Timeout: return "timeout";
    case ErrorCode::MalformedResponse: return "malformed_response";
    case ErrorCode::BadMagic: return "bad_magic";
    case ErrorCode::TruncatedFile: return "truncated_file";
    case ErrorCode::VersionUnsupported: return "version_unsupported";
    case ErrorCode::IoError: return "io_error";
    case ErrorCode::MalformedCommand: return "malformed_command";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::InvalidState: return "invalid_state";
  }
  return "unknown";
}

}  // namespace hairforge

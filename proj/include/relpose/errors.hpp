#pragma once

#include <stdexcept>
#include <string>

namespace relpose {

/// Every failure mode the library reports, grouped by the exit-code class
/// the CLI maps it to (see exit_code_for).
enum class ErrorCode {
  // input / file format (exit 2)
  invalid_argument,
  malformed_header,
  dimension_mismatch,
  checksum_failure,
  // empty inputs / no matches (exit 3)
  empty_mask,
  no_matches,
  all_invalid_depth,
  empty_supervision,
  no_covisible_points,
  // registration failure (exit 4)
  registration_failure,
  degenerate_configuration,
  // internal invariant violations and domain errors (exit 5)
  invalid_depth,
  out_of_bounds,
  behind_camera,
  box_too_large,
  zero_vector,
  empty_model,
  empty_render,
  out_of_frustum,
  invariant_violation,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::malformed_header: return "malformed-header";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::checksum_failure: return "checksum-failure";
    case ErrorCode::empty_mask: return "empty-mask";
    case ErrorCode::no_matches: return "no-matches";
    case ErrorCode::all_invalid_depth: return "all-invalid-depth";
    case ErrorCode::empty_supervision: return "empty-supervision";
    case ErrorCode::no_covisible_points: return "no-covisible-points";
    case ErrorCode::registration_failure: return "registration-failure";
    case ErrorCode::degenerate_configuration: return "degenerate-configuration";
    case ErrorCode::invalid_depth: return "invalid-depth";
    case ErrorCode::out_of_bounds: return "out-of-bounds";
    case ErrorCode::behind_camera: return "behind-camera";
    case ErrorCode::box_too_large: return "box-too-large";
    case ErrorCode::zero_vector: return "zero-vector";
    case ErrorCode::empty_model: return "empty-model";
    case ErrorCode::empty_render: return "empty-render";
    case ErrorCode::out_of_frustum: return "out-of-frustum";
    case ErrorCode::invariant_violation: return "invariant-violation";
  }
  return "unknown";
}

/// Process exit code for an error class: 0 success, 2 input-format error,
/// 3 empty-mask/no-matches, 4 registration failure, 5 internal violation.
inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::malformed_header:
    case ErrorCode::dimension_mismatch:
    case ErrorCode::checksum_failure:
      return 2;
    case ErrorCode::empty_mask:
    case ErrorCode::no_matches:
    case ErrorCode::all_invalid_depth:
    case ErrorCode::empty_supervision:
    case ErrorCode::no_covisible_points:
      return 3;
    case ErrorCode::registration_failure:
    case ErrorCode::degenerate_configuration:
      return 4;
    default:
      return 5;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace relpose

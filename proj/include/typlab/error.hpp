#pragma once

// SPDX-License-Identifier: Apache-2.0

#include <stdexcept>
#include <string>
#include <string_view>

namespace typlab {

enum class ErrorCode {
  // distributions
  EmptySupport,
  DuplicateId,
  NonFinite,
  NumericInconsistency,
  SupportMismatch,
  EmptyString,
  UnknownToken,
  // traces
  MalformedRecord,
  HeaderMissing,
  IndexGap,
  ChosenNotInSupport,
  SinkFailure,
  EmptyTrace,
  // sources / scoring
  MaxAttemptsExceeded,
  ZeroProbabilityPath,
  // oracle
  CapExceeded,
  UnsupportedModel,
  EmptyLanguageAtLengthN,
  BoundViolated,
  // parameters and configuration
  InvalidArgument,
  ConfigError,
  InputNotFound,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library. `code()` is stable and is what the
/// CLI maps to exit codes; `what()` is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace typlab

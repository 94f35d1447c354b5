// SPDX-License-Identifier: Apache-2.0

#include "typlab/error.hpp"

namespace typlab {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptySupport: return "EmptySupport";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NumericInconsistency: return "NumericInconsistency";
    case ErrorCode::SupportMismatch: return "SupportMismatch";
    case ErrorCode::EmptyString: return "EmptyString";
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::HeaderMissing: return "HeaderMissing";
    case ErrorCode::IndexGap: return "IndexGap";
    case ErrorCode::ChosenNotInSupport: return "ChosenNotInSupport";
    case ErrorCode::SinkFailure: return "SinkFailure";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::MaxAttemptsExceeded: return "MaxAttemptsExceeded";
    case ErrorCode::ZeroProbabilityPath: return "ZeroProbabilityPath";
    case ErrorCode::CapExceeded: return "CapExceeded";
    case ErrorCode::UnsupportedModel: return "UnsupportedModel";
    case ErrorCode::EmptyLanguageAtLengthN: return "EmptyLanguageAtLengthN";
    case ErrorCode::BoundViolated: return "BoundViolated";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InputNotFound: return "InputNotFound";
  }
  return "Unknown";
}

}  // namespace typlab

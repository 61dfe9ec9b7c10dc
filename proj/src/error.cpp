#include "mlwave/error.hpp"

namespace mlwave {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::BadGridDimensions: return "BadGridDimensions";
        case ErrorCode::InconsistentDimensions: return "InconsistentDimensions";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
        case ErrorCode::UnsupportedMode: return "UnsupportedMode";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::SvdFailure: return "SvdFailure";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::FormatError: return "FormatError";
        case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
        case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
        case ErrorCode::IncompleteGrid: return "IncompleteGrid";
        case ErrorCode::InsufficientSamples: return "InsufficientSamples";
        case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
        case ErrorCode::EmptyScan: return "EmptyScan";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

ErrorCategory category(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
            return ErrorCategory::Usage;
        case ErrorCode::DegenerateConfiguration:
        case ErrorCode::SvdFailure:
        case ErrorCode::NonFiniteObjective:
            return ErrorCategory::Numerical;
        default:
            return ErrorCategory::Data;
    }
}

}  // namespace mlwave

#pragma once

#include <stdexcept>
#include <string>

namespace mlwave {

enum class ErrorCode {
    BadGridDimensions,
    InconsistentDimensions,
    IndexOutOfRange,
    DegenerateConfiguration,
    UnsupportedMode,
    ShapeMismatch,
    SvdFailure,
    IoFailure,
    FormatError,
    FormatVersionMismatch,
    ChecksumMismatch,
    IncompleteGrid,
    InsufficientSamples,
    NonFiniteObjective,
    EmptyScan,
    InvalidArgument,
};

// How a failure is reported to a caller that has to pick an exit status.
enum class ErrorCategory { Usage, Data, Numerical };

const char* to_string(ErrorCode code);
ErrorCategory category(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace mlwave

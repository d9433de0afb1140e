#pragma once

#include <stdexcept>
#include <string>

namespace foleygram {

// Mirrors fg_status in the public C header; values must stay in sync.
enum class ErrorCode : int {
    InvalidArgument = 1,
    ZeroVector,
    DimensionMismatch,
    SingularGram,
    InvalidBatch,
    InvalidConfig,
    DivergenceDetected,
    TooShort,
    InvalidTarget,
    UnsupportedFormat,
    CorruptHeader,
    Io,
    StepOutOfRange,
    ShapeMismatch,
    InvalidSteps,
    DegenerateVariance,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string & what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string & what) {
    throw Error(code, what);
}

} // namespace foleygram

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace divkit {

enum class ErrorCode {
    // I/O
    MissingFile,
    IoFailure,
    // validation
    SchemaViolation,
    DuplicateId,
    UnsupportedVersion,
    InvariantViolation,
    EmptyText,
    SingleToken,
    TextTooShort,
    EmptyList,
    EmptyInput,
    EmptyCorpus,
    PositiveLogprob,
    MissingLogprobs,
    MissingEmbedding,
    MissingScore,
    MetricAbsent,
    UnknownMetric,
    InvalidArgument,
    TooFewRows,
    ZeroNormRow,
    DimMismatch,
    LengthMismatch,
    ZeroVariance,
    TooFewSamples,
    BothEmpty,
    InsufficientSamples,
    // internal
    Internal,
};

std::string_view to_string(ErrorCode code);

/// Coarse classification used for process exit codes: 1 I/O, 2 validation, 3 internal.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail);

    ErrorCode code() const noexcept { return code_; }
    /// Message without the leading error-code name.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& detail);

}  // namespace divkit

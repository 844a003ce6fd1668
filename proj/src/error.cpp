#include "divkit/error.hpp"

namespace divkit {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::EmptyText: return "EmptyText";
        case ErrorCode::SingleToken: return "SingleToken";
        case ErrorCode::TextTooShort: return "TextTooShort";
        case ErrorCode::EmptyList: return "EmptyList";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::PositiveLogprob: return "PositiveLogprob";
        case ErrorCode::MissingLogprobs: return "MissingLogprobs";
        case ErrorCode::MissingEmbedding: return "MissingEmbedding";
        case ErrorCode::MissingScore: return "MissingScore";
        case ErrorCode::MetricAbsent: return "MetricAbsent";
        case ErrorCode::UnknownMetric: return "UnknownMetric";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::TooFewRows: return "TooFewRows";
        case ErrorCode::ZeroNormRow: return "ZeroNormRow";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::ZeroVariance: return "ZeroVariance";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::BothEmpty: return "BothEmpty";
        case ErrorCode::InsufficientSamples: return "InsufficientSamples";
        case ErrorCode::Internal: return "Internal";
    }
    return "Unknown";
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingFile:
        case ErrorCode::IoFailure:
            return 1;
        case ErrorCode::Internal:
            return 3;
        default:
            return 2;
    }
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace divkit

#include "calibal/errors.hpp"

namespace calibal {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::UnlabeledInstance: return "UnlabeledInstance";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyTrainSet: return "EmptyTrainSet";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
    case ErrorCode::EmptyDigest: return "EmptyDigest";
    case ErrorCode::QOutOfRange: return "QOutOfRange";
    case ErrorCode::MissingClass: return "MissingClass";
    case ErrorCode::FixedModeUpdate: return "FixedModeUpdate";
    case ErrorCode::UnfittedMap: return "UnfittedMap";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::BinCountMismatch: return "BinCountMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::SettingMismatch: return "SettingMismatch";
    case ErrorCode::MissingClassExemplar: return "MissingClassExemplar";
    case ErrorCode::InsufficientSnapshots: return "InsufficientSnapshots";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

ErrorCategory category_of(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidSpec:
    case ErrorCode::InvalidConfig:
    case ErrorCode::SettingMismatch:
        return ErrorCategory::Config;
    default:
        return ErrorCategory::Data;
    }
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

} // namespace calibal

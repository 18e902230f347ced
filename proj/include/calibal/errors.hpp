#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace calibal {

enum class ErrorCode {
    ClassTooSmall,
    UnlabeledInstance,
    InvalidSpec,
    InvalidArgument,
    InvalidConfig,
    ParseError,
    DimensionMismatch,
    LabelOutOfRange,
    LengthMismatch,
    EmptyTrainSet,
    EmptyClass,
    NonFiniteValue,
    NonPositiveWeight,
    EmptyDigest,
    QOutOfRange,
    MissingClass,
    FixedModeUpdate,
    UnfittedMap,
    SingleClass,
    DegenerateLabels,
    EmptyInput,
    OutOfRange,
    BinCountMismatch,
    ZeroVariance,
    EmptyPool,
    SettingMismatch,
    MissingClassExemplar,
    InsufficientSnapshots,
    Io,
};

// Harness exit codes key off this split: config errors exit 1, data errors exit 2.
enum class ErrorCategory { Config, Data };

std::string_view to_string(ErrorCode code) noexcept;
ErrorCategory category_of(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail);

    ErrorCode code() const noexcept { return code_; }
    ErrorCategory category() const noexcept { return category_of(code_); }

private:
    ErrorCode code_;
};

} // namespace calibal

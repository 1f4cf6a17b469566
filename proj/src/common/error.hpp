#pragma once

#include <stdexcept>
#include <string>

namespace ipseg {

// Keep in sync with ipseg_status in include/ipseg/ipseg.h (values are shared).
enum class ErrorCode : int {
    InvalidArgument = 1,
    IoFailure = 2,
    BadMagic = 3,
    UnsupportedDatatype = 4,
    DimUnsupported = 5,
    Truncated = 6,
    NonFiniteData = 7,
    InvalidLabel = 8,
    AxisOutOfRange = 9,
    AmbiguousOrientation = 10,
    ShapeMismatch = 11,
    NonIntegralOutput = 12,
    WindowTooLarge = 13,
    DegenerateBatch = 14,
    NotScalarLoss = 15,
    ConfigInvalid = 16,
    IndivisibleInput = 17,
    EmptyClassSet = 18,
    BadHyperparameters = 19,
    SpecInvalid = 20,
    PairMissing = 21,
    DimsMismatch = 22,
    NonFiniteLoss = 23,
    EmptyDataset = 24,
    ConfigMismatch = 25,
    VersionUnsupported = 26,
    Corrupt = 27,
    DuplicatePipeline = 28,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace ipseg

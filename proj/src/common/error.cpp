#include "common/error.hpp"

namespace ipseg {

const char* error_code_name(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::DimUnsupported: return "DimUnsupported";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::NonFiniteData: return "NonFiniteData";
    case ErrorCode::InvalidLabel: return "InvalidLabel";
    case ErrorCode::AxisOutOfRange: return "AxisOutOfRange";
    case ErrorCode::AmbiguousOrientation: return "AmbiguousOrientation";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonIntegralOutput: return "NonIntegralOutput";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::DegenerateBatch: return "DegenerateBatch";
    case ErrorCode::NotScalarLoss: return "NotScalarLoss";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IndivisibleInput: return "IndivisibleInput";
    case ErrorCode::EmptyClassSet: return "EmptyClassSet";
    case ErrorCode::BadHyperparameters: return "BadHyperparameters";
    case ErrorCode::SpecInvalid: return "SpecInvalid";
    case ErrorCode::PairMissing: return "PairMissing";
    case ErrorCode::DimsMismatch: return "DimsMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::Corrupt: return "Corrupt";
    case ErrorCode::DuplicatePipeline: return "DuplicatePipeline";
    }
    return "Unknown";
}

}  // namespace ipseg

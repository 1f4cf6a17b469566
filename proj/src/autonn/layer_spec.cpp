#include "autonn/layer_spec.hpp"

#include "common/error.hpp"

namespace ipseg::nn {

const char* kind_name(LayerKind kind)
{
    switch (kind) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Conv3d: return "conv3d";
    case LayerKind::MaxPool2d: return "maxpool2d";
    case LayerKind::MaxPool3d: return "maxpool3d";
    case LayerKind::Deconv2d: return "deconv2d";
    case LayerKind::Deconv3d: return "deconv3d";
    case LayerKind::Concat: return "concat";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::LeakyRelu: return "leakyrelu";
    case LayerKind::Softmax: return "softmax";
    }
    return "unknown";
}

bool is_3d(LayerKind kind) { return kind == LayerKind::Conv3d || kind == LayerKind::MaxPool3d || kind == LayerKind::Deconv3d; }

int LayerSpec::spatial_rank() const
{
    switch (kind) {
    case LayerKind::Conv2d:
    case LayerKind::MaxPool2d:
    case LayerKind::Deconv2d: return 2;
    case LayerKind::Conv3d:
    case LayerKind::MaxPool3d:
    case LayerKind::Deconv3d: return 3;
    default: return 0;
    }
}

void LayerSpec::validate() const
{
    auto fail = [this](const std::string& why) { throw Error(ErrorCode::ConfigInvalid, std::string(kind_name(kind)) + ": " + why); };
    switch (kind) {
    case LayerKind::Conv2d:
    case LayerKind::Conv3d:
    case LayerKind::Deconv2d:
    case LayerKind::Deconv3d:
        if (in_channels < 1 || out_channels < 1)
            fail("channel counts must be >= 1");
        if (kernel < 1 || stride < 1 || padding < 0)
            fail("need kernel >= 1, stride >= 1, padding >= 0");
        if (output_padding < 0 || (output_padding > 0 && output_padding >= stride))
            fail("output_padding must be in [0, stride)");
        break;
    case LayerKind::MaxPool2d:
    case LayerKind::MaxPool3d:
        if (kernel < 1 || stride < 1)
            fail("need window >= 1, stride >= 1");
        break;
    case LayerKind::BatchNorm:
        if (in_channels < 1)
            fail("channel count must be >= 1");
        if (!(epsilon > 0.0))
            fail("epsilon must be > 0");
        if (!(momentum >= 0.0 && momentum <= 1.0))
            fail("momentum must be in [0, 1]");
        break;
    case LayerKind::LeakyRelu:
        if (!(slope >= 0.0 && slope < 1.0))
            fail("slope must be in [0, 1)");
        break;
    case LayerKind::Concat:
    case LayerKind::Softmax: break;
    }
}

Shape LayerSpec::output_shape(const Shape& input, std::int64_t skip_channels) const
{
    const int r = spatial_rank();
    if (r != 0 && input.size() != static_cast<std::size_t>(r + 2))
        throw Error(ErrorCode::ShapeMismatch, std::string(kind_name(kind)) + ": input " + shape_string(input) + " has the wrong rank");
    if (input.size() < 2)
        throw Error(ErrorCode::ShapeMismatch, std::string(kind_name(kind)) + ": input needs (N, C, ...)");
    Shape out = input;
    switch (kind) {
    case LayerKind::Conv2d:
    case LayerKind::Conv3d:
        if (input[1] != in_channels)
            throw Error(ErrorCode::ShapeMismatch, "conv: channel mismatch for input " + shape_string(input));
        out[1] = out_channels;
        for (std::size_t i = 2; i < out.size(); ++i) {
            const std::int64_t span = input[i] + 2 * padding - kernel;
            if (span < 0 || span % stride != 0)
                throw Error(ErrorCode::NonIntegralOutput, "conv: non-integral output for input " + shape_string(input));
            out[i] = span / stride + 1;
        }
        break;
    case LayerKind::Deconv2d:
    case LayerKind::Deconv3d:
        if (input[1] != in_channels)
            throw Error(ErrorCode::ShapeMismatch, "deconv: channel mismatch for input " + shape_string(input));
        out[1] = out_channels;
        for (std::size_t i = 2; i < out.size(); ++i)
            out[i] = (input[i] - 1) * stride - 2 * padding + kernel + output_padding;
        break;
    case LayerKind::MaxPool2d:
    case LayerKind::MaxPool3d:
        for (std::size_t i = 2; i < out.size(); ++i) {
            if (kernel > input[i])
                throw Error(ErrorCode::WindowTooLarge, "maxpool: window exceeds input " + shape_string(input));
            out[i] = (input[i] - kernel) / stride + 1;
        }
        break;
    case LayerKind::Concat: out[1] = input[1] + skip_channels; break;
    case LayerKind::BatchNorm:
        if (input[1] != in_channels)
            throw Error(ErrorCode::ShapeMismatch, "batchnorm: channel mismatch for input " + shape_string(input));
        break;
    case LayerKind::LeakyRelu:
    case LayerKind::Softmax: break;
    }
    return out;
}

std::int64_t LayerSpec::param_count() const
{
    switch (kind) {
    case LayerKind::Conv2d:
    case LayerKind::Deconv2d: return in_channels * out_channels * kernel * kernel + (bias ? out_channels : 0);
    case LayerKind::Conv3d:
    case LayerKind::Deconv3d: return in_channels * out_channels * kernel * kernel * kernel + (bias ? out_channels : 0);
    case LayerKind::BatchNorm: return 2 * in_channels;
    default: return 0;
    }
}

}  // namespace ipseg::nn

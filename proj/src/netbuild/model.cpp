#include "netbuild/model.hpp"

#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace ipseg::net {

using nn::LayerKind;
using nn::Tensor;

namespace {

bool is_conv(LayerKind k)
{
    return k == LayerKind::Conv2d || k == LayerKind::Conv3d || k == LayerKind::Deconv2d || k == LayerKind::Deconv3d;
}

bool is_deconv(LayerKind k) { return k == LayerKind::Deconv2d || k == LayerKind::Deconv3d; }

}  // namespace

template <class T>
Model<T>::Model(Network net, std::uint64_t seed) : net_(std::move(net))
{
    Rng rng(seed);
    slots_.resize(net_.layers().size());
    for (std::size_t i = 0; i < net_.layers().size(); ++i) {
        const auto& spec = net_.layers()[i].spec;
        Slot& s = slots_[i];
        if (is_conv(spec.kind)) {
            const int r = spec.spatial_rank();
            nn::Shape shape = is_deconv(spec.kind) ? nn::Shape{spec.in_channels, spec.out_channels}
                                                   : nn::Shape{spec.out_channels, spec.in_channels};
            std::int64_t taps = 1;
            for (int d = 0; d < r; ++d) {
                shape.push_back(spec.kernel);
                taps *= spec.kernel;
            }
            const double std_dev = std::sqrt(2.0 / static_cast<double>(spec.in_channels * taps));
            std::vector<T> w(static_cast<std::size_t>(nn::numel(shape)));
            for (auto& v : w)
                v = static_cast<T>(rng.normal() * std_dev);
            s.weight = Tensor<T>::from(shape, w, true);
            params_.push_back(s.weight);
            if (spec.bias) {
                s.bias = Tensor<T>::zeros({spec.out_channels}, true);
                params_.push_back(s.bias);
            }
        } else if (spec.kind == LayerKind::BatchNorm) {
            s.weight = Tensor<T>::full({spec.in_channels}, T(1), true);
            s.bias = Tensor<T>::zeros({spec.in_channels}, true);
            s.stats = nn::BatchNormStats<T>::create(spec.in_channels);
            params_.push_back(s.weight);
            params_.push_back(s.bias);
        }
    }
}

template <class T>
Tensor<T> Model<T>::forward(const Tensor<T>& x, bool training)
{
    const auto& layers = net_.layers();
    const std::int64_t in_ch = net_.config().in_channels;
    const std::size_t rank = static_cast<std::size_t>(net_.config().spatial_rank()) + 2;
    if (x.rank() != rank || x.dim(1) != in_ch)
        throw Error(ErrorCode::ShapeMismatch, "model input " + nn::shape_string(x.shape()) + " does not match network");
    const std::int64_t div = std::int64_t{1} << net_.config().depth;
    for (std::size_t d = 2; d < rank; ++d)
        if (x.dim(d) % div != 0)
            throw Error(ErrorCode::IndivisibleInput, "spatial extent " + std::to_string(x.dim(d)) + " not divisible by " + std::to_string(div));

    std::vector<Tensor<T>> skips(static_cast<std::size_t>(net_.config().depth));
    Tensor<T> h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& layer = layers[i];
        const auto& spec = layer.spec;
        Slot& s = slots_[i];
        if (layer.saves_skip >= 0)
            skips[static_cast<std::size_t>(layer.saves_skip)] = h;
        switch (spec.kind) {
        case LayerKind::Conv2d: h = nn::conv2d(h, s.weight, s.bias, spec.stride, spec.padding); break;
        case LayerKind::Conv3d: h = nn::conv3d(h, s.weight, s.bias, spec.stride, spec.padding); break;
        case LayerKind::Deconv2d: h = nn::deconv2d(h, s.weight, s.bias, spec.stride, spec.padding, spec.output_padding); break;
        case LayerKind::Deconv3d: h = nn::deconv3d(h, s.weight, s.bias, spec.stride, spec.padding, spec.output_padding); break;
        case LayerKind::MaxPool2d: h = nn::maxpool2d(h, spec.kernel, spec.stride); break;
        case LayerKind::MaxPool3d: h = nn::maxpool3d(h, spec.kernel, spec.stride); break;
        case LayerKind::BatchNorm: h = nn::batchnorm(h, s.weight, s.bias, s.stats, training, spec.momentum, spec.epsilon); break;
        case LayerKind::LeakyRelu: h = nn::leaky_relu(h, spec.slope); break;
        case LayerKind::Softmax: h = nn::softmax_channels(h); break;
        case LayerKind::Concat:
            h = nn::concat_channels(h, skips[static_cast<std::size_t>(layer.concat_skip)]);
            skips[static_cast<std::size_t>(layer.concat_skip)] = Tensor<T>();
            break;
        }
    }
    return h;
}

template <class T>
std::vector<NamedTensor<T>> Model<T>::state()
{
    std::vector<NamedTensor<T>> out;
    const auto& layers = net_.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& spec = layers[i].spec;
        const Slot& s = slots_[i];
        if (is_conv(spec.kind)) {
            out.push_back({layers[i].name + ".weight", s.weight, true});
            if (s.bias.defined())
                out.push_back({layers[i].name + ".bias", s.bias, true});
        } else if (spec.kind == LayerKind::BatchNorm) {
            out.push_back({layers[i].name + ".gamma", s.weight, true});
            out.push_back({layers[i].name + ".beta", s.bias, true});
        }
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].spec.kind != LayerKind::BatchNorm)
            continue;
        out.push_back({layers[i].name + ".running_mean", slots_[i].stats.running_mean, false});
        out.push_back({layers[i].name + ".running_var", slots_[i].stats.running_var, false});
    }
    return out;
}

template <class T>
std::int64_t Model<T>::parameter_count() const
{
    std::int64_t n = 0;
    for (const auto& p : params_)
        n += static_cast<std::int64_t>(p.numel());
    return n;
}

template class Model<float>;
template class Model<double>;

}  // namespace ipseg::net

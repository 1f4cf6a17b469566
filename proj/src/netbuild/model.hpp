#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "autonn/ops.hpp"
#include "netbuild/network.hpp"

namespace ipseg::net {

template <class T>
struct NamedTensor {
    std::string name;
    nn::Tensor<T> tensor;
    bool trainable = true;
};

/// Parameters and batchnorm buffers for a Network, plus the forward pass.
template <class T>
class Model {
public:
    // He-normal weights drawn in layer order from `seed`; biases and betas 0, gammas 1.
    Model(Network net, std::uint64_t seed);

    const Network& network() const { return net_; }

    // (N, C, H, W) or (N, C, D, H, W) in; per-pixel class probabilities out.
    nn::Tensor<T> forward(const nn::Tensor<T>& x, bool training);

    std::vector<nn::Tensor<T>>& parameters() { return params_; }
    // Parameters followed by batchnorm running statistics, in a fixed order.
    std::vector<NamedTensor<T>> state();

    std::int64_t parameter_count() const;

private:
    struct Slot {
        nn::Tensor<T> weight;  // conv/deconv weight or bn gamma
        nn::Tensor<T> bias;    // conv/deconv bias or bn beta
        nn::BatchNormStats<T> stats;
    };

    Network net_;
    std::vector<Slot> slots_;
    std::vector<nn::Tensor<T>> params_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace ipseg::net

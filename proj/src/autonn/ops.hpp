#pragma once

#include "autonn/tensor.hpp"

// Differentiable primitives. Layout is (N, C, H, W) for 2D ops and
// (N, C, D, H, W) for 3D ops. Bias arguments may be undefined tensors.
namespace ipseg::nn {

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::int64_t stride = 1, std::int64_t padding = 0);
template <class T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::int64_t stride = 1, std::int64_t padding = 0);

// Transposed convolution, weights (Cin, Cout, k, k[, k]). Output extent is
// (in - 1) * stride - 2 * padding + k + output_padding; the defaults double it for k = 3.
template <class T>
Tensor<T> deconv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::int64_t stride = 2, std::int64_t padding = 1,
                   std::int64_t output_padding = 1);
template <class T>
Tensor<T> deconv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::int64_t stride = 2, std::int64_t padding = 1,
                   std::int64_t output_padding = 1);

// Floor-mode pooling; gradient goes to the first maximal element in scan order.
template <class T>
Tensor<T> maxpool2d(const Tensor<T>& x, std::int64_t window = 2, std::int64_t stride = 2);
template <class T>
Tensor<T> maxpool3d(const Tensor<T>& x, std::int64_t window = 2, std::int64_t stride = 2);

template <class T>
struct BatchNormStats {
    Tensor<T> running_mean;
    Tensor<T> running_var;

    static BatchNormStats create(std::int64_t channels)
    {
        return {Tensor<T>::zeros({channels}), Tensor<T>::full({channels}, T(1))};
    }
};

// Per-channel normalisation over batch and spatial positions. Training mode
// uses batch statistics and updates `stats` (unbiased variance); eval mode
// normalises with `stats`.
template <class T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormStats<T>& stats, bool training,
                    double momentum = 0.1, double epsilon = 1e-5);

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, double slope = 0.01);

template <class T>
Tensor<T> softmax_channels(const Tensor<T>& x);

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> scale(const Tensor<T>& a, double s);
template <class T>
Tensor<T> sum(const Tensor<T>& a);

}  // namespace ipseg::nn

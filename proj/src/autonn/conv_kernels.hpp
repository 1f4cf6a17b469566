#pragma once

#include <array>
#include <cstdint>

namespace ipseg::nn::kernels {

using Ext3 = std::array<std::int64_t, 3>;

// Geometry of one cross-correlation in (D, H, W); 2D convolutions use D = 1,
// kernel depth 1, zero depth padding.
struct ConvGeometry {
    std::int64_t cin = 0;
    std::int64_t cout = 0;
    Ext3 in{1, 1, 1};
    Ext3 kernel{1, 1, 1};
    Ext3 stride{1, 1, 1};
    Ext3 pad{0, 0, 0};
    Ext3 out{1, 1, 1};

    std::int64_t in_size() const { return in[0] * in[1] * in[2]; }
    std::int64_t out_size() const { return out[0] * out[1] * out[2]; }
    std::int64_t kernel_size() const { return kernel[0] * kernel[1] * kernel[2]; }
    std::int64_t patch_size() const { return cin * kernel_size(); }
};

// Floor-mode output extents from in/kernel/stride/pad.
Ext3 conv_output_extent(const Ext3& in, const Ext3& kernel, const Ext3& stride, const Ext3& pad);

// All three operate on one sample and accumulate into their output.
//   y[cout, out]  += W[cout, cin, k] (*) x[cin, in]
template <class T>
void conv_forward(const ConvGeometry& g, const T* x, const T* w, T* y);
//   dx[cin, in]   += adjoint of the above applied to dy
template <class T>
void conv_backward_data(const ConvGeometry& g, const T* dy, const T* w, T* dx);
//   dw[cout, cin, k] += sum over positions of dy * x
template <class T>
void conv_backward_weight(const ConvGeometry& g, const T* x, const T* dy, T* dw);

}  // namespace ipseg::nn::kernels

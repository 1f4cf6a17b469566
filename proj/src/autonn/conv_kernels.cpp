#include "autonn/conv_kernels.hpp"

#include <algorithm>
#include <vector>

#include "common/memtrack.hpp"
#include "common/parallel.hpp"

namespace ipseg::nn::kernels {
namespace {

// Output positions handled per im2col tile: keeps the column buffer near L2 size.
std::int64_t tile_size(const ConvGeometry& g)
{
    constexpr std::int64_t kBudget = 1 << 16;
    std::int64_t t = std::max<std::int64_t>(32, kBudget / std::max<std::int64_t>(1, g.patch_size()));
    if (t > 16)
        t -= t % 16;
    return std::min(t, g.out_size());
}

struct TileCoords {
    std::vector<std::int64_t> z, y, x;  // top-left-front input coordinate of each output position

    void fill(const ConvGeometry& g, std::int64_t p0, std::int64_t t)
    {
        z.resize(static_cast<std::size_t>(t));
        y.resize(static_cast<std::size_t>(t));
        x.resize(static_cast<std::size_t>(t));
        const std::int64_t hw = g.out[1] * g.out[2];
        for (std::int64_t j = 0; j < t; ++j) {
            const std::int64_t p = p0 + j;
            const std::int64_t oz = p / hw;
            const std::int64_t oy = (p % hw) / g.out[2];
            const std::int64_t ox = p % g.out[2];
            z[static_cast<std::size_t>(j)] = oz * g.stride[0] - g.pad[0];
            y[static_cast<std::size_t>(j)] = oy * g.stride[1] - g.pad[1];
            x[static_cast<std::size_t>(j)] = ox * g.stride[2] - g.pad[2];
        }
    }
};

template <class T, class Visit>
void for_each_patch_row(const ConvGeometry& g, Visit visit)
{
    std::int64_t r = 0;
    for (std::int64_t ci = 0; ci < g.cin; ++ci)
        for (std::int64_t kz = 0; kz < g.kernel[0]; ++kz)
            for (std::int64_t ky = 0; ky < g.kernel[1]; ++ky)
                for (std::int64_t kx = 0; kx < g.kernel[2]; ++kx)
                    visit(r++, ci, kz, ky, kx);
}

template <class T>
void im2col(const ConvGeometry& g, const TileCoords& tc, std::int64_t t, const T* x, T* col)
{
    for_each_patch_row<T>(g, [&](std::int64_t r, std::int64_t ci, std::int64_t kz, std::int64_t ky, std::int64_t kx) {
        const T* src = x + ci * g.in_size();
        T* dst = col + r * t;
        for (std::int64_t j = 0; j < t; ++j) {
            const std::int64_t iz = tc.z[static_cast<std::size_t>(j)] + kz;
            const std::int64_t iy = tc.y[static_cast<std::size_t>(j)] + ky;
            const std::int64_t ix = tc.x[static_cast<std::size_t>(j)] + kx;
            const bool inside = iz >= 0 && iz < g.in[0] && iy >= 0 && iy < g.in[1] && ix >= 0 && ix < g.in[2];
            dst[j] = inside ? src[(iz * g.in[1] + iy) * g.in[2] + ix] : T(0);
        }
    });
}

template <class T>
void col2im_add(const ConvGeometry& g, const TileCoords& tc, std::int64_t t, const T* col, T* dx)
{
    for_each_patch_row<T>(g, [&](std::int64_t r, std::int64_t ci, std::int64_t kz, std::int64_t ky, std::int64_t kx) {
        T* dst = dx + ci * g.in_size();
        const T* src = col + r * t;
        for (std::int64_t j = 0; j < t; ++j) {
            const std::int64_t iz = tc.z[static_cast<std::size_t>(j)] + kz;
            const std::int64_t iy = tc.y[static_cast<std::size_t>(j)] + ky;
            const std::int64_t ix = tc.x[static_cast<std::size_t>(j)] + kx;
            if (iz >= 0 && iz < g.in[0] && iy >= 0 && iy < g.in[1] && ix >= 0 && ix < g.in[2])
                dst[(iz * g.in[1] + iy) * g.in[2] + ix] += src[j];
        }
    });
}

// Fixed-lane dot product: the summation order depends only on n.
template <class T>
T dot(const T* a, const T* b, std::int64_t n)
{
    constexpr int kLanes = 16;
    T acc[kLanes] = {};
    std::int64_t j = 0;
    for (; j + kLanes <= n; j += kLanes)
        for (int l = 0; l < kLanes; ++l)
            acc[l] += a[j + l] * b[j + l];
    for (int l = 0; j < n; ++j, ++l)
        acc[l] += a[j] * b[j];
    T s = T(0);
    for (int l = 0; l < kLanes; ++l)
        s += acc[l];
    return s;
}

}  // namespace

Ext3 conv_output_extent(const Ext3& in, const Ext3& kernel, const Ext3& stride, const Ext3& pad)
{
    Ext3 out{};
    for (std::size_t i = 0; i < 3; ++i)
        out[i] = (in[i] + 2 * pad[i] - kernel[i]) / stride[i] + 1;
    return out;
}

template <class T>
void conv_forward(const ConvGeometry& g, const T* x, const T* w, T* y)
{
    const std::int64_t K = g.patch_size();
    const std::int64_t P = g.out_size();
    const std::int64_t tmax = tile_size(g);
    mem::TrackedVector<T> col(static_cast<std::size_t>(K * tmax));
    TileCoords tc;
    for (std::int64_t p0 = 0; p0 < P; p0 += tmax) {
        const std::int64_t t = std::min(tmax, P - p0);
        tc.fill(g, p0, t);
        im2col(g, tc, t, x, col.data());
        parallel_for(0, static_cast<std::size_t>((g.cout + 3) / 4), 4, [&](std::size_t lo, std::size_t hi) {
            for (std::int64_t b = static_cast<std::int64_t>(lo); b < static_cast<std::int64_t>(hi); ++b) {
                const std::int64_t c0 = b * 4;
                const std::int64_t nc = std::min<std::int64_t>(4, g.cout - c0);
                if (nc == 4) {
                    T* y0 = y + (c0 + 0) * P + p0;
                    T* y1 = y + (c0 + 1) * P + p0;
                    T* y2 = y + (c0 + 2) * P + p0;
                    T* y3 = y + (c0 + 3) * P + p0;
                    for (std::int64_t k = 0; k < K; ++k) {
                        const T a0 = w[(c0 + 0) * K + k], a1 = w[(c0 + 1) * K + k];
                        const T a2 = w[(c0 + 2) * K + k], a3 = w[(c0 + 3) * K + k];
                        const T* c = col.data() + k * t;
                        for (std::int64_t j = 0; j < t; ++j) {
                            const T v = c[j];
                            y0[j] += a0 * v;
                            y1[j] += a1 * v;
                            y2[j] += a2 * v;
                            y3[j] += a3 * v;
                        }
                    }
                } else {
                    for (std::int64_t co = c0; co < c0 + nc; ++co) {
                        T* yr = y + co * P + p0;
                        for (std::int64_t k = 0; k < K; ++k) {
                            const T a = w[co * K + k];
                            const T* c = col.data() + k * t;
                            for (std::int64_t j = 0; j < t; ++j)
                                yr[j] += a * c[j];
                        }
                    }
                }
            }
        });
    }
}

template <class T>
void conv_backward_data(const ConvGeometry& g, const T* dy, const T* w, T* dx)
{
    const std::int64_t K = g.patch_size();
    const std::int64_t P = g.out_size();
    const std::int64_t tmax = tile_size(g);
    mem::TrackedVector<T> dcol(static_cast<std::size_t>(K * tmax));
    TileCoords tc;
    for (std::int64_t p0 = 0; p0 < P; p0 += tmax) {
        const std::int64_t t = std::min(tmax, P - p0);
        tc.fill(g, p0, t);
        parallel_for(0, static_cast<std::size_t>((K + 3) / 4), 4, [&](std::size_t lo, std::size_t hi) {
            for (std::int64_t b = static_cast<std::int64_t>(lo); b < static_cast<std::int64_t>(hi); ++b) {
                const std::int64_t k0 = b * 4;
                const std::int64_t nk = std::min<std::int64_t>(4, K - k0);
                std::fill(dcol.data() + k0 * t, dcol.data() + (k0 + nk) * t, T(0));
                if (nk == 4) {
                    T* d0 = dcol.data() + (k0 + 0) * t;
                    T* d1 = dcol.data() + (k0 + 1) * t;
                    T* d2 = dcol.data() + (k0 + 2) * t;
                    T* d3 = dcol.data() + (k0 + 3) * t;
                    for (std::int64_t co = 0; co < g.cout; ++co) {
                        const T* wr = w + co * K + k0;
                        const T a0 = wr[0], a1 = wr[1], a2 = wr[2], a3 = wr[3];
                        const T* dyr = dy + co * P + p0;
                        for (std::int64_t j = 0; j < t; ++j) {
                            const T v = dyr[j];
                            d0[j] += a0 * v;
                            d1[j] += a1 * v;
                            d2[j] += a2 * v;
                            d3[j] += a3 * v;
                        }
                    }
                } else {
                    for (std::int64_t k = k0; k < k0 + nk; ++k) {
                        T* d = dcol.data() + k * t;
                        for (std::int64_t co = 0; co < g.cout; ++co) {
                            const T a = w[co * K + k];
                            const T* dyr = dy + co * P + p0;
                            for (std::int64_t j = 0; j < t; ++j)
                                d[j] += a * dyr[j];
                        }
                    }
                }
            }
        });
        col2im_add(g, tc, t, dcol.data(), dx);
    }
}

template <class T>
void conv_backward_weight(const ConvGeometry& g, const T* x, const T* dy, T* dw)
{
    const std::int64_t K = g.patch_size();
    const std::int64_t P = g.out_size();
    const std::int64_t tmax = tile_size(g);
    mem::TrackedVector<T> col(static_cast<std::size_t>(K * tmax));
    TileCoords tc;
    for (std::int64_t p0 = 0; p0 < P; p0 += tmax) {
        const std::int64_t t = std::min(tmax, P - p0);
        tc.fill(g, p0, t);
        im2col(g, tc, t, x, col.data());
        parallel_for(0, static_cast<std::size_t>(g.cout), 2, [&](std::size_t lo, std::size_t hi) {
            for (std::int64_t co = static_cast<std::int64_t>(lo); co < static_cast<std::int64_t>(hi); ++co) {
                const T* dyr = dy + co * P + p0;
                T* dwr = dw + co * K;
                for (std::int64_t k = 0; k < K; ++k)
                    dwr[k] += dot(dyr, col.data() + k * t, t);
            }
        });
    }
}

template void conv_forward<float>(const ConvGeometry&, const float*, const float*, float*);
template void conv_forward<double>(const ConvGeometry&, const double*, const double*, double*);
template void conv_backward_data<float>(const ConvGeometry&, const float*, const float*, float*);
template void conv_backward_data<double>(const ConvGeometry&, const double*, const double*, double*);
template void conv_backward_weight<float>(const ConvGeometry&, const float*, const float*, float*);
template void conv_backward_weight<double>(const ConvGeometry&, const double*, const double*, double*);

}  // namespace ipseg::nn::kernels

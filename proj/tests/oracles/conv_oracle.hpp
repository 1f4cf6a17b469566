#pragma once

// Direct-definition convolution references in double precision.

#include <cstdint>
#include <vector>

namespace oracle {

struct Grid {
    std::vector<std::int64_t> shape;  // N, C, spatial...
    std::vector<double> v;

    std::int64_t spatial_size() const
    {
        std::int64_t s = 1;
        for (std::size_t i = 2; i < shape.size(); ++i)
            s *= shape[i];
        return s;
    }
};

// Cross-correlation with zero padding. w is (Cout, Cin, k...) flattened, b has Cout entries or is empty.
// Handles 2 or 3 spatial dims by treating 2D as depth 1.
inline Grid conv(const Grid& x, const std::vector<double>& w, const std::vector<double>& b, std::int64_t cout, std::int64_t k, std::int64_t s,
                 std::int64_t p)
{
    const bool three = x.shape.size() == 5;
    const std::int64_t N = x.shape[0], C = x.shape[1];
    const std::int64_t D = three ? x.shape[2] : 1, H = x.shape[three ? 3 : 2], W = x.shape[three ? 4 : 3];
    const std::int64_t kd = three ? k : 1, pd = three ? p : 0, sd = three ? s : 1;
    const std::int64_t OD = (D + 2 * pd - kd) / sd + 1, OH = (H + 2 * p - k) / s + 1, OW = (W + 2 * p - k) / s + 1;
    Grid y;
    y.shape = three ? std::vector<std::int64_t>{N, cout, OD, OH, OW} : std::vector<std::int64_t>{N, cout, OH, OW};
    y.v.assign(static_cast<std::size_t>(N * cout * OD * OH * OW), 0.0);
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t o = 0; o < cout; ++o)
            for (std::int64_t od = 0; od < OD; ++od)
                for (std::int64_t oh = 0; oh < OH; ++oh)
                    for (std::int64_t ow = 0; ow < OW; ++ow) {
                        double acc = b.empty() ? 0.0 : b[static_cast<std::size_t>(o)];
                        for (std::int64_t c = 0; c < C; ++c)
                            for (std::int64_t a = 0; a < kd; ++a)
                                for (std::int64_t i = 0; i < k; ++i)
                                    for (std::int64_t j = 0; j < k; ++j) {
                                        const std::int64_t zd = od * sd - pd + a, zh = oh * s - p + i, zw = ow * s - p + j;
                                        if (zd < 0 || zd >= D || zh < 0 || zh >= H || zw < 0 || zw >= W)
                                            continue;
                                        const double xv = x.v[static_cast<std::size_t>((((n * C + c) * D + zd) * H + zh) * W + zw)];
                                        const double wv = w[static_cast<std::size_t>((((o * C + c) * kd + a) * k + i) * k + j)];
                                        acc += xv * wv;
                                    }
                        y.v[static_cast<std::size_t>((((n * cout + o) * OD + od) * OH + oh) * OW + ow)] = acc;
                    }
    return y;
}

// Transposed convolution as a scatter: every input element adds w * x into the
// output window it maps to. w is (Cin, Cout, k...).
inline Grid deconv(const Grid& x, const std::vector<double>& w, const std::vector<double>& b, std::int64_t cout, std::int64_t k, std::int64_t s,
                   std::int64_t p, std::int64_t op)
{
    const bool three = x.shape.size() == 5;
    const std::int64_t N = x.shape[0], C = x.shape[1];
    const std::int64_t D = three ? x.shape[2] : 1, H = x.shape[three ? 3 : 2], W = x.shape[three ? 4 : 3];
    const std::int64_t kd = three ? k : 1, pd = three ? p : 0, sd = three ? s : 1, opd = three ? op : 0;
    const std::int64_t OD = three ? (D - 1) * sd - 2 * pd + kd + opd : 1;
    const std::int64_t OH = (H - 1) * s - 2 * p + k + op, OW = (W - 1) * s - 2 * p + k + op;
    Grid y;
    y.shape = three ? std::vector<std::int64_t>{N, cout, OD, OH, OW} : std::vector<std::int64_t>{N, cout, OH, OW};
    y.v.assign(static_cast<std::size_t>(N * cout * OD * OH * OW), 0.0);
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t o = 0; o < cout; ++o)
            for (std::int64_t q = 0; q < OD * OH * OW; ++q)
                y.v[static_cast<std::size_t>((n * cout + o) * OD * OH * OW + q)] = b.empty() ? 0.0 : b[static_cast<std::size_t>(o)];
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t zd = 0; zd < D; ++zd)
                for (std::int64_t zh = 0; zh < H; ++zh)
                    for (std::int64_t zw = 0; zw < W; ++zw) {
                        const double xv = x.v[static_cast<std::size_t>((((n * C + c) * D + zd) * H + zh) * W + zw)];
                        for (std::int64_t o = 0; o < cout; ++o)
                            for (std::int64_t a = 0; a < kd; ++a)
                                for (std::int64_t i = 0; i < k; ++i)
                                    for (std::int64_t j = 0; j < k; ++j) {
                                        const std::int64_t od = zd * sd - pd + a, oh = zh * s - p + i, ow = zw * s - p + j;
                                        if (od < 0 || od >= OD || oh < 0 || oh >= OH || ow < 0 || ow >= OW)
                                            continue;
                                        y.v[static_cast<std::size_t>((((n * cout + o) * OD + od) * OH + oh) * OW + ow)] +=
                                            xv * w[static_cast<std::size_t>((((c * cout + o) * kd + a) * k + i) * k + j)];
                                    }
                    }
    return y;
}

}  // namespace oracle

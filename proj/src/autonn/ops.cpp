#include "autonn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "autonn/conv_kernels.hpp"
#include "common/error.hpp"

namespace ipseg::nn {
namespace {

using kernels::ConvGeometry;
using kernels::Ext3;

struct Layout {
    std::int64_t n = 0;
    std::int64_t c = 0;
    Ext3 spatial{1, 1, 1};
    std::int64_t plane() const { return spatial[0] * spatial[1] * spatial[2]; }
};

Layout layout_of(const Shape& s, std::size_t expected_rank, const char* op)
{
    if (s.size() != expected_rank)
        throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": expected rank " + std::to_string(expected_rank) + ", got " + shape_string(s));
    Layout l;
    l.n = s[0];
    l.c = s[1];
    if (expected_rank == 4)
        l.spatial = {1, s[2], s[3]};
    else
        l.spatial = {s[2], s[3], s[4]};
    return l;
}

// Any rank >= 2 tensor viewed as (N, C, positions).
Layout layout_any(const Shape& s, const char* op)
{
    if (s.size() < 2)
        throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": need at least (N, C), got " + shape_string(s));
    Layout l;
    l.n = s[0];
    l.c = s[1];
    std::int64_t p = 1;
    for (std::size_t i = 2; i < s.size(); ++i)
        p *= s[i];
    l.spatial = {1, 1, p};
    return l;
}

Shape with_spatial(std::int64_t n, std::int64_t c, const Ext3& sp, std::size_t rank)
{
    if (rank == 4)
        return {n, c, sp[1], sp[2]};
    return {n, c, sp[0], sp[1], sp[2]};
}

Ext3 cube(std::int64_t v, std::size_t rank) { return rank == 4 ? Ext3{1, v, v} : Ext3{v, v, v}; }
Ext3 depth_flat(std::int64_t v, std::size_t rank) { return rank == 4 ? Ext3{0, v, v} : Ext3{v, v, v}; }

template <class T>
Tensor<T> conv_nd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::int64_t stride, std::int64_t padding, std::size_t rank,
                  const char* op)
{
    const Layout lx = layout_of(x.shape(), rank, op);
    if (w.rank() != rank)
        throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": weight rank mismatch " + shape_string(w.shape()));
    if (w.dim(1) != lx.c)
        throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": input has " + std::to_string(lx.c) + " channels, weights expect " +
                                                  std::to_string(w.dim(1)));
    if (stride < 1 || padding < 0)
        throw Error(ErrorCode::InvalidArgument, std::string(op) + ": stride must be >= 1 and padding >= 0");
    const std::int64_t cout = w.dim(0);
    if (b.defined() && (b.rank() != 1 || b.dim(0) != cout))
        throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": bias shape " + shape_string(b.shape()));

    ConvGeometry g;
    g.cin = lx.c;
    g.cout = cout;
    g.in = lx.spatial;
    g.kernel = rank == 4 ? Ext3{1, w.dim(2), w.dim(3)} : Ext3{w.dim(2), w.dim(3), w.dim(4)};
    g.stride = cube(stride, rank);
    g.pad = depth_flat(padding, rank);
    for (std::size_t i = 0; i < 3; ++i) {
        const std::int64_t span = g.in[i] + 2 * g.pad[i] - g.kernel[i];
        if (span < 0 || span % g.stride[i] != 0)
            throw Error(ErrorCode::NonIntegralOutput, std::string(op) + ": (extent + 2p - k) / s is not a non-negative integer for input " +
                                                          shape_string(x.shape()));
    }
    g.out = kernels::conv_output_extent(g.in, g.kernel, g.stride, g.pad);

    Tensor<T> y = make_result<T>(with_spatial(lx.n, cout, g.out, rank), {x, w, b}, [x, w, b, g, n = lx.n](Node<T>& self) {
        const T* dy = self.grad.data();
        const std::int64_t in_stride = g.cin * g.in_size();
        const std::int64_t out_stride = g.cout * g.out_size();
        if (x.requires_grad()) {
            T* dx = x.node()->ensure_grad();
            for (std::int64_t s = 0; s < n; ++s)
                kernels::conv_backward_data(g, dy + s * out_stride, w.data().data(), dx + s * in_stride);
        }
        if (w.requires_grad()) {
            T* dw = w.node()->ensure_grad();
            for (std::int64_t s = 0; s < n; ++s)
                kernels::conv_backward_weight(g, x.data().data() + s * in_stride, dy + s * out_stride, dw);
        }
        if (b.defined() && b.requires_grad()) {
            T* db = b.node()->ensure_grad();
            const std::int64_t P = g.out_size();
            for (std::int64_t s = 0; s < n; ++s)
                for (std::int64_t co = 0; co < g.cout; ++co) {
                    const T* row = dy + s * out_stride + co * P;
                    T acc = T(0);
                    for (std::int64_t p = 0; p < P; ++p)
                        acc += row[p];
                    db[co] += acc;
                }
        }
    });

    T* yd = y.data().data();
    const std::int64_t P = g.out_size();
    for (std::int64_t s = 0; s < lx.n; ++s) {
        T* ys = yd + s * cout * P;
        if (b.defined())
            for (std::int64_t co = 0; co < cout; ++co)
                std::fill(ys + co * P, ys + (co + 1) * P, b.data()[static_cast<std::size_t>(co)]);
        kernels::conv_forward(g, x.data().data() + s * g.cin * g.in_size(), w.data().data(), ys);
    }
    return y;
}

// Transposed convolution expressed through the adjoint of the conv that maps
// the (large) output grid back onto the (small) input grid.
template <class T>
Tensor<T> deconv_nd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::int64_t stride, std::int64_t padding,
                    std::int64_t output_padding, std::size_t rank, const char* op)
{
    const Layout lx = layout_of(x.shape(), rank, op);
    if (w.rank() != rank || w.dim(0) != lx.c)
        throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": weights " + shape_string(w.shape()) + " do not match input " +
                                                  shape_string(x.shape()));
    if (stride < 1 || padding < 0 || output_padding < 0 || output_padding >= stride)
        throw Error(ErrorCode::InvalidArgument, std::string(op) + ": need stride >= 1, padding >= 0, 0 <= output_padding < stride");
    const std::int64_t cout = w.dim(1);
    if (b.defined() && (b.rank() != 1 || b.dim(0) != cout))
        throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": bias shape " + shape_string(b.shape()));

    ConvGeometry g;
    g.cin = cout;
    g.cout = lx.c;
    g.kernel = rank == 4 ? Ext3{1, w.dim(2), w.dim(3)} : Ext3{w.dim(2), w.dim(3), w.dim(4)};
    g.stride = cube(stride, rank);
    g.pad = depth_flat(padding, rank);
    g.out = lx.spatial;
    for (std::size_t i = 0; i < 3; ++i) {
        if (rank == 4 && i == 0) {
            g.in[i] = 1;
            continue;
        }
        g.in[i] = (lx.spatial[i] - 1) * g.stride[i] - 2 * g.pad[i] + g.kernel[i] + output_padding;
        if (g.in[i] < 1)
            throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": non-positive output extent");
    }
    if (kernels::conv_output_extent(g.in, g.kernel, g.stride, g.pad) != g.out)
        throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": geometry is not invertible for input " + shape_string(x.shape()));

    Tensor<T> y = make_result<T>(with_spatial(lx.n, cout, g.in, rank), {x, w, b}, [x, w, b, g, n = lx.n](Node<T>& self) {
        const T* dy = self.grad.data();
        const std::int64_t small = g.cout * g.out_size();
        const std::int64_t large = g.cin * g.in_size();
        if (x.requires_grad()) {
            T* dx = x.node()->ensure_grad();
            for (std::int64_t s = 0; s < n; ++s)
                kernels::conv_forward(g, dy + s * large, w.data().data(), dx + s * small);
        }
        if (w.requires_grad()) {
            T* dw = w.node()->ensure_grad();
            for (std::int64_t s = 0; s < n; ++s)
                kernels::conv_backward_weight(g, dy + s * large, x.data().data() + s * small, dw);
        }
        if (b.defined() && b.requires_grad()) {
            T* db = b.node()->ensure_grad();
            const std::int64_t P = g.in_size();
            for (std::int64_t s = 0; s < n; ++s)
                for (std::int64_t c = 0; c < g.cin; ++c) {
                    const T* row = dy + s * large + c * P;
                    T acc = T(0);
                    for (std::int64_t p = 0; p < P; ++p)
                        acc += row[p];
                    db[c] += acc;
                }
        }
    });

    T* yd = y.data().data();
    const std::int64_t P = g.in_size();
    for (std::int64_t s = 0; s < lx.n; ++s) {
        T* ys = yd + s * cout * P;
        kernels::conv_backward_data(g, x.data().data() + s * lx.c * g.out_size(), w.data().data(), ys);
        if (b.defined())
            for (std::int64_t c = 0; c < cout; ++c) {
                const T bias = b.data()[static_cast<std::size_t>(c)];
                for (std::int64_t p = 0; p < P; ++p)
                    ys[c * P + p] += bias;
            }
    }
    return y;
}

template <class T>
Tensor<T> maxpool_nd(const Tensor<T>& x, std::int64_t window, std::int64_t stride, std::size_t rank, const char* op)
{
    const Layout lx = layout_of(x.shape(), rank, op);
    if (window < 1 || stride < 1)
        throw Error(ErrorCode::InvalidArgument, std::string(op) + ": window and stride must be >= 1");
    const Ext3 win = cube(window, rank);
    const Ext3 st = cube(stride, rank);
    for (std::size_t i = 0; i < 3; ++i)
        if (win[i] > lx.spatial[i])
            throw Error(ErrorCode::WindowTooLarge, std::string(op) + ": window " + std::to_string(window) + " exceeds input " + shape_string(x.shape()));
    const Ext3 out = kernels::conv_output_extent(lx.spatial, win, st, {0, 0, 0});
    const std::int64_t in_plane = lx.plane();
    const std::int64_t out_plane = out[0] * out[1] * out[2];
    const std::int64_t planes = lx.n * lx.c;

    auto argmax = std::make_shared<mem::TrackedVector<std::int32_t>>(static_cast<std::size_t>(planes * out_plane));
    Tensor<T> y = make_result<T>(with_spatial(lx.n, lx.c, out, rank), {x}, [x, argmax, planes, in_plane, out_plane](Node<T>& self) {
        T* dx = x.node()->ensure_grad();
        const T* dy = self.grad.data();
        for (std::int64_t pl = 0; pl < planes; ++pl)
            for (std::int64_t o = 0; o < out_plane; ++o)
                dx[pl * in_plane + (*argmax)[static_cast<std::size_t>(pl * out_plane + o)]] += dy[pl * out_plane + o];
    });

    const T* xd = x.data().data();
    T* yd = y.data().data();
    for (std::int64_t pl = 0; pl < planes; ++pl) {
        const T* src = xd + pl * in_plane;
        std::int64_t o = 0;
        for (std::int64_t oz = 0; oz < out[0]; ++oz)
            for (std::int64_t oy = 0; oy < out[1]; ++oy)
                for (std::int64_t ox = 0; ox < out[2]; ++ox, ++o) {
                    T best = -std::numeric_limits<T>::infinity();
                    std::int64_t best_at = -1;
                    for (std::int64_t kz = 0; kz < win[0]; ++kz)
                        for (std::int64_t ky = 0; ky < win[1]; ++ky)
                            for (std::int64_t kx = 0; kx < win[2]; ++kx) {
                                const std::int64_t at = ((oz * st[0] + kz) * lx.spatial[1] + oy * st[1] + ky) * lx.spatial[2] + ox * st[2] + kx;
                                if (best_at < 0 || src[at] > best) {
                                    best = src[at];
                                    best_at = at;
                                }
                            }
                    yd[pl * out_plane + o] = best;
                    (*argmax)[static_cast<std::size_t>(pl * out_plane + o)] = static_cast<std::int32_t>(best_at);
                }
    }
    return y;
}

}  // namespace

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::int64_t stride, std::int64_t padding)
{
    return conv_nd(x, w, b, stride, padding, 4, "conv2d");
}

template <class T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::int64_t stride, std::int64_t padding)
{
    return conv_nd(x, w, b, stride, padding, 5, "conv3d");
}

template <class T>
Tensor<T> deconv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::int64_t stride, std::int64_t padding, std::int64_t output_padding)
{
    return deconv_nd(x, w, b, stride, padding, output_padding, 4, "deconv2d");
}

template <class T>
Tensor<T> deconv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::int64_t stride, std::int64_t padding, std::int64_t output_padding)
{
    return deconv_nd(x, w, b, stride, padding, output_padding, 5, "deconv3d");
}

template <class T>
Tensor<T> maxpool2d(const Tensor<T>& x, std::int64_t window, std::int64_t stride)
{
    return maxpool_nd(x, window, stride, 4, "maxpool2d");
}

template <class T>
Tensor<T> maxpool3d(const Tensor<T>& x, std::int64_t window, std::int64_t stride)
{
    return maxpool_nd(x, window, stride, 5, "maxpool3d");
}

template <class T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormStats<T>& stats, bool training, double momentum,
                    double epsilon)
{
    const Layout l = layout_any(x.shape(), "batchnorm");
    const auto C = static_cast<std::size_t>(l.c);
    if (gamma.numel() != C || beta.numel() != C || stats.running_mean.numel() != C || stats.running_var.numel() != C)
        throw Error(ErrorCode::ShapeMismatch, "batchnorm: parameter length does not match " + std::to_string(l.c) + " channels");
    if (!(epsilon > 0.0))
        throw Error(ErrorCode::InvalidArgument, "batchnorm: epsilon must be > 0");
    const std::int64_t P = l.plane();
    const std::int64_t m = l.n * P;
    if (training && m < 2)
        throw Error(ErrorCode::DegenerateBatch, "batchnorm: training statistics need >= 2 values per channel, got " + std::to_string(m));

    std::vector<double> mean(C), inv_std(C);
    const T* xd = x.data().data();
    for (std::size_t c = 0; c < C; ++c) {
        if (training) {
            double s = 0.0;
            for (std::int64_t n = 0; n < l.n; ++n)
                for (std::int64_t p = 0; p < P; ++p)
                    s += xd[(n * l.c + static_cast<std::int64_t>(c)) * P + p];
            const double mu = s / static_cast<double>(m);
            double v = 0.0;
            for (std::int64_t n = 0; n < l.n; ++n)
                for (std::int64_t p = 0; p < P; ++p) {
                    const double d = xd[(n * l.c + static_cast<std::int64_t>(c)) * P + p] - mu;
                    v += d * d;
                }
            const double var = v / static_cast<double>(m);
            mean[c] = mu;
            inv_std[c] = 1.0 / std::sqrt(var + epsilon);
            T& rm = stats.running_mean.data()[c];
            T& rv = stats.running_var.data()[c];
            rm = static_cast<T>((1.0 - momentum) * rm + momentum * mu);
            rv = static_cast<T>((1.0 - momentum) * rv + momentum * var * static_cast<double>(m) / static_cast<double>(m - 1));
        } else {
            mean[c] = stats.running_mean.data()[c];
            inv_std[c] = 1.0 / std::sqrt(static_cast<double>(stats.running_var.data()[c]) + epsilon);
        }
    }

    Tensor<T> y = make_result<T>(x.shape(), {x, gamma, beta}, [x, gamma, beta, mean, inv_std, training, l, P, m](Node<T>& self) {
        const T* dy = self.grad.data();
        const T* xv = x.data().data();
        const auto C2 = static_cast<std::int64_t>(mean.size());
        T* dx = x.requires_grad() ? x.node()->ensure_grad() : nullptr;
        T* dg = gamma.requires_grad() ? gamma.node()->ensure_grad() : nullptr;
        T* db = beta.requires_grad() ? beta.node()->ensure_grad() : nullptr;
        for (std::int64_t c = 0; c < C2; ++c) {
            const double mu = mean[static_cast<std::size_t>(c)];
            const double is = inv_std[static_cast<std::size_t>(c)];
            const double gm = gamma.data()[static_cast<std::size_t>(c)];
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::int64_t n = 0; n < l.n; ++n)
                for (std::int64_t p = 0; p < P; ++p) {
                    const std::int64_t at = (n * C2 + c) * P + p;
                    sum_dy += dy[at];
                    sum_dy_xhat += dy[at] * (xv[at] - mu) * is;
                }
            if (dg)
                dg[c] += static_cast<T>(sum_dy_xhat);
            if (db)
                db[c] += static_cast<T>(sum_dy);
            if (!dx)
                continue;
            const double inv_m = 1.0 / static_cast<double>(m);
            for (std::int64_t n = 0; n < l.n; ++n)
                for (std::int64_t p = 0; p < P; ++p) {
                    const std::int64_t at = (n * C2 + c) * P + p;
                    if (training) {
                        const double xhat = (xv[at] - mu) * is;
                        dx[at] += static_cast<T>(gm * is * (dy[at] - inv_m * sum_dy - xhat * inv_m * sum_dy_xhat));
                    } else {
                        dx[at] += static_cast<T>(gm * is * dy[at]);
                    }
                }
        }
    });

    T* yd = y.data().data();
    for (std::int64_t n = 0; n < l.n; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            const double g = gamma.data()[c];
            const double bt = beta.data()[c];
            const std::int64_t base = (n * l.c + static_cast<std::int64_t>(c)) * P;
            for (std::int64_t p = 0; p < P; ++p)
                yd[base + p] = static_cast<T>(g * ((xd[base + p] - mean[c]) * inv_std[c]) + bt);
        }
    return y;
}

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, double slope)
{
    if (!(slope >= 0.0 && slope < 1.0))
        throw Error(ErrorCode::InvalidArgument, "leaky_relu: slope must be in [0, 1)");
    const T a = static_cast<T>(slope);
    Tensor<T> y = make_result<T>(x.shape(), {x}, [x, a](Node<T>& self) {
        T* dx = x.node()->ensure_grad();
        const T* xv = x.data().data();
        const T* dy = self.grad.data();
        for (std::size_t i = 0; i < x.numel(); ++i)
            dx[i] += xv[i] >= T(0) ? dy[i] : a * dy[i];
    });
    const T* xv = x.data().data();
    T* yd = y.data().data();
    for (std::size_t i = 0; i < x.numel(); ++i)
        yd[i] = xv[i] >= T(0) ? xv[i] : a * xv[i];
    return y;
}

template <class T>
Tensor<T> softmax_channels(const Tensor<T>& x)
{
    const Layout l = layout_any(x.shape(), "softmax_channels");
    if (l.c < 1)
        throw Error(ErrorCode::ShapeMismatch, "softmax_channels: need >= 1 channel");
    const std::int64_t P = l.plane();
    Tensor<T> y = make_result<T>(x.shape(), {x}, [x, l, P](Node<T>& self) {
        T* dx = x.node()->ensure_grad();
        const T* yv = self.data.data();
        const T* dy = self.grad.data();
        for (std::int64_t n = 0; n < l.n; ++n)
            for (std::int64_t p = 0; p < P; ++p) {
                const std::int64_t base = n * l.c * P + p;
                T dotp = T(0);
                for (std::int64_t c = 0; c < l.c; ++c)
                    dotp += yv[base + c * P] * dy[base + c * P];
                for (std::int64_t c = 0; c < l.c; ++c)
                    dx[base + c * P] += yv[base + c * P] * (dy[base + c * P] - dotp);
            }
    });
    const T* xv = x.data().data();
    T* yd = y.data().data();
    for (std::int64_t n = 0; n < l.n; ++n)
        for (std::int64_t p = 0; p < P; ++p) {
            const std::int64_t base = n * l.c * P + p;
            T mx = xv[base];
            for (std::int64_t c = 1; c < l.c; ++c)
                mx = std::max(mx, xv[base + c * P]);
            T total = T(0);
            for (std::int64_t c = 0; c < l.c; ++c) {
                const T e = std::exp(xv[base + c * P] - mx);
                yd[base + c * P] = e;
                total += e;
            }
            for (std::int64_t c = 0; c < l.c; ++c)
                yd[base + c * P] /= total;
        }
    return y;
}

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b)
{
    const Layout la = layout_any(a.shape(), "concat_channels");
    const Layout lb = layout_any(b.shape(), "concat_channels");
    Shape sa = a.shape(), sb = b.shape();
    sa[1] = sb[1] = 0;
    if (sa != sb)
        throw Error(ErrorCode::ShapeMismatch, "concat_channels: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    Shape out = a.shape();
    out[1] = la.c + lb.c;
    const std::int64_t P = la.plane();
    const std::int64_t ca = la.c * P, cb = lb.c * P;
    Tensor<T> y = make_result<T>(out, {a, b}, [a, b, la, ca, cb](Node<T>& self) {
        const T* dy = self.grad.data();
        for (std::int64_t n = 0; n < la.n; ++n) {
            const T* src = dy + n * (ca + cb);
            if (a.requires_grad()) {
                T* da = a.node()->ensure_grad() + n * ca;
                for (std::int64_t i = 0; i < ca; ++i)
                    da[i] += src[i];
            }
            if (b.requires_grad()) {
                T* db = b.node()->ensure_grad() + n * cb;
                for (std::int64_t i = 0; i < cb; ++i)
                    db[i] += src[ca + i];
            }
        }
    });
    T* yd = y.data().data();
    for (std::int64_t n = 0; n < la.n; ++n) {
        std::copy_n(a.data().data() + n * ca, ca, yd + n * (ca + cb));
        std::copy_n(b.data().data() + n * cb, cb, yd + n * (ca + cb) + ca);
    }
    return y;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b)
{
    if (a.shape() != b.shape())
        throw Error(ErrorCode::ShapeMismatch, "add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    Tensor<T> y = make_result<T>(a.shape(), {a, b}, [a, b](Node<T>& self) {
        for (const Tensor<T>* t : {&a, &b})
            if (t->requires_grad()) {
                T* d = t->node()->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    d[i] += self.grad[i];
            }
    });
    for (std::size_t i = 0; i < y.numel(); ++i)
        y.data()[i] = a.data()[i] + b.data()[i];
    return y;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b)
{
    if (a.shape() != b.shape())
        throw Error(ErrorCode::ShapeMismatch, "mul: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    Tensor<T> y = make_result<T>(a.shape(), {a, b}, [a, b](Node<T>& self) {
        if (a.requires_grad()) {
            T* d = a.node()->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                d[i] += self.grad[i] * b.data()[i];
        }
        if (b.requires_grad()) {
            T* d = b.node()->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                d[i] += self.grad[i] * a.data()[i];
        }
    });
    for (std::size_t i = 0; i < y.numel(); ++i)
        y.data()[i] = a.data()[i] * b.data()[i];
    return y;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, double s)
{
    const T k = static_cast<T>(s);
    Tensor<T> y = make_result<T>(a.shape(), {a}, [a, k](Node<T>& self) {
        T* d = a.node()->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            d[i] += k * self.grad[i];
    });
    for (std::size_t i = 0; i < y.numel(); ++i)
        y.data()[i] = k * a.data()[i];
    return y;
}

template <class T>
Tensor<T> sum(const Tensor<T>& a)
{
    Tensor<T> y = make_result<T>({}, {a}, [a](Node<T>& self) {
        T* d = a.node()->ensure_grad();
        const T g = self.grad[0];
        for (std::size_t i = 0; i < a.numel(); ++i)
            d[i] += g;
    });
    T acc = T(0);
    for (T v : a.data())
        acc += v;
    y.data()[0] = acc;
    return y;
}

#define IPSEG_INSTANTIATE_OPS(T)                                                                                                   \
    template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::int64_t, std::int64_t);                   \
    template Tensor<T> conv3d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::int64_t, std::int64_t);                   \
    template Tensor<T> deconv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::int64_t, std::int64_t, std::int64_t);   \
    template Tensor<T> deconv3d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::int64_t, std::int64_t, std::int64_t);   \
    template Tensor<T> maxpool2d(const Tensor<T>&, std::int64_t, std::int64_t);                                                     \
    template Tensor<T> maxpool3d(const Tensor<T>&, std::int64_t, std::int64_t);                                                     \
    template Tensor<T> batchnorm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, BatchNormStats<T>&, bool, double, double); \
    template Tensor<T> leaky_relu(const Tensor<T>&, double);                                                                        \
    template Tensor<T> softmax_channels(const Tensor<T>&);                                                                          \
    template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                                                         \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                                     \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                                     \
    template Tensor<T> scale(const Tensor<T>&, double);                                                                             \
    template Tensor<T> sum(const Tensor<T>&);

IPSEG_INSTANTIATE_OPS(float)
IPSEG_INSTANTIATE_OPS(double)

#undef IPSEG_INSTANTIATE_OPS

}  // namespace ipseg::nn

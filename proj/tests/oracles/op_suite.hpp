#pragma once

// Gradient-check cases for every differentiable primitive, shared by the unit
// tests and the acceptance run.

#include <cstdint>
#include <string>
#include <vector>

#include "autonn/gradcheck.hpp"
#include "autonn/ops.hpp"
#include "common/rng.hpp"

namespace opsuite {

using ipseg::Rng;
using ipseg::nn::DiffFn;
using ipseg::nn::Shape;
using T = ipseg::nn::Tensor<double>;

inline T randn(Rng& rng, Shape shape, double s = 1.0)
{
    std::vector<double> v(static_cast<std::size_t>(ipseg::nn::numel(shape)));
    for (auto& x : v)
        x = s * rng.normal();
    return T::from(std::move(shape), v);
}

struct Case {
    std::string op;
    double threshold;
    DiffFn fn;
    std::vector<T> inputs;
    std::int64_t stride = 1;
    std::int64_t padding = 0;
};

inline std::vector<std::string> op_names()
{
    return {"conv2d", "conv3d", "deconv2d", "deconv3d", "maxpool2d", "maxpool3d", "batchnorm_train", "batchnorm_eval",
            "leaky_relu", "softmax", "concat", "add", "mul", "scale", "sum"};
}

// Random shapes and values for one op, drawn from `seed`.
inline Case make_case(const std::string& op, std::uint64_t seed)
{
    using namespace ipseg::nn;
    Rng rng(seed * 7919 + 17);
    auto pick = [&](std::int64_t lo, std::int64_t hi) { return lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); };
    const std::int64_t n = pick(1, 2), c = pick(1, 3), co = pick(1, 3);

    if (op == "conv2d" || op == "conv3d") {
        const bool three = op == "conv3d";
        const std::int64_t k = pick(1, 3), s = pick(1, 2), p = pick(0, k / 2);
        Shape xs{n, c};
        Shape ws{co, c};
        for (int d = 0; d < (three ? 3 : 2); ++d) {
            std::int64_t e = pick(k, 6);
            // keep (e + 2p - k) divisible by s
            while ((e + 2 * p - k) % s != 0)
                ++e;
            xs.push_back(e);
            ws.push_back(k);
        }
        const std::int64_t ss = s, pp = p;
        DiffFn f = three ? DiffFn([ss, pp](const std::vector<T>& in) { return conv3d(in[0], in[1], in[2], ss, pp); })
                         : DiffFn([ss, pp](const std::vector<T>& in) { return conv2d(in[0], in[1], in[2], ss, pp); });
        return {op, 1e-6, f, {randn(rng, xs), randn(rng, ws, 0.5), randn(rng, {co})}, s, p};
    }
    if (op == "deconv2d" || op == "deconv3d") {
        const bool three = op == "deconv3d";
        const std::int64_t k = 3, s = pick(1, 2), opad = s == 2 ? 1 : 0;
        Shape xs{n, c};
        Shape ws{c, co};
        for (int d = 0; d < (three ? 3 : 2); ++d) {
            xs.push_back(pick(1, 4));
            ws.push_back(k);
        }
        DiffFn f = three ? DiffFn([s, opad](const std::vector<T>& in) { return deconv3d(in[0], in[1], in[2], s, 1, opad); })
                         : DiffFn([s, opad](const std::vector<T>& in) { return deconv2d(in[0], in[1], in[2], s, 1, opad); });
        return {op, 1e-6, f, {randn(rng, xs), randn(rng, ws, 0.5), randn(rng, {co})}};
    }
    if (op == "maxpool2d" || op == "maxpool3d") {
        const bool three = op == "maxpool3d";
        Shape xs{n, c};
        for (int d = 0; d < (three ? 3 : 2); ++d)
            xs.push_back(pick(2, 7));
        DiffFn f = three ? DiffFn([](const std::vector<T>& in) { return maxpool3d(in[0]); })
                         : DiffFn([](const std::vector<T>& in) { return maxpool2d(in[0]); });
        return {op, 1e-6, f, {randn(rng, xs)}};
    }
    if (op == "batchnorm_train" || op == "batchnorm_eval") {
        const bool training = op == "batchnorm_train";
        Shape xs{pick(2, 3), c, pick(2, 4), pick(2, 4)};
        auto stats = std::make_shared<BatchNormStats<double>>(BatchNormStats<double>::create(c));
        for (std::int64_t i = 0; i < c; ++i) {
            stats->running_mean.data()[static_cast<std::size_t>(i)] = rng.normal();
            stats->running_var.data()[static_cast<std::size_t>(i)] = 0.5 + rng.uniform();
        }
        DiffFn f = [stats, training](const std::vector<T>& in) {
            // a fresh copy each call so running-stat updates do not leak between probes
            BatchNormStats<double> local{T::from({in[1].dim(0)}, stats->running_mean.data()), T::from({in[1].dim(0)}, stats->running_var.data())};
            return batchnorm(in[0], in[1], in[2], local, training);
        };
        return {op, 1e-5, f, {randn(rng, xs), randn(rng, {c}), randn(rng, {c})}};
    }
    if (op == "leaky_relu")
        return {op, 1e-6, [](const std::vector<T>& in) { return leaky_relu(in[0], 0.01); }, {randn(rng, {n, c, pick(1, 5), pick(1, 5)})}};
    if (op == "softmax")
        return {op, 1e-5, [](const std::vector<T>& in) { return softmax_channels(in[0]); }, {randn(rng, {n, pick(1, 4), pick(1, 5), pick(1, 5)}, 2.0)}};
    if (op == "concat") {
        const std::int64_t h = pick(1, 4), w = pick(1, 4);
        return {op, 1e-6, [](const std::vector<T>& in) { return concat_channels(in[0], in[1]); }, {randn(rng, {n, c, h, w}), randn(rng, {n, co, h, w})}};
    }
    Shape s{n, c, pick(1, 4), pick(1, 4)};
    if (op == "add")
        return {op, 1e-6, [](const std::vector<T>& in) { return add(in[0], in[1]); }, {randn(rng, s), randn(rng, s)}};
    if (op == "mul")
        return {op, 1e-6, [](const std::vector<T>& in) { return mul(in[0], in[1]); }, {randn(rng, s), randn(rng, s)}};
    if (op == "scale") {
        const double a = rng.uniform(-3.0, 3.0);
        return {op, 1e-6, [a](const std::vector<T>& in) { return scale(in[0], a); }, {randn(rng, s)}};
    }
    return {"sum", 1e-6, [](const std::vector<T>& in) { return sum(in[0]); }, {randn(rng, s)}};
}

inline double run_case(const Case& c, std::uint64_t seed)
{
    return ipseg::nn::finite_diff_check(c.fn, c.inputs, 1e-6, seed, 4);
}

}  // namespace opsuite

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "../oracles/conv_oracle.hpp"
#include "../oracles/op_suite.hpp"
#include "autonn/layer_spec.hpp"
#include "autonn/ops.hpp"
#include "autonn/optim.hpp"
#include "common/error.hpp"

using namespace ipseg;
using namespace ipseg::nn;
using TD = Tensor<double>;

namespace {

std::vector<double> values(const TD& t) { return {t.data().begin(), t.data().end()}; }

ErrorCode code_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an ipseg::Error");
    return ErrorCode::InvalidArgument;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol = 1e-12)
{
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(tol).scale(1.0));
}

}  // namespace

TEST_CASE("conv forward matches the direct definition")
{
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
        for (bool three : {false, true}) {
            auto c = opsuite::make_case(three ? "conv3d" : "conv2d", seed);
            const auto& w = c.inputs[1];
            const std::int64_t k = w.dim(2);
            const std::int64_t st = c.stride, p = c.padding;
            oracle::Grid x{c.inputs[0].shape(), values(c.inputs[0])};
            auto ref = oracle::conv(x, values(w), values(c.inputs[2]), w.dim(0), k, st, p);
            auto mine = c.fn(c.inputs);
            CHECK(mine.shape() == ref.shape);
            check_close(values(mine), ref.v);
        }
    }
}

TEST_CASE("deconv forward matches the scatter definition and doubles extents")
{
    Rng rng(4);
    for (bool three : {false, true}) {
        Shape xs = three ? Shape{2, 3, 3, 2, 4} : Shape{2, 3, 5, 3};
        Shape ws = three ? Shape{3, 2, 3, 3, 3} : Shape{3, 2, 3, 3};
        auto x = opsuite::randn(rng, xs), w = opsuite::randn(rng, ws), b = opsuite::randn(rng, {2});
        auto y = three ? deconv3d(x, w, b) : deconv2d(x, w, b);
        for (std::size_t d = 2; d < xs.size(); ++d)
            CHECK(y.dim(d) == 2 * xs[d]);
        auto ref = oracle::deconv({xs, values(x)}, values(w), values(b), 2, 3, 2, 1, 1);
        CHECK(y.shape() == ref.shape);
        check_close(values(y), ref.v);
    }
}

TEST_CASE("conv is linear in its input")
{
    Rng rng(9);
    auto x1 = opsuite::randn(rng, {1, 2, 6, 6}), x2 = opsuite::randn(rng, {1, 2, 6, 6}), w = opsuite::randn(rng, {3, 2, 3, 3});
    const double a = 1.7, b = -0.4;
    auto lhs = conv2d(add(scale(x1, a), scale(x2, b)), w, TD(), 1, 1);
    auto rhs = add(scale(conv2d(x1, w, TD(), 1, 1), a), scale(conv2d(x2, w, TD(), 1, 1), b));
    check_close(values(lhs), values(rhs), 1e-12);
}

TEST_CASE("every op passes the finite-difference check")
{
    for (const auto& op : opsuite::op_names())
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            auto c = opsuite::make_case(op, seed);
            const double err = opsuite::run_case(c, seed);
            INFO(op << " seed " << seed << " err " << err);
            CHECK(err < c.threshold);
        }
}

TEST_CASE("maxpool routes ties to the first maximum")
{
    auto x = TD::from({1, 1, 2, 2}, std::vector<double>{3, 3, 1, 3}, true);
    auto y = maxpool2d(x);
    CHECK(y.item() == 3.0);
    backward(sum(y));
    CHECK(values(TD::from({4}, x.grad())) == std::vector<double>{1, 0, 0, 0});

    auto odd = TD::from({1, 1, 3, 3}, std::vector<double>(9, 0.0));
    CHECK(maxpool2d(odd).shape() == Shape{1, 1, 1, 1});
    CHECK(code_of([] { maxpool2d(TD::zeros({1, 1, 1, 4})); }) == ErrorCode::WindowTooLarge);
}

TEST_CASE("batchnorm statistics")
{
    Rng rng(2);
    auto x = opsuite::randn(rng, {4, 2, 3, 3}, 3.0);
    auto g = TD::full({2}, 1.0), b = TD::zeros({2});
    auto stats = BatchNormStats<double>::create(2);
    auto y = batchnorm(x, g, b, stats, true, 0.1, 1e-5);
    for (std::int64_t c = 0; c < 2; ++c) {
        double s = 0, s2 = 0, xs = 0, xs2 = 0;
        const int m = 4 * 9;
        for (std::int64_t n = 0; n < 4; ++n)
            for (std::int64_t p = 0; p < 9; ++p) {
                const auto at = static_cast<std::size_t>((n * 2 + c) * 9 + p);
                s += y.data()[at];
                s2 += y.data()[at] * y.data()[at];
                xs += x.data()[at];
                xs2 += x.data()[at] * x.data()[at];
            }
        CHECK(s / m == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
        CHECK(s2 / m == doctest::Approx(1.0).epsilon(1e-3));
        const double mu = xs / m, var = xs2 / m - mu * mu;
        CHECK(stats.running_mean.data()[static_cast<std::size_t>(c)] == doctest::Approx(0.1 * mu));
        CHECK(stats.running_var.data()[static_cast<std::size_t>(c)] == doctest::Approx(0.9 + 0.1 * var * m / (m - 1)));
    }
    auto z = batchnorm(x, g, b, stats, false);
    const double expect = (x.data()[0] - stats.running_mean.data()[0]) / std::sqrt(stats.running_var.data()[0] + 1e-5);
    CHECK(z.data()[0] == doctest::Approx(expect));
    CHECK(code_of([&] { batchnorm(TD::zeros({1, 2, 1, 1}), g, b, stats, true); }) == ErrorCode::DegenerateBatch);
}

TEST_CASE("softmax and leaky relu values")
{
    auto x = TD::from({1, 3, 1, 2}, std::vector<double>{1, 5, 2, 5, 3, 5});
    auto p = softmax_channels(x);
    const double z = std::exp(1) + std::exp(2) + std::exp(3);
    CHECK(p.data()[0] == doctest::Approx(std::exp(1) / z));
    CHECK(p.data()[5] == doctest::Approx(1.0 / 3));
    auto shifted = softmax_channels(add(x, TD::full({1, 3, 1, 2}, 1000.0)));
    check_close(values(shifted), values(p), 1e-12);

    auto r = leaky_relu(TD::from({4}, std::vector<double>{-2, 0, 3, -0.5}), 0.01);
    check_close(values(r), {-0.02, 0, 3, -0.005});
}

TEST_CASE("backward bookkeeping")
{
    auto x = TD::from({3}, std::vector<double>{1, 2, 3}, true);
    backward(sum(mul(x, x)));
    check_close(values(TD::from({3}, x.grad())), {2, 4, 6});

    x.zero_grad();
    CHECK_FALSE(x.has_grad());

    auto used = TD::from({1}, std::vector<double>{2}, true);
    auto unused = TD::from({2}, std::vector<double>{1, 1}, true);
    std::vector<TD> params{used, unused};
    CHECK(backward(sum(scale(used, 3.0)), std::span<TD>(params)) == 1);
    CHECK(used.grad()[0] == 3.0);
    REQUIRE(unused.has_grad());
    CHECK(unused.grad()[0] == 0.0);

    CHECK(code_of([&] { backward(scale(x, 2.0)); }) == ErrorCode::NotScalarLoss);
    CHECK(code_of([] { backward(sum(TD::zeros({2}))); }) == ErrorCode::NotScalarLoss);

    {
        NoGradGuard guard;
        auto y = mul(x, x);
        CHECK(y.node()->parents.empty());
        CHECK_FALSE(grad_enabled());
    }
    CHECK(grad_enabled());
}

TEST_CASE("shape errors")
{
    CHECK(code_of([] { conv2d(TD::zeros({1, 2, 4, 4}), TD::zeros({1, 3, 3, 3}), TD()); }) == ErrorCode::ShapeMismatch);
    CHECK(code_of([] { conv2d(TD::zeros({1, 1, 4, 4}), TD::zeros({1, 1, 3, 3}), TD(), 2, 0); }) == ErrorCode::NonIntegralOutput);
    CHECK(code_of([] { conv3d(TD::zeros({1, 1, 4, 4}), TD::zeros({1, 1, 3, 3}), TD()); }) == ErrorCode::ShapeMismatch);
    CHECK(code_of([] { concat_channels(TD::zeros({1, 1, 4, 4}), TD::zeros({1, 1, 4, 3})); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("layer spec shape arithmetic")
{
    LayerSpec conv{LayerKind::Conv2d, 3, 64, 3, 1, 1};
    CHECK(conv.output_shape({2, 3, 512, 512}) == Shape{2, 64, 512, 512});
    CHECK(conv.param_count() == 3 * 64 * 9 + 64);
    LayerSpec deconv{LayerKind::Deconv3d, 8, 4, 3, 2, 1, 1};
    CHECK(deconv.output_shape({1, 8, 4, 4, 2}) == Shape{1, 4, 8, 8, 4});
    LayerSpec pool{LayerKind::MaxPool2d, 0, 0, 2, 2};
    CHECK(pool.output_shape({1, 5, 8, 6}) == Shape{1, 5, 4, 3});
    LayerSpec cat{LayerKind::Concat};
    CHECK(cat.output_shape({1, 5, 8, 6}, 7) == Shape{1, 12, 8, 6});
    LayerSpec bad{LayerKind::Conv2d, 3, 0};
    CHECK(code_of([&] { bad.validate(); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("optimizers")
{
    auto p = TD::from({2}, std::vector<double>{1.0, -1.0}, true);
    std::vector<TD> params{p};
    p.node()->ensure_grad();
    p.grad()[0] = 0.5;
    p.grad()[1] = -2.0;

    Optimizer<double> sgd({OptimizerKind::Sgd, 0.1}, params);
    sgd.step(params);
    CHECK(p.data()[0] == doctest::Approx(0.95));
    CHECK(p.data()[1] == doctest::Approx(-0.8));

    p.data()[0] = 1.0;
    p.data()[1] = -1.0;
    Optimizer<double> adam({OptimizerKind::Adam, 0.01}, params);
    adam.step(params);
    // first bias-corrected step moves each coordinate by about lr against the gradient sign
    CHECK(p.data()[0] == doctest::Approx(0.99).epsilon(1e-6));
    CHECK(p.data()[1] == doctest::Approx(-0.99).epsilon(1e-6));
    CHECK(adam.steps() == 1);
    CHECK(adam.first_moments()[0][0] == doctest::Approx(0.05));
    CHECK(adam.second_moments()[0][1] == doctest::Approx(0.001 * 4.0));

    CHECK(code_of([] { parse_optimizer("rmsprop"); }) == ErrorCode::BadHyperparameters);
    OptimizerConfig bad;
    bad.learning_rate = 0;
    CHECK(code_of([&] { bad.validate(); }) == ErrorCode::BadHyperparameters);
}

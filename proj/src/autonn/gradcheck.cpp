#include "autonn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "autonn/ops.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"

namespace ipseg::nn {

double relative_error(double analytic, double numeric)
{
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

double finite_diff_check(const DiffFn& f, std::vector<Tensor<double>> inputs, double eps, std::uint64_t seed, int directions,
                         std::vector<bool> checked)
{
    if (checked.empty())
        checked.assign(inputs.size(), true);
    if (checked.size() != inputs.size())
        throw Error(ErrorCode::InvalidArgument, "finite_diff_check: mask length differs from input count");
    Rng rng(seed);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        inputs[i].zero_grad();
        inputs[i].set_requires_grad(checked[i]);
    }

    Tensor<double> y = f(inputs);
    std::vector<double> r(y.numel());
    for (auto& v : r)
        v = rng.normal();
    const Tensor<double> weights = Tensor<double>::from(y.shape(), r);
    backward(sum(mul(y, weights)));

    auto probe = [&]() {
        NoGradGuard guard;
        const Tensor<double> out = f(inputs);
        double acc = 0.0;
        for (std::size_t k = 0; k < out.numel(); ++k)
            acc += out.data()[k] * r[k];
        return acc;
    };

    double worst = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!checked[i])
            continue;
        auto x = inputs[i].data();
        std::vector<double> grad(x.size(), 0.0);
        if (inputs[i].has_grad())
            std::copy(inputs[i].grad().begin(), inputs[i].grad().end(), grad.begin());
        const std::vector<double> x0(x.begin(), x.end());
        for (int d = 0; d < directions; ++d) {
            std::vector<double> v(x.size());
            double analytic = 0.0;
            for (std::size_t k = 0; k < v.size(); ++k) {
                v[k] = rng.normal();
                analytic += grad[k] * v[k];
            }
            for (std::size_t k = 0; k < x.size(); ++k)
                x[k] = x0[k] + eps * v[k];
            const double up = probe();
            for (std::size_t k = 0; k < x.size(); ++k)
                x[k] = x0[k] - eps * v[k];
            const double down = probe();
            std::copy(x0.begin(), x0.end(), x.begin());
            worst = std::max(worst, relative_error(analytic, (up - down) / (2.0 * eps)));
        }
    }
    return worst;
}

double numeric_partial(const std::function<double()>& eval, double& slot, double eps)
{
    const double original = slot;
    slot = original + eps;
    const double up = eval();
    slot = original - eps;
    const double down = eval();
    slot = original;
    return (up - down) / (2.0 * eps);
}

}  // namespace ipseg::nn

#include "segloss/losses.hpp"

#include <cmath>
#include <string>

#include "common/error.hpp"

namespace ipseg::loss {

using nn::Tensor;

std::vector<int> resolve_classes(const ClassSet& classes, int num_classes)
{
    std::vector<int> out;
    if (classes) {
        out = *classes;
    } else {
        for (int c = 1; c < num_classes; ++c)
            out.push_back(c);
    }
    if (out.empty())
        throw Error(ErrorCode::EmptyClassSet, "no classes to average over");
    for (int c : out)
        if (c < 0 || c >= num_classes)
            throw Error(ErrorCode::InvalidArgument, "class " + std::to_string(c) + " outside [0, " + std::to_string(num_classes) + ")");
    return out;
}

namespace {

// ratio_c = (a*I + e) / (b*I + c*Sp + d*Sg + e), loss = mean_c (1 - ratio_c).
struct RatioCoeffs {
    double a, b, c, d, e;
};

template <class T>
Tensor<T> ratio_loss(const Tensor<T>& pred, std::span<const std::uint8_t> target, const ClassSet& classes, RatioCoeffs k)
{
    if (pred.rank() < 3)
        throw Error(ErrorCode::ShapeMismatch, "prediction must be (N, K, spatial...)");
    const std::int64_t n = pred.dim(0);
    const std::int64_t nk = pred.dim(1);
    const std::int64_t sp = static_cast<std::int64_t>(pred.numel()) / (n * nk);
    if (static_cast<std::int64_t>(target.size()) != n * sp)
        throw Error(ErrorCode::ShapeMismatch, "target has " + std::to_string(target.size()) + " labels, prediction " + nn::shape_string(pred.shape()));
    const std::vector<int> cls = resolve_classes(classes, static_cast<int>(nk));
    for (auto g : target)
        if (g >= nk)
            throw Error(ErrorCode::InvalidLabel, "label " + std::to_string(g) + " >= class count " + std::to_string(nk));

    struct Sums {
        double inter = 0.0, sp = 0.0, sg = 0.0;
    };
    std::vector<Sums> sums(cls.size());
    const auto p = pred.data();
    for (std::size_t ci = 0; ci < cls.size(); ++ci) {
        const int c = cls[ci];
        Sums& s = sums[ci];
        for (std::int64_t b = 0; b < n; ++b) {
            const T* pc = p.data() + (b * nk + c) * sp;
            const std::uint8_t* g = target.data() + b * sp;
            for (std::int64_t i = 0; i < sp; ++i) {
                const double pv = static_cast<double>(pc[i]);
                s.sp += pv;
                if (g[i] == c) {
                    s.inter += pv;
                    s.sg += 1.0;
                }
            }
        }
    }
    double total = 0.0;
    for (const auto& s : sums)
        total += 1.0 - (k.a * s.inter + k.e) / (k.b * s.inter + k.c * s.sp + k.d * s.sg + k.e);
    const double inv = 1.0 / static_cast<double>(cls.size());
    const T value = static_cast<T>(total * inv);

    std::vector<std::uint8_t> labels(target.begin(), target.end());
    Tensor<T> out = nn::make_result<T>({1}, {pred}, [pred, labels = std::move(labels), cls, sums, k, n, nk, sp, inv](nn::Node<T>& self) {
        const double up = static_cast<double>(self.grad[0]) * inv;
        T* gp = pred.node()->ensure_grad();
        for (std::size_t ci = 0; ci < cls.size(); ++ci) {
            const int c = cls[ci];
            const Sums& s = sums[ci];
            const double num = k.a * s.inter + k.e;
            const double den = k.b * s.inter + k.c * s.sp + k.d * s.sg + k.e;
            // d(1 - num/den)/dp = -(dnum*den - num*dden) / den^2
            const double on_hit = -(k.a * den - num * (k.b + k.c)) / (den * den) * up;
            const double on_miss = -(-num * k.c) / (den * den) * up;
            for (std::int64_t b = 0; b < n; ++b) {
                T* gc = gp + (b * nk + c) * sp;
                const std::uint8_t* g = labels.data() + b * sp;
                for (std::int64_t i = 0; i < sp; ++i)
                    gc[i] += static_cast<T>(g[i] == c ? on_hit : on_miss);
            }
        }
    });
    out.data()[0] = value;
    return out;
}

}  // namespace

template <class T>
Tensor<T> dice_loss(const Tensor<T>& pred, std::span<const std::uint8_t> target, const ClassSet& classes)
{
    return ratio_loss(pred, target, classes, {2.0, 0.0, 1.0, 1.0, kSmoothing});
}

template <class T>
Tensor<T> tversky_loss(const Tensor<T>& pred, std::span<const std::uint8_t> target, double alpha, double beta, const ClassSet& classes)
{
    if (!(alpha >= 0.0) || !(beta >= 0.0) || std::abs(alpha + beta - 1.0) > 1e-9)
        throw Error(ErrorCode::BadHyperparameters, "tversky needs alpha, beta >= 0 with alpha + beta = 1");
    // FP = Sp - I, FN = Sg - I, so the denominator is (1 - a - b) I + a Sp + b Sg.
    return ratio_loss(pred, target, classes, {1.0, 1.0 - alpha - beta, alpha, beta, kSmoothing / 2.0});
}

template Tensor<float> dice_loss(const Tensor<float>&, std::span<const std::uint8_t>, const ClassSet&);
template Tensor<double> dice_loss(const Tensor<double>&, std::span<const std::uint8_t>, const ClassSet&);
template Tensor<float> tversky_loss(const Tensor<float>&, std::span<const std::uint8_t>, double, double, const ClassSet&);
template Tensor<double> tversky_loss(const Tensor<double>&, std::span<const std::uint8_t>, double, double, const ClassSet&);

}  // namespace ipseg::loss

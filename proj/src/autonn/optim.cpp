#include "autonn/optim.hpp"

#include <cmath>

#include "common/error.hpp"

namespace ipseg::nn {

const char* optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& name)
{
    if (name == "adam")
        return OptimizerKind::Adam;
    if (name == "sgd")
        return OptimizerKind::Sgd;
    throw Error(ErrorCode::BadHyperparameters, "unknown optimizer '" + name + "'");
}

void OptimizerConfig::validate() const
{
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw Error(ErrorCode::BadHyperparameters, "learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw Error(ErrorCode::BadHyperparameters, "adam betas must be in [0, 1)");
    if (!(epsilon > 0.0))
        throw Error(ErrorCode::BadHyperparameters, "adam epsilon must be positive");
}

template <class T>
Optimizer<T>::Optimizer(OptimizerConfig cfg, const std::vector<Tensor<T>>& params) : cfg_(cfg)
{
    cfg_.validate();
    if (cfg_.kind == OptimizerKind::Adam) {
        for (const auto& p : params) {
            m_.emplace_back(p.numel(), T(0));
            v_.emplace_back(p.numel(), T(0));
        }
    }
}

template <class T>
void Optimizer<T>::step(std::vector<Tensor<T>>& params)
{
    ++steps_;
    const double lr = cfg_.learning_rate;
    if (cfg_.kind == OptimizerKind::Sgd) {
        for (auto& p : params) {
            if (!p.has_grad())
                continue;
            auto x = p.data();
            auto g = p.grad();
            for (std::size_t i = 0; i < x.size(); ++i)
                x[i] = static_cast<T>(x[i] - lr * g[i]);
        }
        return;
    }
    if (m_.size() != params.size())
        throw Error(ErrorCode::InvalidArgument, "optimizer state does not match parameter list");
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto x = params[k].data();
        const bool has = params[k].has_grad();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double g = has ? static_cast<double>(params[k].grad()[i]) : 0.0;
            const double mi = b1 * m[i] + (1.0 - b1) * g;
            const double vi = b2 * v[i] + (1.0 - b2) * g * g;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            x[i] = static_cast<T>(x[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + cfg_.epsilon));
        }
    }
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace ipseg::nn

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "autonn/tensor.hpp"

namespace ipseg::nn {

enum class OptimizerKind { Sgd, Adam };

const char* optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

// Plain SGD or Adam with bias correction. Moment buffers are tracked memory.
template <class T>
class Optimizer {
public:
    Optimizer(OptimizerConfig cfg, const std::vector<Tensor<T>>& params);

    // Applies one update from the params' current grads (missing grads count as zero).
    void step(std::vector<Tensor<T>>& params);

    const OptimizerConfig& config() const { return cfg_; }
    std::int64_t steps() const { return steps_; }
    void set_steps(std::int64_t s) { steps_ = s; }
    std::vector<mem::TrackedVector<T>>& first_moments() { return m_; }
    std::vector<mem::TrackedVector<T>>& second_moments() { return v_; }

private:
    OptimizerConfig cfg_;
    std::int64_t steps_ = 0;
    std::vector<mem::TrackedVector<T>> m_;
    std::vector<mem::TrackedVector<T>> v_;
};

extern template class Optimizer<float>;
extern template class Optimizer<double>;

}  // namespace ipseg::nn

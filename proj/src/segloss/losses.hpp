#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "autonn/tensor.hpp"

// Soft overlap losses on (N, K, spatial...) probabilities against hard labels
// laid out (N, spatial...). The class set defaults to the foreground 1..K-1.
namespace ipseg::loss {

constexpr double kSmoothing = 1e-6;

using ClassSet = std::optional<std::vector<int>>;

// Mean over classes of 1 - (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps).
template <class T>
nn::Tensor<T> dice_loss(const nn::Tensor<T>& pred, std::span<const std::uint8_t> target, const ClassSet& classes = std::nullopt);

// Mean over classes of 1 - TI, TI = (TP + eps/2) / (TP + alpha*FP + beta*FN + eps/2)
// with soft TP = sum(p*g), FP = sum(p*(1-g)), FN = sum((1-p)*g).
template <class T>
nn::Tensor<T> tversky_loss(const nn::Tensor<T>& pred, std::span<const std::uint8_t> target, double alpha, double beta,
                           const ClassSet& classes = std::nullopt);

// Resolved class list; throws EmptyClassSet / InvalidArgument.
std::vector<int> resolve_classes(const ClassSet& classes, int num_classes);

}  // namespace ipseg::loss

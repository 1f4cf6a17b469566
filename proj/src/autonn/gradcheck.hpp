#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "autonn/tensor.hpp"

namespace ipseg::nn {

using DiffFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// Compares analytic backward against central differences for f.
///
/// The scalar probed is L(x) = sum(f(x) * r) with a fixed random r. For each
/// checked input and each of `directions` random directions v, the analytic
/// <dL/dx, v> is compared with (L(x + eps v) - L(x - eps v)) / (2 eps).
/// Returns the largest relative error seen. `checked[i] == false` leaves
/// input i out (it is still passed to f); empty means check all.
double finite_diff_check(const DiffFn& f, std::vector<Tensor<double>> inputs, double eps, std::uint64_t seed, int directions = 4,
                         std::vector<bool> checked = {});

// Central-difference partial derivative of eval() w.r.t. the scalar at `slot`.
// The slot is restored before returning.
double numeric_partial(const std::function<double()>& eval, double& slot, double eps);

}  // namespace ipseg::nn

// SPDX-License-Identifier: Apache-2.0
#pragma once

// Central finite-difference verification of every differentiable op and of
// the full decoder model, run in 64-bit precision.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ecctlin/tensor.hpp"

namespace ecctlin {

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
    bool ok = false;
};

// Analytic gradient of fn() w.r.t. every element of every leaf, compared
// against (f(x+eps) - f(x-eps)) / 2eps. Relative error uses a 1e-6 floor so
// near-zero gradients are judged by absolute error.
double max_grad_rel_error(std::vector<Tensor<double>> leaves, const std::function<Tensor<double>()>& fn,
                          double eps = 1e-5);

// Per-op and whole-model checks; tolerance is the pass threshold (default
// matches the 64-bit contract, 1e-4).
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed = 20240901, double tolerance = 1e-4);

}  // namespace ecctlin

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace vegcast::optimize {

/// Objective to minimize: returns f(x) and writes the gradient into `grad`.
using Objective = std::function<double(const std::vector<double>& x, std::vector<double>& grad)>;

struct LbfgsOptions {
    std::size_t memory = 8;
    std::size_t max_iterations = 300;
    double gradient_tolerance = 1e-6;
    double relative_tolerance = 1e-10;
};

struct LbfgsResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    bool converged = false;
};

/// Limited-memory BFGS restricted to the box [lower, upper]. Iterates are
/// projected onto the box and gradient components pinned at an active bound
/// are dropped from the search direction.
LbfgsResult minimize_lbfgs(const Objective& f, std::vector<double> x0, const std::vector<double>& lower,
                           const std::vector<double>& upper, const LbfgsOptions& options = {});

}  // namespace vegcast::optimize

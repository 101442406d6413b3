#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sapr/tensor.hpp"

namespace sapr {

struct GradCheckEntry {
    std::size_t coordinate;
    double analytic;
    double numeric;
    double rel_error;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

/// Compares the analytic gradient of a scalar-valued function against central
/// finite differences at `x`. `f` must be deterministic (freeze any gate
/// sampling outside of it). Checks all coordinates.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double h = 1e-3, double tol = 1e-4);

/// Same, restricted to the given coordinate subset.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double h, double tol, std::span<const std::size_t> coordinates);

} // namespace sapr

#include "sapr/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace sapr {

namespace {
// Relative error with a floor so near-zero coordinate pairs compare on an
// absolute scale instead of blowing up.
constexpr double kRelFloor = 1e-6;

double rel_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kRelFloor});
}
} // namespace

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double h, double tol) {
    std::vector<std::size_t> all(x.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return grad_check(f, x, h, tol, all);
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double h, double tol, std::span<const std::size_t> coordinates) {
    Tensor leaf = x.clone(/*requires_grad=*/true);
    Tensor loss = f(leaf);
    if (loss.size() != 1)
        throw ContractError("grad_check: f must be scalar-valued, got shape " +
                            shape_to_string(loss.shape()));
    GradMap grads;
    backward_into(loss, grads);
    std::span<const double> analytic = grads.grad(leaf);

    GradCheckReport report;
    report.tolerance = tol;
    std::vector<double> base(x.values().begin(), x.values().end());
    for (std::size_t c : coordinates) {
        if (c >= base.size())
            throw ContractError("grad_check: coordinate " + std::to_string(c) + " out of range");
        std::vector<double> probe = base;
        probe[c] = base[c] + h;
        const double up = f(Tensor::from_vector(x.shape(), probe)).item();
        probe[c] = base[c] - h;
        const double down = f(Tensor::from_vector(x.shape(), probe)).item();
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic.empty() ? 0.0 : analytic[c];
        GradCheckEntry e{c, a, numeric, rel_error(a, numeric)};
        report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
        report.entries.push_back(e);
    }
    report.passed = report.max_rel_error <= tol;
    return report;
}

} // namespace sapr

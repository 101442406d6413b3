#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sapr/tensor.hpp"

namespace sapr::detail {

// Backward rule: receives the producing node (for access to its value and
// parents), the gradient flowing into its output, and the sink to accumulate
// parent gradients into.
using BackwardFn =
    std::function<void(const Node& self, std::span<const double> out_grad, GradSink& sink)>;

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad; // lazily sized to value.size()
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    BackwardFn backward_fn;

    std::size_t size() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

// Wraps a freshly computed value into a tape node. requires_grad is inherited
// from the parents; the backward rule is dropped when nothing upstream needs
// gradients.
inline Tensor make_node(Shape shape, std::vector<double> value,
                        std::vector<NodePtr> parents, BackwardFn backward) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    for (const auto& p : parents) {
        if (p && p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    n->parents = std::move(parents);
    if (n->requires_grad) n->backward_fn = std::move(backward);
    return Tensor::from_node(std::move(n));
}

inline std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

} // namespace sapr::detail

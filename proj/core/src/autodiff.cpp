#include <unordered_set>

#include "node.hpp"
#include "sapr/tensor.hpp"

namespace sapr {

std::span<double> GradSink::grad_of_node(detail::Node* n) {
    if (map_) {
        auto& buf = (*map_)[n];
        if (buf.size() != n->value.size()) buf.assign(n->value.size(), 0.0);
        return buf;
    }
    n->ensure_grad();
    return n->grad;
}

std::span<double> GradSink::grad_of(const Tensor& t) { return grad_of_node(t.node().get()); }

// Walks the recorded tape once: postorder DFS yields a topological order
// (parents before children), then the reversed order guarantees every node's
// output gradient is complete before its backward rule fires. The sweep
// always works in a fresh local store and merges at the end, so repeated
// backward calls stay purely additive and never read stale sweep state.
class TapeWalker {
public:
    static void run(const Tensor& loss,
                    std::unordered_map<const detail::Node*, std::vector<double>>* destination) {
        if (!loss.defined()) throw ContractError("backward: undefined loss tensor");
        if (loss.size() != 1)
            throw ContractError("backward: loss must be scalar, got shape " +
                                shape_to_string(loss.shape()));
        detail::Node* root = loss.node().get();
        if (!root->requires_grad) return;

        std::vector<detail::Node*> order;
        std::unordered_set<const detail::Node*> visited;
        struct Frame {
            detail::Node* n;
            std::size_t next_parent;
        };
        std::vector<Frame> stack;
        stack.push_back({root, 0});
        visited.insert(root);
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next_parent < f.n->parents.size()) {
                detail::Node* p = f.n->parents[f.next_parent++].get();
                if (p && p->requires_grad && !visited.contains(p)) {
                    visited.insert(p);
                    stack.push_back({p, 0});
                }
            } else {
                order.push_back(f.n);
                stack.pop_back();
            }
        }

        std::unordered_map<const detail::Node*, std::vector<double>> sweep;
        GradSink sink(&sweep);
        sink.grad_of_node(root)[0] = 1.0;
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            detail::Node* n = *it;
            if (!n->backward_fn) continue;
            n->backward_fn(*n, sink.grad_of_node(n), sink);
        }

        for (auto& [node, grad] : sweep) {
            auto* n = const_cast<detail::Node*>(node);
            if (destination) {
                auto& dst = (*destination)[node];
                if (dst.size() != grad.size()) dst.assign(grad.size(), 0.0);
                for (std::size_t i = 0; i < grad.size(); ++i) dst[i] += grad[i];
            } else {
                n->ensure_grad();
                for (std::size_t i = 0; i < grad.size(); ++i) n->grad[i] += grad[i];
            }
        }
    }
};

void backward(const Tensor& loss) { TapeWalker::run(loss, nullptr); }

void backward_into(const Tensor& loss, GradMap& grads) { TapeWalker::run(loss, &grads.grads_); }

std::span<const double> GradMap::grad(const Tensor& t) const {
    auto it = grads_.find(t.node().get());
    if (it == grads_.end()) return {};
    return it->second;
}

bool GradMap::contains(const Tensor& t) const { return grads_.contains(t.node().get()); }

Tensor make_op(Shape shape, std::vector<double> value, std::span<const Tensor> inputs,
               std::function<void(std::span<const double>, GradSink&)> backward) {
    if (detail::shape_size(shape) != value.size())
        throw ShapeError("make_op: shape " + shape_to_string(shape) + " wants " +
                         std::to_string(detail::shape_size(shape)) + " elements, got " +
                         std::to_string(value.size()));
    std::vector<detail::NodePtr> parents;
    parents.reserve(inputs.size());
    for (const Tensor& t : inputs) parents.push_back(t.node());
    return detail::make_node(
        std::move(shape), std::move(value), std::move(parents),
        [fn = std::move(backward)](const detail::Node&, std::span<const double> g, GradSink& sink) {
            fn(g, sink);
        });
}

} // namespace sapr

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sapr/errors.hpp"

namespace sapr {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

namespace detail {
struct Node;
using NodePtr = std::shared_ptr<Node>;
} // namespace detail

class GradSink;

/// Dense row-major tensor of 64-bit floats with reverse-mode autodiff.
///
/// A Tensor is a cheap shared handle to an immutable value buffer plus an
/// optional gradient accumulator. Every operation records its inputs and a
/// backward rule, so the tape is rebuilt on each forward pass (define-by-run).
/// Values are never mutated once an op has consumed them; the exceptions are
/// `values_mut()` for initialization / optimizer updates between passes and
/// gradient accumulation during backward.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor ones(Shape shape, bool requires_grad = false);
    static Tensor from_vector(Shape shape, std::vector<double> data,
                              bool requires_grad = false);
    static Tensor from_span(Shape shape, std::span<const double> data,
                            bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const;
    std::size_t extent(std::size_t axis) const;
    std::size_t size() const;
    bool requires_grad() const;

    std::span<const double> values() const;
    /// Mutable access for initialization and optimizer steps. Never call on a
    /// tensor an active tape refers to.
    std::span<double> values_mut();

    double at(std::size_t i) const;
    double at(std::size_t i, std::size_t j) const;
    double at(std::size_t i, std::size_t j, std::size_t k) const;
    /// Value of a single-element tensor.
    double item() const;

    /// Accumulated gradient (zeros until a backward pass touches this tensor).
    std::span<const double> grad() const;
    void zero_grad();

    /// Deep copy as a fresh leaf (drops tape history).
    Tensor clone(bool requires_grad = false) const;

    /// Implementation handle; stable identity for GradMap keys.
    const detail::NodePtr& node() const { return node_; }
    static Tensor from_node(detail::NodePtr node) { return Tensor(std::move(node)); }

private:
    explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}
    detail::NodePtr node_;
};

/// Destination for gradient accumulation during a backward sweep. In default
/// mode it writes each node's own `grad` buffer; in map mode every gradient
/// lands in a caller-owned map, leaving all tensors untouched (this is what
/// makes parallel per-sample backward passes over shared weights safe).
class GradSink {
public:
    std::span<double> grad_of(const Tensor& t);
    std::span<double> grad_of_node(detail::Node* n);

private:
    friend class TapeWalker;

    explicit GradSink(std::unordered_map<const detail::Node*, std::vector<double>>* map)
        : map_(map) {}

    std::unordered_map<const detail::Node*, std::vector<double>>* map_;
};

/// Caller-owned gradient storage for `backward_into`.
class GradMap {
public:
    /// Gradient of `t` from the last backward_into; empty span if `t` was not
    /// reached.
    std::span<const double> grad(const Tensor& t) const;
    bool contains(const Tensor& t) const;
    void clear() { grads_.clear(); }

private:
    friend void backward_into(const Tensor&, GradMap&);
    std::unordered_map<const detail::Node*, std::vector<double>> grads_;
};

/// Reverse-mode sweep from a scalar loss. Visits each recorded operation
/// exactly once in reverse topological order and accumulates into the `grad`
/// buffer of every reachable tensor with `requires_grad`. Accumulation is
/// additive across calls until `zero_grad`.
void backward(const Tensor& loss);

/// As `backward`, but accumulates into `grads` instead of tensor buffers.
void backward_into(const Tensor& loss, GradMap& grads);

/// Builds a custom differentiable operation: `value` becomes the output,
/// `backward` receives the output gradient and accumulates into the inputs
/// via the sink. Inputs' values are captured by handle.
Tensor make_op(Shape shape, std::vector<double> value,
               std::span<const Tensor> inputs,
               std::function<void(std::span<const double>, GradSink&)> backward);

// --- primitive operations ------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// out = mul * a + shift, elementwise.
Tensor affine(const Tensor& a, double mul, double shift);
Tensor scale(const Tensor& a, double mul);

/// [m×k]·[k×n] → [m×n]. Backward: a.grad += g·bᵀ, b.grad += aᵀ·g.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

/// Row-stabilized softmax over the last axis of a 2-D tensor.
Tensor softmax_rows(const Tensor& a);
/// Rowwise standardization then per-column affine: gain/bias match the row
/// length.
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
/// Exact GELU, x·Φ(x).
Tensor gelu(const Tensor& a);
Tensor relu(const Tensor& a);
/// [m×n] + [n] with the vector added to every row.
Tensor add_row_broadcast(const Tensor& a, const Tensor& bias);

/// out row i = a row indices[i]; backward scatter-adds through the index map.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices);
Tensor slice_cols(const Tensor& a, std::size_t col_begin, std::size_t col_end);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

/// 2-D convolution over [C×H×W] with kernels [F×C×kh×kw], stride 1.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              std::size_t pad);
/// 2×2 max pooling, stride 2; extents must be even.
Tensor maxpool2(const Tensor& input);

/// Splits [C×S×S] into non-overlapping p×p patches in row-major patch order:
/// out[N×(C·p·p)] with N=(S/p)².
Tensor extract_patches(const Tensor& image, std::size_t patch);

/// Nearest-neighbour downscale of [C×S×S] to r×r placed at (off_y, off_x) on
/// a zero S×S canvas. Gradients route to the source pixels.
Tensor resize_pad_nearest(const Tensor& image, std::size_t r, std::size_t off_y,
                          std::size_t off_x);

} // namespace sapr

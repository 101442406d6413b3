#include "sapr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "node.hpp"

namespace sapr {

using detail::make_node;
using detail::Node;
using detail::NodePtr;

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

void check_positive_extents(const Shape& shape) {
    for (std::size_t e : shape) {
        if (e == 0) throw ShapeError("tensor extent must be positive, got shape " + shape_to_string(shape));
    }
}

void check_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2)
        throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + shape_to_string(t.shape()));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
}

// out[m×n] += a[m×k] · b[k×n], all row-major contiguous.
void matmul_accumulate(const double* a, const double* b, double* out,
                       std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* orow = out + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

std::vector<double> transpose_copy(const double* a, std::size_t m, std::size_t n) {
    std::vector<double> t(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) t[j * m + i] = a[i * n + j];
    return t;
}

} // namespace

// --- Tensor basics --------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::ones(Shape shape, bool requires_grad) {
    return full(std::move(shape), 1.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    check_positive_extents(shape);
    auto n = std::make_shared<Node>();
    n->value.assign(detail::shape_size(shape), value);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> data, bool requires_grad) {
    check_positive_extents(shape);
    if (detail::shape_size(shape) != data.size())
        throw ShapeError("from_vector: shape " + shape_to_string(shape) + " wants " +
                         std::to_string(detail::shape_size(shape)) + " elements, got " +
                         std::to_string(data.size()));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from_span(Shape shape, std::span<const double> data, bool requires_grad) {
    return from_vector(std::move(shape), std::vector<double>(data.begin(), data.end()), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_vector({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::rank() const { return node_->shape.size(); }
std::size_t Tensor::extent(std::size_t axis) const { return node_->shape.at(axis); }
std::size_t Tensor::size() const { return node_->value.size(); }
bool Tensor::requires_grad() const { return node_->requires_grad; }

std::span<const double> Tensor::values() const { return node_->value; }
std::span<double> Tensor::values_mut() { return node_->value; }

double Tensor::at(std::size_t i) const { return node_->value.at(i); }

double Tensor::at(std::size_t i, std::size_t j) const {
    const Shape& s = node_->shape;
    if (s.size() != 2) throw ShapeError("at(i,j) on tensor of shape " + shape_to_string(s));
    return node_->value[i * s[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
    const Shape& s = node_->shape;
    if (s.size() != 3) throw ShapeError("at(i,j,k) on tensor of shape " + shape_to_string(s));
    return node_->value[(i * s[1] + j) * s[2] + k];
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() on non-scalar tensor of shape " + shape_to_string(shape()));
    return node_->value[0];
}

std::span<const double> Tensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone(bool requires_grad) const {
    return from_vector(shape(), std::vector<double>(node_->value.begin(), node_->value.end()), requires_grad);
}

// --- elementwise ops --------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    NodePtr pa = a.node(), pb = b.node();
    return make_node(a.shape(), std::move(out), {pa, pb},
                     [pa, pb](const Node&, std::span<const double> g, GradSink& sink) {
                         if (pa->requires_grad) {
                             auto ga = sink.grad_of_node(pa.get());
                             for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                         }
                         if (pb->requires_grad) {
                             auto gb = sink.grad_of_node(pb.get());
                             for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                         }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    NodePtr pa = a.node(), pb = b.node();
    return make_node(a.shape(), std::move(out), {pa, pb},
                     [pa, pb](const Node&, std::span<const double> g, GradSink& sink) {
                         if (pa->requires_grad) {
                             auto ga = sink.grad_of_node(pa.get());
                             for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                         }
                         if (pb->requires_grad) {
                             auto gb = sink.grad_of_node(pb.get());
                             for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                         }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    NodePtr pa = a.node(), pb = b.node();
    return make_node(a.shape(), std::move(out), {pa, pb},
                     [pa, pb](const Node&, std::span<const double> g, GradSink& sink) {
                         if (pa->requires_grad) {
                             auto ga = sink.grad_of_node(pa.get());
                             for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * pb->value[i];
                         }
                         if (pb->requires_grad) {
                             auto gb = sink.grad_of_node(pb.get());
                             for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * pa->value[i];
                         }
                     });
}

Tensor affine(const Tensor& a, double mul, double shift) {
    const auto& av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mul * av[i] + shift;
    NodePtr pa = a.node();
    return make_node(a.shape(), std::move(out), {pa},
                     [pa, mul](const Node&, std::span<const double> g, GradSink& sink) {
                         auto ga = sink.grad_of_node(pa.get());
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += mul * g[i];
                     });
}

Tensor scale(const Tensor& a, double mul) { return affine(a, mul, 0.0); }

// --- matmul and layout ops --------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    const std::size_t m = a.extent(0), k = a.extent(1);
    const std::size_t k2 = b.extent(0), n = b.extent(1);
    if (k != k2)
        throw ShapeError("matmul: inner extents differ: " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    std::vector<double> out(m * n, 0.0);
    matmul_accumulate(a.values().data(), b.values().data(), out.data(), m, k, n);
    NodePtr pa = a.node(), pb = b.node();
    return make_node({m, n}, std::move(out), {pa, pb},
                     [pa, pb, m, k, n](const Node&, std::span<const double> g, GradSink& sink) {
                         if (pa->requires_grad) {
                             // da += g · bᵀ
                             auto bt = transpose_copy(pb->value.data(), k, n);
                             auto ga = sink.grad_of_node(pa.get());
                             matmul_accumulate(g.data(), bt.data(), ga.data(), m, n, k);
                         }
                         if (pb->requires_grad) {
                             // db += aᵀ · g
                             auto at = transpose_copy(pa->value.data(), m, k);
                             auto gb = sink.grad_of_node(pb.get());
                             matmul_accumulate(at.data(), g.data(), gb.data(), k, m, n);
                         }
                     });
}

Tensor transpose(const Tensor& a) {
    check_rank2(a, "transpose");
    const std::size_t m = a.extent(0), n = a.extent(1);
    std::vector<double> out = transpose_copy(a.values().data(), m, n);
    NodePtr pa = a.node();
    return make_node({n, m}, std::move(out), {pa},
                     [pa, m, n](const Node&, std::span<const double> g, GradSink& sink) {
                         auto ga = sink.grad_of_node(pa.get());
                         for (std::size_t j = 0; j < n; ++j)
                             for (std::size_t i = 0; i < m; ++i) ga[i * n + j] += g[j * m + i];
                     });
}

Tensor reshape(const Tensor& a, Shape shape) {
    check_positive_extents(shape);
    if (detail::shape_size(shape) != a.size())
        throw ShapeError("reshape: cannot view " + shape_to_string(a.shape()) + " as " + shape_to_string(shape));
    std::vector<double> out(a.values().begin(), a.values().end());
    NodePtr pa = a.node();
    return make_node(std::move(shape), std::move(out), {pa},
                     [pa](const Node&, std::span<const double> g, GradSink& sink) {
                         auto ga = sink.grad_of_node(pa.get());
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                     });
}

// --- nonlinearities ----------------------------------------------------------

Tensor softmax_rows(const Tensor& a) {
    check_rank2(a, "softmax_rows");
    const std::size_t m = a.extent(0), n = a.extent(1);
    const auto av = a.values();
    for (double v : av)
        if (!std::isfinite(v)) throw NumericError("softmax_rows: non-finite input entry");
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = av.data() + i * n;
        double* orow = out.data() + i * n;
        double mx = row[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        for (std::size_t j = 0; j < n; ++j) orow[j] /= sum;
    }
    NodePtr pa = a.node();
    return make_node({m, n}, std::move(out), {pa},
                     [pa, m, n](const Node& self, std::span<const double> g, GradSink& sink) {
                         auto ga = sink.grad_of_node(pa.get());
                         for (std::size_t i = 0; i < m; ++i) {
                             const double* y = self.value.data() + i * n;
                             const double* gi = g.data() + i * n;
                             double dot = 0.0;
                             for (std::size_t j = 0; j < n; ++j) dot += gi[j] * y[j];
                             for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += y[j] * (gi[j] - dot);
                         }
                     });
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
    check_rank2(a, "layer_norm");
    const std::size_t m = a.extent(0), n = a.extent(1);
    if (n == 0) throw ShapeError("layer_norm: zero-length row");
    if (gain.shape() != Shape{n} || bias.shape() != Shape{n})
        throw ShapeError("layer_norm: gain/bias must have shape [" + std::to_string(n) + "], got " +
                         shape_to_string(gain.shape()) + " and " + shape_to_string(bias.shape()));
    const auto av = a.values();
    const auto gv = gain.values();
    const auto bv = bias.values();
    std::vector<double> out(m * n);
    std::vector<double> mean(m), rstd(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = av.data() + i * n;
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += row[j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(n);
        const double rs = 1.0 / std::sqrt(var + eps);
        mean[i] = mu;
        rstd[i] = rs;
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = (row[j] - mu) * rs * gv[j] + bv[j];
    }
    NodePtr pa = a.node(), pg = gain.node(), pb = bias.node();
    return make_node(
        {m, n}, std::move(out), {pa, pg, pb},
        [pa, pg, pb, m, n, mean = std::move(mean),
         rstd = std::move(rstd)](const Node&, std::span<const double> g, GradSink& sink) {
            for (std::size_t i = 0; i < m; ++i) {
                const double* row = pa->value.data() + i * n;
                const double* gi = g.data() + i * n;
                const double mu = mean[i], rs = rstd[i];
                if (pa->requires_grad) {
                    auto ga = sink.grad_of_node(pa.get());
                    double s1 = 0.0, s2 = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const double xhat = (row[j] - mu) * rs;
                        const double dyg = gi[j] * pg->value[j];
                        s1 += dyg;
                        s2 += dyg * xhat;
                    }
                    s1 /= static_cast<double>(n);
                    s2 /= static_cast<double>(n);
                    for (std::size_t j = 0; j < n; ++j) {
                        const double xhat = (row[j] - mu) * rs;
                        const double dyg = gi[j] * pg->value[j];
                        ga[i * n + j] += rs * (dyg - s1 - xhat * s2);
                    }
                }
                if (pg->requires_grad) {
                    auto gg = sink.grad_of_node(pg.get());
                    for (std::size_t j = 0; j < n; ++j) gg[j] += gi[j] * (row[j] - mu) * rs;
                }
                if (pb->requires_grad) {
                    auto gb = sink.grad_of_node(pb.get());
                    for (std::size_t j = 0; j < n; ++j) gb[j] += gi[j];
                }
            }
        });
}

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
} // namespace

Tensor gelu(const Tensor& a) {
    const auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = av[i];
        out[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    }
    NodePtr pa = a.node();
    return make_node(a.shape(), std::move(out), {pa},
                     [pa](const Node&, std::span<const double> g, GradSink& sink) {
                         auto ga = sink.grad_of_node(pa.get());
                         for (std::size_t i = 0; i < g.size(); ++i) {
                             const double x = pa->value[i];
                             const double phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                             const double dens = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                             ga[i] += g[i] * (phi + x * dens);
                         }
                     });
}

Tensor relu(const Tensor& a) {
    const auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
    NodePtr pa = a.node();
    return make_node(a.shape(), std::move(out), {pa},
                     [pa](const Node&, std::span<const double> g, GradSink& sink) {
                         auto ga = sink.grad_of_node(pa.get());
                         for (std::size_t i = 0; i < g.size(); ++i)
                             if (pa->value[i] > 0.0) ga[i] += g[i];
                     });
}

Tensor add_row_broadcast(const Tensor& a, const Tensor& bias) {
    check_rank2(a, "add_row_broadcast");
    const std::size_t m = a.extent(0), n = a.extent(1);
    if (bias.shape() != Shape{n})
        throw ShapeError("add_row_broadcast: bias shape " + shape_to_string(bias.shape()) +
                         " does not match row length " + std::to_string(n));
    const auto av = a.values();
    const auto bv = bias.values();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] + bv[j];
    NodePtr pa = a.node(), pb = bias.node();
    return make_node({m, n}, std::move(out), {pa, pb},
                     [pa, pb, m, n](const Node&, std::span<const double> g, GradSink& sink) {
                         if (pa->requires_grad) {
                             auto ga = sink.grad_of_node(pa.get());
                             for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                         }
                         if (pb->requires_grad) {
                             auto gb = sink.grad_of_node(pb.get());
                             for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
                         }
                     });
}

// --- gather / slice / concat --------------------------------------------------

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices) {
    check_rank2(a, "gather_rows");
    const std::size_t m = a.extent(0), n = a.extent(1);
    for (std::size_t idx : indices)
        if (idx >= m)
            throw ContractError("gather_rows: index " + std::to_string(idx) + " out of range for " +
                                shape_to_string(a.shape()));
    const std::size_t r = indices.size();
    if (r == 0) throw ShapeError("gather_rows: empty index sequence");
    const auto av = a.values();
    std::vector<double> out(r * n);
    for (std::size_t i = 0; i < r; ++i)
        std::copy_n(av.data() + indices[i] * n, n, out.data() + i * n);
    NodePtr pa = a.node();
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return make_node({r, n}, std::move(out), {pa},
                     [pa, n, idx = std::move(idx)](const Node&, std::span<const double> g, GradSink& sink) {
                         auto ga = sink.grad_of_node(pa.get());
                         for (std::size_t i = 0; i < idx.size(); ++i) {
                             const double* gi = g.data() + i * n;
                             double* gr = ga.data() + idx[i] * n;
                             for (std::size_t j = 0; j < n; ++j) gr[j] += gi[j];
                         }
                     });
}

Tensor slice_cols(const Tensor& a, std::size_t col_begin, std::size_t col_end) {
    check_rank2(a, "slice_cols");
    const std::size_t m = a.extent(0), n = a.extent(1);
    if (col_begin >= col_end || col_end > n)
        throw ShapeError("slice_cols: invalid range [" + std::to_string(col_begin) + "," +
                         std::to_string(col_end) + ") for " + shape_to_string(a.shape()));
    const std::size_t w = col_end - col_begin;
    const auto av = a.values();
    std::vector<double> out(m * w);
    for (std::size_t i = 0; i < m; ++i)
        std::copy_n(av.data() + i * n + col_begin, w, out.data() + i * w);
    NodePtr pa = a.node();
    return make_node({m, w}, std::move(out), {pa},
                     [pa, m, n, w, col_begin](const Node&, std::span<const double> g, GradSink& sink) {
                         auto ga = sink.grad_of_node(pa.get());
                         for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < w; ++j)
                                 ga[i * n + col_begin + j] += g[i * w + j];
                     });
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    const std::size_t m = parts[0].extent(0);
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        check_rank2(p, "concat_cols");
        if (p.extent(0) != m)
            throw ShapeError("concat_cols: row count mismatch " + shape_to_string(p.shape()));
        total += p.extent(1);
    }
    std::vector<double> out(m * total);
    std::size_t off = 0;
    std::vector<NodePtr> parents;
    std::vector<std::size_t> widths;
    for (const Tensor& p : parts) {
        const std::size_t w = p.extent(1);
        const auto pv = p.values();
        for (std::size_t i = 0; i < m; ++i)
            std::copy_n(pv.data() + i * w, w, out.data() + i * total + off);
        off += w;
        parents.push_back(p.node());
        widths.push_back(w);
    }
    auto parents_copy = parents;
    return make_node({m, total}, std::move(out), std::move(parents),
                     [ps = std::move(parents_copy), widths = std::move(widths), m,
                      total](const Node&, std::span<const double> g, GradSink& sink) {
                         std::size_t off = 0;
                         for (std::size_t pi = 0; pi < ps.size(); ++pi) {
                             const std::size_t w = widths[pi];
                             if (ps[pi]->requires_grad) {
                                 auto gp = sink.grad_of_node(ps[pi].get());
                                 for (std::size_t i = 0; i < m; ++i)
                                     for (std::size_t j = 0; j < w; ++j)
                                         gp[i * w + j] += g[i * total + off + j];
                             }
                             off += w;
                         }
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no parts");
    const std::size_t n = parts[0].extent(1);
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        check_rank2(p, "concat_rows");
        if (p.extent(1) != n)
            throw ShapeError("concat_rows: column count mismatch " + shape_to_string(p.shape()));
        total += p.extent(0);
    }
    std::vector<double> out(total * n);
    std::size_t row = 0;
    std::vector<NodePtr> parents;
    std::vector<std::size_t> heights;
    for (const Tensor& p : parts) {
        const auto pv = p.values();
        std::copy(pv.begin(), pv.end(), out.begin() + static_cast<std::ptrdiff_t>(row * n));
        row += p.extent(0);
        parents.push_back(p.node());
        heights.push_back(p.extent(0));
    }
    auto parents_copy = parents;
    return make_node({total, n}, std::move(out), std::move(parents),
                     [ps = std::move(parents_copy), heights = std::move(heights),
                      n](const Node&, std::span<const double> g, GradSink& sink) {
                         std::size_t row = 0;
                         for (std::size_t pi = 0; pi < ps.size(); ++pi) {
                             const std::size_t h = heights[pi];
                             if (ps[pi]->requires_grad) {
                                 auto gp = sink.grad_of_node(ps[pi].get());
                                 for (std::size_t i = 0; i < h * n; ++i) gp[i] += g[row * n + i];
                             }
                             row += h;
                         }
                     });
}

// --- reductions ----------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
    const auto av = a.values();
    double s = 0.0;
    for (double v : av) s += v;
    NodePtr pa = a.node();
    return make_node({1}, {s}, {pa},
                     [pa](const Node&, std::span<const double> g, GradSink& sink) {
                         auto ga = sink.grad_of_node(pa.get());
                         for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
                     });
}

Tensor mean_all(const Tensor& a) {
    const auto av = a.values();
    double s = 0.0;
    for (double v : av) s += v;
    const double inv = 1.0 / static_cast<double>(av.size());
    NodePtr pa = a.node();
    return make_node({1}, {s * inv}, {pa},
                     [pa, inv](const Node&, std::span<const double> g, GradSink& sink) {
                         auto ga = sink.grad_of_node(pa.get());
                         for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * inv;
                     });
}

// --- image-domain ops ------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t pad) {
    if (input.rank() != 3)
        throw ShapeError("conv2d: input must be [C×H×W], got " + shape_to_string(input.shape()));
    if (kernels.rank() != 4)
        throw ShapeError("conv2d: kernels must be [F×C×kh×kw], got " + shape_to_string(kernels.shape()));
    const std::size_t c = input.extent(0), h = input.extent(1), w = input.extent(2);
    const std::size_t f = kernels.extent(0), kc = kernels.extent(1), kh = kernels.extent(2),
                      kw = kernels.extent(3);
    if (kc != c)
        throw ShapeError("conv2d: channel mismatch " + shape_to_string(input.shape()) + " vs " +
                         shape_to_string(kernels.shape()));
    if (bias.shape() != Shape{f})
        throw ShapeError("conv2d: bias must be [" + std::to_string(f) + "], got " +
                         shape_to_string(bias.shape()));
    if (h + 2 * pad < kh || w + 2 * pad < kw) throw ShapeError("conv2d: kernel larger than padded input");
    const std::size_t oh = h + 2 * pad - kh + 1, ow = w + 2 * pad - kw + 1;

    const auto xv = input.values();
    const auto kv = kernels.values();
    const auto bv = bias.values();
    std::vector<double> out(f * oh * ow);
    for (std::size_t fo = 0; fo < f; ++fo) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double acc = bv[fo];
                for (std::size_t ci = 0; ci < c; ++ci) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) -
                                                  static_cast<std::ptrdiff_t>(pad);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) -
                                                      static_cast<std::ptrdiff_t>(pad);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            acc += xv[(ci * h + iy) * w + ix] * kv[((fo * c + ci) * kh + ky) * kw + kx];
                        }
                    }
                }
                out[(fo * oh + oy) * ow + ox] = acc;
            }
        }
    }
    NodePtr px = input.node(), pk = kernels.node(), pb = bias.node();
    return make_node(
        {f, oh, ow}, std::move(out), {px, pk, pb},
        [px, pk, pb, c, h, w, f, kh, kw, oh, ow, pad](const Node&, std::span<const double> g, GradSink& sink) {
            const bool need_x = px->requires_grad;
            const bool need_k = pk->requires_grad;
            const bool need_b = pb->requires_grad;
            std::span<double> gx, gk, gb;
            if (need_x) gx = sink.grad_of_node(px.get());
            if (need_k) gk = sink.grad_of_node(pk.get());
            if (need_b) gb = sink.grad_of_node(pb.get());
            for (std::size_t fo = 0; fo < f; ++fo) {
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const double go = g[(fo * oh + oy) * ow + ox];
                        if (go == 0.0) continue;
                        if (need_b) gb[fo] += go;
                        for (std::size_t ci = 0; ci < c; ++ci) {
                            for (std::size_t ky = 0; ky < kh; ++ky) {
                                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) -
                                                          static_cast<std::ptrdiff_t>(pad);
                                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                                for (std::size_t kx = 0; kx < kw; ++kx) {
                                    const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) -
                                                              static_cast<std::ptrdiff_t>(pad);
                                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                    const std::size_t xi = (ci * h + iy) * w + ix;
                                    const std::size_t ki = ((fo * c + ci) * kh + ky) * kw + kx;
                                    if (need_x) gx[xi] += go * pk->value[ki];
                                    if (need_k) gk[ki] += go * px->value[xi];
                                }
                            }
                        }
                    }
                }
            }
        });
}

Tensor maxpool2(const Tensor& input) {
    if (input.rank() != 3)
        throw ShapeError("maxpool2: input must be [C×H×W], got " + shape_to_string(input.shape()));
    const std::size_t c = input.extent(0), h = input.extent(1), w = input.extent(2);
    if (h % 2 != 0 || w % 2 != 0)
        throw ShapeError("maxpool2: extents must be even, got " + shape_to_string(input.shape()));
    const std::size_t oh = h / 2, ow = w / 2;
    const auto xv = input.values();
    std::vector<double> out(c * oh * ow);
    std::vector<std::size_t> argmax(c * oh * ow);
    for (std::size_t ci = 0; ci < c; ++ci) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                std::size_t best = (ci * h + 2 * oy) * w + 2 * ox;
                double bv = xv[best];
                for (std::size_t dy = 0; dy < 2; ++dy) {
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = (ci * h + 2 * oy + dy) * w + 2 * ox + dx;
                        if (xv[idx] > bv) {
                            bv = xv[idx];
                            best = idx;
                        }
                    }
                }
                out[(ci * oh + oy) * ow + ox] = bv;
                argmax[(ci * oh + oy) * ow + ox] = best;
            }
        }
    }
    NodePtr px = input.node();
    return make_node({c, oh, ow}, std::move(out), {px},
                     [px, argmax = std::move(argmax)](const Node&, std::span<const double> g, GradSink& sink) {
                         auto gx = sink.grad_of_node(px.get());
                         for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i]] += g[i];
                     });
}

Tensor extract_patches(const Tensor& image, std::size_t patch) {
    if (image.rank() != 3)
        throw ShapeError("extract_patches: image must be [C×S×S], got " + shape_to_string(image.shape()));
    const std::size_t c = image.extent(0), s = image.extent(1);
    if (image.extent(2) != s)
        throw ShapeError("extract_patches: image must be square, got " + shape_to_string(image.shape()));
    if (patch == 0 || s % patch != 0)
        throw ShapeError("extract_patches: patch size " + std::to_string(patch) +
                         " does not divide image size " + std::to_string(s));
    const std::size_t grid = s / patch;
    const std::size_t num = grid * grid;
    const std::size_t dim = c * patch * patch;
    const auto xv = image.values();
    std::vector<double> out(num * dim);
    for (std::size_t py = 0; py < grid; ++py)
        for (std::size_t px_ = 0; px_ < grid; ++px_)
            for (std::size_t ci = 0; ci < c; ++ci)
                for (std::size_t iy = 0; iy < patch; ++iy)
                    for (std::size_t ix = 0; ix < patch; ++ix) {
                        const std::size_t row = py * grid + px_;
                        const std::size_t col = (ci * patch + iy) * patch + ix;
                        out[row * dim + col] = xv[(ci * s + py * patch + iy) * s + px_ * patch + ix];
                    }
    NodePtr pi = image.node();
    return make_node({num, dim}, std::move(out), {pi},
                     [pi, c, s, patch, grid, dim](const Node&, std::span<const double> g, GradSink& sink) {
                         auto gx = sink.grad_of_node(pi.get());
                         for (std::size_t py = 0; py < grid; ++py)
                             for (std::size_t px_ = 0; px_ < grid; ++px_)
                                 for (std::size_t ci = 0; ci < c; ++ci)
                                     for (std::size_t iy = 0; iy < patch; ++iy)
                                         for (std::size_t ix = 0; ix < patch; ++ix) {
                                             const std::size_t row = py * grid + px_;
                                             const std::size_t col = (ci * patch + iy) * patch + ix;
                                             gx[(ci * s + py * patch + iy) * s + px_ * patch + ix] +=
                                                 g[row * dim + col];
                                         }
                     });
}

Tensor resize_pad_nearest(const Tensor& image, std::size_t r, std::size_t off_y, std::size_t off_x) {
    if (image.rank() != 3)
        throw ShapeError("resize_pad_nearest: image must be [C×S×S], got " + shape_to_string(image.shape()));
    const std::size_t c = image.extent(0), s = image.extent(1);
    if (image.extent(2) != s)
        throw ShapeError("resize_pad_nearest: image must be square, got " + shape_to_string(image.shape()));
    if (r == 0 || r > s || off_y + r > s || off_x + r > s)
        throw ContractError("resize_pad_nearest: placement " + std::to_string(r) + "@(" +
                            std::to_string(off_y) + "," + std::to_string(off_x) + ") exceeds canvas " +
                            std::to_string(s));
    const auto xv = image.values();
    std::vector<double> out(c * s * s, 0.0);
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t i = 0; i < r; ++i) {
            const std::size_t sy = i * s / r;
            for (std::size_t j = 0; j < r; ++j) {
                const std::size_t sx = j * s / r;
                out[(ci * s + off_y + i) * s + off_x + j] = xv[(ci * s + sy) * s + sx];
            }
        }
    NodePtr pi = image.node();
    return make_node({c, s, s}, std::move(out), {pi},
                     [pi, c, s, r, off_y, off_x](const Node&, std::span<const double> g, GradSink& sink) {
                         auto gx = sink.grad_of_node(pi.get());
                         for (std::size_t ci = 0; ci < c; ++ci)
                             for (std::size_t i = 0; i < r; ++i) {
                                 const std::size_t sy = i * s / r;
                                 for (std::size_t j = 0; j < r; ++j) {
                                     const std::size_t sx = j * s / r;
                                     gx[(ci * s + sy) * s + sx] +=
                                         g[(ci * s + off_y + i) * s + off_x + j];
                                 }
                             }
                     });
}

} // namespace sapr

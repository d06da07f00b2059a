#pragma once

// Minimal reverse-mode automatic differentiation over dense 2-D tensors.
//
// A Value is a shared handle to a node holding forward data, an accumulated
// gradient, its parents and a backward closure. Graphs are built by the free
// functions below and differentiated with backward(). A graph belongs to one
// thread for the duration of a forward/backward pass.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace deepglstm::ad {

template <class T>
struct Node {
    Tensor<T> data;
    Tensor<T> grad;  // empty until first accumulation
    bool requires_grad = false;
    bool is_leaf = true;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    Tensor<T>& grad_buffer() {
        if (grad.empty() && !data.empty()) grad = Tensor<T>(data.shape());
        return grad;
    }
};

template <class T>
class Value {
public:
    Value() = default;
    explicit Value(std::shared_ptr<Node<T>> n) : n_(std::move(n)) {}

    static Value leaf(Tensor<T> data, bool requires_grad = true) {
        auto n = std::make_shared<Node<T>>();
        n->data = std::move(data);
        n->requires_grad = requires_grad;
        return Value(std::move(n));
    }
    static Value constant(Tensor<T> data) { return leaf(std::move(data), false); }

    bool valid() const { return static_cast<bool>(n_); }
    const Tensor<T>& data() const { return n_->data; }
    Tensor<T>& mutable_data() { return n_->data; }
    const Shape& shape() const { return n_->data.shape(); }
    bool requires_grad() const { return n_->requires_grad; }

    /// Gradient; an all-zero tensor of the data's shape if nothing was accumulated yet.
    const Tensor<T>& grad() const { return n_->grad_buffer(); }
    Tensor<T>& mutable_grad() { return n_->grad_buffer(); }
    void zero_grad() { n_->grad = Tensor<T>(); }

    /// Scalar value of a 1x1 tensor.
    T item() const {
        if (n_->data.size() != 1) throw ShapeMismatch("item() on " + shape().str());
        return n_->data[0];
    }

    Node<T>* node() const { return n_.get(); }
    const std::shared_ptr<Node<T>>& ptr() const { return n_; }

private:
    std::shared_ptr<Node<T>> n_;
};

namespace detail {

template <class T>
Value<T> make(Tensor<T> data, const char* op, std::vector<Value<T>> parents, std::function<void(Node<T>&)> bw) {
    auto n = std::make_shared<Node<T>>();
    n->data = std::move(data);
    n->op = op;
    n->is_leaf = false;
    for (const auto& p : parents) {
        n->requires_grad = n->requires_grad || p.requires_grad();
        n->parents.push_back(p.ptr());
    }
    if (n->requires_grad) n->backward = std::move(bw);
    return Value<T>(std::move(n));
}

template <class T>
void require_same(const Value<T>& a, const Value<T>& b, const char* op) {
    if (a.shape() != b.shape()) throw ShapeMismatch(std::string(op) + ": " + a.shape().str() + " vs " + b.shape().str());
}

template <class T>
T sigmoid(T x) {
    return T{1} / (T{1} + std::exp(-x));
}

}  // namespace detail

template <class T>
Value<T> matmul(const Value<T>& a, const Value<T>& b) {
    if (a.shape().cols != b.shape().rows)
        throw ShapeMismatch("matmul: " + a.shape().str() + " x " + b.shape().str());
    const std::size_t m = a.shape().rows, k = a.shape().cols, n = b.shape().cols;
    Tensor<T> out(m, n);
    kernels::matmul(a.data().data(), b.data().data(), out.data(), m, k, n, false);
    return detail::make<T>(std::move(out), "matmul", {a, b}, [m, k, n](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            std::vector<T> scratch;
            kernels::matmul_nt_acc(self.grad.data(), pb.data.data(), pa.grad_buffer().data(), m, n, k, scratch);
        }
        if (pb.requires_grad) kernels::matmul_tn_acc(pa.data.data(), self.grad.data(), pb.grad_buffer().data(), m, k, n);
    });
}

template <class T>
Value<T> add(const Value<T>& a, const Value<T>& b) {
    detail::require_same(a, b, "add");
    Tensor<T> out = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i];
    return detail::make<T>(std::move(out), "add", {a, b}, [](Node<T>& self) {
        for (auto& p : self.parents) {
            if (!p->requires_grad) continue;
            auto& g = p->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

/// a (m x n) plus a 1 x n row added to every row.
template <class T>
Value<T> add_row(const Value<T>& a, const Value<T>& row) {
    if (row.shape().rows != 1 || row.shape().cols != a.shape().cols)
        throw ShapeMismatch("add_row: " + a.shape().str() + " + " + row.shape().str());
    Tensor<T> out = a.data();
    const std::size_t n = out.cols();
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < n; ++c) out(r, c) += row.data()[c];
    return detail::make<T>(std::move(out), "add_row", {a, row}, [](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pr = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pr.requires_grad) {
            auto& g = pr.grad_buffer();
            for (std::size_t r = 0; r < self.grad.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) g[c] += self.grad(r, c);
        }
    });
}

template <class T>
Value<T> mul(const Value<T>& a, const Value<T>& b) {
    detail::require_same(a, b, "mul");
    Tensor<T> out = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.data()[i];
    return detail::make<T>(std::move(out), "mul", {a, b}, [](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
        }
    });
}

template <class T>
Value<T> scale(const Value<T>& a, T s) {
    Tensor<T> out = a.data();
    for (auto& v : out.flat()) v *= s;
    return detail::make<T>(std::move(out), "scale", {a}, [s](Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
    });
}

/// Sum of all entries as a 1x1 value.
template <class T>
Value<T> sum(const Value<T>& a) {
    T s{};
    for (T v : a.data().flat()) s += v;
    return detail::make<T>(Tensor<T>(1, 1, s), "sum", {a}, [](Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (auto& v : g.flat()) v += self.grad[0];
    });
}

template <class T>
Value<T> relu(const Value<T>& a) {
    Tensor<T> out = a.data();
    for (auto& v : out.flat()) v = v > T{} ? v : T{};
    return detail::make<T>(std::move(out), "relu", {a}, [](Node<T>& self) {
        auto& p = *self.parents[0];
        auto& g = p.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (p.data[i] > T{}) g[i] += self.grad[i];
    });
}

template <class T>
Value<T> sigmoid(const Value<T>& a) {
    Tensor<T> out = a.data();
    for (auto& v : out.flat()) v = detail::sigmoid(v);
    return detail::make<T>(std::move(out), "sigmoid", {a}, [](Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const T s = self.data[i];
            g[i] += self.grad[i] * s * (T{1} - s);
        }
    });
}

template <class T>
Value<T> tanh(const Value<T>& a) {
    Tensor<T> out = a.data();
    for (auto& v : out.flat()) v = std::tanh(v);
    return detail::make<T>(std::move(out), "tanh", {a}, [](Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const T t = self.data[i];
            g[i] += self.grad[i] * (T{1} - t * t);
        }
    });
}

/// Concatenation along rows (axis 0) or columns (axis 1).
template <class T>
Value<T> concat(const std::vector<Value<T>>& parts, int axis) {
    if (parts.empty()) throw ShapeMismatch("concat of nothing");
    if (axis != 0 && axis != 1) throw ShapeMismatch("concat axis must be 0 or 1");
    std::size_t rows = 0, cols = 0;
    for (const auto& p : parts) {
        if (axis == 1) {
            if (p.shape().rows != parts[0].shape().rows)
                throw ShapeMismatch("concat(axis=1): " + parts[0].shape().str() + " vs " + p.shape().str());
            cols += p.shape().cols;
        } else {
            if (p.shape().cols != parts[0].shape().cols)
                throw ShapeMismatch("concat(axis=0): " + parts[0].shape().str() + " vs " + p.shape().str());
            rows += p.shape().rows;
        }
    }
    if (axis == 1) rows = parts[0].shape().rows;
    else cols = parts[0].shape().cols;

    Tensor<T> out(rows, cols);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const auto& d = p.data();
        for (std::size_t r = 0; r < d.rows(); ++r)
            for (std::size_t c = 0; c < d.cols(); ++c) {
                if (axis == 1) out(r, offset + c) = d(r, c);
                else out(offset + r, c) = d(r, c);
            }
        offset += axis == 1 ? d.cols() : d.rows();
    }
    return detail::make<T>(std::move(out), "concat", parts, [axis](Node<T>& self) {
        std::size_t off = 0;
        for (auto& p : self.parents) {
            const std::size_t pr = p->data.rows(), pc = p->data.cols();
            if (p->requires_grad) {
                auto& g = p->grad_buffer();
                for (std::size_t r = 0; r < pr; ++r)
                    for (std::size_t c = 0; c < pc; ++c)
                        g(r, c) += axis == 1 ? self.grad(r, off + c) : self.grad(off + r, c);
            }
            off += axis == 1 ? pc : pr;
        }
    });
}

/// Columns [begin, end) of a.
template <class T>
Value<T> slice_cols(const Value<T>& a, std::size_t begin, std::size_t end) {
    if (begin > end || end > a.shape().cols) throw ShapeMismatch("slice_cols out of range on " + a.shape().str());
    const std::size_t w = end - begin;
    Tensor<T> out(a.shape().rows, w);
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < w; ++c) out(r, c) = a.data()(r, begin + c);
    return detail::make<T>(std::move(out), "slice_cols", {a}, [begin, w](Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t r = 0; r < self.grad.rows(); ++r)
            for (std::size_t c = 0; c < w; ++c) g(r, begin + c) += self.grad(r, c);
    });
}

/// Column-wise maximum over rows (global max-pool), 1 x cols.
/// Gradient goes to the arg-max row; ties resolve to the lowest row index.
template <class T>
Value<T> row_max_pool(const Value<T>& a) {
    const auto& d = a.data();
    if (d.rows() == 0) throw ShapeMismatch("row_max_pool of empty tensor");
    Tensor<T> out(1, d.cols());
    std::vector<std::size_t> arg(d.cols(), 0);
    for (std::size_t c = 0; c < d.cols(); ++c) {
        T best = d(0, c);
        for (std::size_t r = 1; r < d.rows(); ++r)
            if (d(r, c) > best) {
                best = d(r, c);
                arg[c] = r;
            }
        out[c] = best;
    }
    return detail::make<T>(std::move(out), "row_max_pool", {a}, [arg = std::move(arg)](Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t c = 0; c < arg.size(); ++c) g(arg[c], c) += self.grad[c];
    });
}

/// Rows of `table` selected by `indices` (repeats allowed).
template <class T>
Value<T> gather_rows(const Value<T>& table, std::span<const std::int32_t> indices) {
    const std::size_t cols = table.shape().cols;
    Tensor<T> out(indices.size(), cols);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto idx = indices[r];
        if (idx < 0 || static_cast<std::size_t>(idx) >= table.shape().rows)
            throw IndexOutOfRange("row index " + std::to_string(idx) + " outside " + table.shape().str());
        std::copy_n(table.data().row(static_cast<std::size_t>(idx)).data(), cols, out.row(r).data());
    }
    std::vector<std::int32_t> idx(indices.begin(), indices.end());
    return detail::make<T>(std::move(out), "gather_rows", {table}, [idx = std::move(idx), cols](Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t r = 0; r < idx.size(); ++r) {
            T* dst = g.row(static_cast<std::size_t>(idx[r])).data();
            const T* src = self.grad.row(r).data();
            for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
        }
    });
}

/// Token embedding: one row of `table` per token.
template <class T>
Value<T> embedding_lookup(const Value<T>& table, std::span<const std::int32_t> tokens) {
    return gather_rows(table, tokens);
}

/// Inverted dropout. Training: zero each entry with probability p, scale
/// survivors by 1/(1-p). Eval: identity (returns `a` itself).
template <class T>
Value<T> dropout(const Value<T>& a, double p, Rng& rng, bool training) {
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout probability must lie in [0, 1)");
    if (!training || p == 0.0) return a;
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    Tensor<T> mask(a.shape());
    for (auto& m : mask.flat()) m = rng.uniform() >= p ? keep_scale : T{};
    Tensor<T> out = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    return detail::make<T>(std::move(out), "dropout", {a}, [mask = std::move(mask)](Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
    });
}

/// Mean squared error as a 1x1 value.
template <class T>
Value<T> mse(const Value<T>& pred, const Value<T>& target) {
    detail::require_same(pred, target, "mse");
    const std::size_t n = pred.data().size();
    if (n == 0) throw ShapeMismatch("mse of empty tensors");
    T acc{};
    for (std::size_t i = 0; i < n; ++i) {
        const T d = pred.data()[i] - target.data()[i];
        acc += d * d;
    }
    return detail::make<T>(Tensor<T>(1, 1, acc / static_cast<T>(n)), "mse", {pred, target}, [n](Node<T>& self) {
        auto& pp = *self.parents[0];
        auto& pt = *self.parents[1];
        const T k = self.grad[0] * T{2} / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const T d = pp.data[i] - pt.data[i];
            if (pp.requires_grad) pp.grad_buffer()[i] += k * d;
            if (pt.requires_grad) pt.grad_buffer()[i] -= k * d;
        }
    });
}

/// Product adj * h for a constant square `adj` whose row sums are taken in a
/// canonical order: the nonzero terms of each output entry are sorted by value
/// before summation, so relabelling the nodes (permuting adj and h jointly)
/// permutes the result rows bit for bit.
template <class T>
Value<T> graph_propagate(const Tensor<T>& adj, const Value<T>& h) {
    const std::size_t n = adj.rows();
    if (adj.cols() != n || h.shape().rows != n)
        throw ShapeMismatch("graph_propagate: " + adj.shape().str() + " x " + h.shape().str());
    const std::size_t d = h.shape().cols;
    std::vector<std::vector<std::size_t>> nbrs(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            if (adj(i, k) != T{}) nbrs[i].push_back(k);

    Tensor<T> out(n, d);
    std::vector<T> terms;
    const auto& hd = h.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            terms.clear();
            for (std::size_t k : nbrs[i]) terms.push_back(adj(i, k) * hd(k, c));
            std::sort(terms.begin(), terms.end());
            T s{};
            for (T t : terms) s += t;
            out(i, c) = s;
        }
    }
    return detail::make<T>(std::move(out), "graph_propagate", {h}, [adj, d](Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        const std::size_t n = adj.rows();
        // dH = adj^T * dOut
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) {
                const T a = adj(i, k);
                if (a == T{}) continue;
                for (std::size_t c = 0; c < d; ++c) g(k, c) += a * self.grad(i, c);
            }
    });
}

/// Reverse-mode pass from a scalar loss. Leaf gradients accumulate across
/// calls; intermediate gradients are reset on every call.
template <class T>
void backward(const Value<T>& loss) {
    if (loss.shape().size() != 1) throw NonScalarLoss("backward() needs a 1x1 loss, got " + loss.shape().str());
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS gives a topological order.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{loss.node(), 0}};
    seen.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node<T>* n : order)
        if (!n->is_leaf) n->grad = Tensor<T>(n->data.shape());
    loss.node()->grad_buffer()[0] += T{1};
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (!n->is_leaf && n->backward) n->backward(*n);
    }
}

}  // namespace deepglstm::ad

#pragma once

// Reverse-mode automatic differentiation over Tensor values.
//
// A Tape records a topologically ordered list of operations built by the
// forward pass. backward() walks the record in reverse, returns a GradStore
// with a gradient for every requires_grad leaf, and clears the tape for
// reuse. Every forward op validates shapes and rejects non-finite outputs.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "ted/common.hpp"
#include "ted/tensor.hpp"

namespace ted {

using NodeId = int;

enum class OpKind {
    input,
    add,
    sub,
    mul,
    scale,
    relu,
    tanh_fn,
    sigmoid_fn,
    matmul,
    transpose,
    slice_rows,
    slice_cols,
    concat_cols,
    concat_rows,
    masked_softmax,
    logsumexp,
    sum_all,
    reshape,
};

inline const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::input: return "input";
        case OpKind::add: return "add";
        case OpKind::sub: return "sub";
        case OpKind::mul: return "mul";
        case OpKind::scale: return "scale";
        case OpKind::relu: return "relu";
        case OpKind::tanh_fn: return "tanh";
        case OpKind::sigmoid_fn: return "sigmoid";
        case OpKind::matmul: return "matmul";
        case OpKind::transpose: return "transpose";
        case OpKind::slice_rows: return "slice_rows";
        case OpKind::slice_cols: return "slice_cols";
        case OpKind::concat_cols: return "concat_cols";
        case OpKind::concat_rows: return "concat_rows";
        case OpKind::masked_softmax: return "masked_softmax";
        case OpKind::logsumexp: return "logsumexp";
        case OpKind::sum_all: return "sum_all";
        case OpKind::reshape: return "reshape";
    }
    return "?";
}

namespace detail {

// C += A(m x k) * B(k x n)
inline void mm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            if (aik == 0.0) continue;
            const double* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

// C += A(m x k) * B(n x k)^T
inline void mm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            crow[j] += acc;
        }
    }
}

// C += A(k x m)^T * B(k x n)
inline void mm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n) {
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double* arow = a + kk * m;
        const double* brow = b + kk * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
        }
    }
}

}  // namespace detail

// Gradients keyed by node id, as produced by Tape::backward.
class GradStore {
  public:
    bool contains(NodeId id) const {
        return id >= 0 && static_cast<std::size_t>(id) < has_.size() && has_[id];
    }

    const Tensor& at(NodeId id) const {
        if (!contains(id))
            throw Error("GradStore: no gradient recorded for node " + std::to_string(id));
        return grads_[id];
    }

  private:
    friend class Tape;
    std::vector<Tensor> grads_;
    std::vector<char> has_;
};

class Tape {
  public:
    // --- leaves ------------------------------------------------------------

    NodeId input(Tensor value) {
        if (!value.all_finite()) throw NumericError("input tensor contains non-finite values");
        Node n;
        n.op = OpKind::input;
        n.needs_grad = value.requires_grad();
        n.value = std::move(value);
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size()) - 1;
    }

    // --- elementwise -------------------------------------------------------

    NodeId add(NodeId a, NodeId b) { return binary(OpKind::add, a, b); }
    NodeId sub(NodeId a, NodeId b) { return binary(OpKind::sub, a, b); }
    NodeId mul(NodeId a, NodeId b) { return binary(OpKind::mul, a, b); }

    NodeId scale(NodeId a, double c) {
        const Tensor& x = val(a);
        Tensor out(x.shape());
        for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] * c;
        Node n = make(OpKind::scale, {a});
        n.c = c;
        return push(std::move(n), std::move(out));
    }

    NodeId relu(NodeId a) {
        const Tensor& x = val(a);
        Tensor out(x.shape());
        for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
        return push(make(OpKind::relu, {a}), std::move(out));
    }

    NodeId tanh_fn(NodeId a) {
        const Tensor& x = val(a);
        Tensor out(x.shape());
        for (std::size_t i = 0; i < x.numel(); ++i) out[i] = std::tanh(x[i]);
        return push(make(OpKind::tanh_fn, {a}), std::move(out));
    }

    NodeId sigmoid_fn(NodeId a) {
        const Tensor& x = val(a);
        Tensor out(x.shape());
        for (std::size_t i = 0; i < x.numel(); ++i) {
            const double v = x[i];
            out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                              : std::exp(v) / (1.0 + std::exp(v));
        }
        return push(make(OpKind::sigmoid_fn, {a}), std::move(out));
    }

    // --- linear algebra ------------------------------------------------------

    NodeId matmul(NodeId a, NodeId b) {
        const Tensor& x = val(a);
        const Tensor& y = val(b);
        if (x.rank() != 2 || y.rank() != 2)
            throw ShapeError("matmul: both operands must be rank 2, have " + x.shape_str() +
                             " and " + y.shape_str());
        if (x.cols() != y.rows())
            throw ShapeError("matmul: inner extents differ, " + x.shape_str() + " * " +
                             y.shape_str());
        Tensor out({x.rows(), y.cols()});
        detail::mm_nn(x.data(), y.data(), out.data(), x.rows(), x.cols(), y.cols());
        return push(make(OpKind::matmul, {a, b}), std::move(out));
    }

    NodeId transpose(NodeId a) {
        const Tensor& x = val(a);
        if (x.rank() != 2) throw ShapeError("transpose: operand must be rank 2");
        Tensor out({x.cols(), x.rows()});
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) out.at(j, i) = x.at(i, j);
        return push(make(OpKind::transpose, {a}), std::move(out));
    }

    NodeId slice_rows(NodeId a, std::size_t r0, std::size_t r1) {
        const Tensor& x = val(a);
        if (x.rank() != 2) throw ShapeError("slice_rows: operand must be rank 2");
        if (r0 >= r1 || r1 > x.rows()) throw ShapeError("slice_rows: bad row range");
        Tensor out({r1 - r0, x.cols()});
        std::memcpy(out.data(), x.data() + r0 * x.cols(), (r1 - r0) * x.cols() * sizeof(double));
        Node n = make(OpKind::slice_rows, {a});
        n.a0 = r0;
        n.a1 = r1;
        return push(std::move(n), std::move(out));
    }

    NodeId slice_cols(NodeId a, std::size_t c0, std::size_t c1) {
        const Tensor& x = val(a);
        if (x.rank() != 2) throw ShapeError("slice_cols: operand must be rank 2");
        if (c0 >= c1 || c1 > x.cols()) throw ShapeError("slice_cols: bad column range");
        Tensor out({x.rows(), c1 - c0});
        for (std::size_t i = 0; i < x.rows(); ++i)
            std::memcpy(out.data() + i * (c1 - c0), x.data() + i * x.cols() + c0,
                        (c1 - c0) * sizeof(double));
        Node n = make(OpKind::slice_cols, {a});
        n.a0 = c0;
        n.a1 = c1;
        return push(std::move(n), std::move(out));
    }

    NodeId concat_cols(const std::vector<NodeId>& parts) {
        if (parts.empty()) throw ShapeError("concat_cols: no inputs");
        const std::size_t r = val(parts[0]).rank() == 2 ? val(parts[0]).rows() : 0;
        std::size_t total = 0;
        for (NodeId p : parts) {
            const Tensor& t = val(p);
            if (t.rank() != 2 || t.rows() != r)
                throw ShapeError("concat_cols: inputs must be rank 2 with equal row counts");
            total += t.cols();
        }
        Tensor out({r, total});
        std::size_t off = 0;
        for (NodeId p : parts) {
            const Tensor& t = val(p);
            for (std::size_t i = 0; i < r; ++i)
                std::memcpy(out.data() + i * total + off, t.data() + i * t.cols(),
                            t.cols() * sizeof(double));
            off += t.cols();
        }
        return push(make(OpKind::concat_cols, parts), std::move(out));
    }

    // Concatenates rank-1 tensors end to end (scalars are rank-1 of length 1).
    NodeId concat_rows(const std::vector<NodeId>& parts) {
        if (parts.empty()) throw ShapeError("concat_rows: no inputs");
        std::size_t total = 0;
        for (NodeId p : parts) {
            const Tensor& t = val(p);
            if (t.rank() != 1) throw ShapeError("concat_rows: inputs must be rank 1");
            total += t.numel();
        }
        Tensor out({total});
        std::size_t off = 0;
        for (NodeId p : parts) {
            const Tensor& t = val(p);
            std::memcpy(out.data() + off, t.data(), t.numel() * sizeof(double));
            off += t.numel();
        }
        return push(make(OpKind::concat_rows, parts), std::move(out));
    }

    NodeId reshape(NodeId a, std::vector<std::size_t> shape) {
        const Tensor& x = val(a);
        Tensor out(std::move(shape), x.vec());
        if (out.numel() != x.numel()) throw ShapeError("reshape: element count must not change");
        return push(make(OpKind::reshape, {a}), std::move(out));
    }

    // --- softmax / reductions -----------------------------------------------

    // Row-wise softmax over positions where mask==1; masked positions are
    // exactly 0 in the output and receive exactly 0 gradient. Computed with
    // max-subtraction.
    NodeId masked_softmax(NodeId scores, const Tensor& mask) {
        const Tensor& x = val(scores);
        if (x.rank() != 2) throw ShapeError("masked_softmax: scores must be rank 2");
        if (!(mask.shape() == x.shape()))
            throw ShapeError("masked_softmax: mask shape " + mask.shape_str() +
                             " does not match scores " + x.shape_str());
        for (std::size_t i = 0; i < mask.numel(); ++i)
            if (mask[i] != 0.0 && mask[i] != 1.0)
                throw DataError("masked_softmax: mask entries must be 0 or 1");
        const std::size_t r = x.rows(), c = x.cols();
        Tensor out({r, c});
        for (std::size_t i = 0; i < r; ++i) {
            double mx = -HUGE_VAL;
            for (std::size_t j = 0; j < c; ++j)
                if (mask.at(i, j) == 1.0) mx = std::max(mx, x.at(i, j));
            if (mx == -HUGE_VAL)
                throw DataError("masked_softmax: row " + std::to_string(i) + " is fully masked");
            double sum = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                if (mask.at(i, j) == 1.0) {
                    const double e = std::exp(x.at(i, j) - mx);
                    out.at(i, j) = e;
                    sum += e;
                } else {
                    out.at(i, j) = 0.0;
                }
            }
            for (std::size_t j = 0; j < c; ++j) out.at(i, j) /= sum;
        }
        Node n = make(OpKind::masked_softmax, {scores});
        n.aux = mask;
        return push(std::move(n), std::move(out));
    }

    // log(sum(exp(x))) over all elements, max-shifted; scalar output.
    NodeId logsumexp(NodeId a) {
        const Tensor& x = val(a);
        if (x.numel() == 0) throw ShapeError("logsumexp: empty input");
        double mx = x[0];
        for (std::size_t i = 1; i < x.numel(); ++i) mx = std::max(mx, x[i]);
        double sum = 0.0;
        for (std::size_t i = 0; i < x.numel(); ++i) sum += std::exp(x[i] - mx);
        Tensor out = Tensor::scalar(mx + std::log(sum));
        return push(make(OpKind::logsumexp, {a}), std::move(out));
    }

    NodeId sum_all(NodeId a) {
        const Tensor& x = val(a);
        double s = 0.0;
        for (std::size_t i = 0; i < x.numel(); ++i) s += x[i];
        return push(make(OpKind::sum_all, {a}), Tensor::scalar(s));
    }

    // --- access ----------------------------------------------------------

    const Tensor& value(NodeId id) const { return val(id); }

    double scalar_value(NodeId id) const {
        const Tensor& t = val(id);
        if (t.numel() != 1) throw ShapeError("scalar_value: node is not scalar");
        return t[0];
    }

    std::size_t size() const { return nodes_.size(); }

    void reset() { nodes_.clear(); }

    // --- backward ----------------------------------------------------------

    // Reverse sweep from a scalar loss node. Returns the gradient store and
    // clears the tape. Every requires_grad leaf gets a gradient of its own
    // shape (zeros when the loss does not depend on it).
    GradStore backward(NodeId loss) {
        const Tensor& lt = val(loss);
        if (lt.numel() != 1) throw Error("backward: loss node must be scalar");

        GradStore store;
        store.grads_.resize(nodes_.size());
        store.has_.assign(nodes_.size(), 0);
        store.grads_[loss] = Tensor(lt.shape(), 1.0);
        store.has_[loss] = 1;

        for (NodeId id = loss; id >= 0; --id) {
            if (!store.has_[id] || !nodes_[id].needs_grad) continue;
            propagate(store, id);
        }

        // Unreached requires_grad leaves still get (zero) gradients.
        for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id) {
            const Node& n = nodes_[id];
            if (n.op == OpKind::input && n.needs_grad && !store.has_[id]) {
                store.grads_[id] = Tensor(n.value.shape(), 0.0);
                store.has_[id] = 1;
            }
        }

        // Drop gradients of interior nodes; the contract covers leaves.
        for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id) {
            if (nodes_[id].op != OpKind::input) {
                store.grads_[id] = Tensor();
                store.has_[id] = 0;
            }
        }
        reset();
        return store;
    }

  private:
    struct Node {
        OpKind op = OpKind::input;
        std::vector<NodeId> inputs;
        Tensor value;
        Tensor aux;             // masked_softmax keeps its mask here
        double c = 0.0;         // scale constant
        std::size_t a0 = 0, a1 = 0;  // slice bounds
        bool needs_grad = false;
    };

    const Tensor& val(NodeId id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
            throw Error("Tape: node " + std::to_string(id) + " is not on the tape");
        return nodes_[id].value;
    }

    Node make(OpKind op, std::vector<NodeId> inputs) {
        Node n;
        n.op = op;
        for (NodeId i : inputs) {
            if (i < 0 || static_cast<std::size_t>(i) >= nodes_.size())
                throw Error("Tape: input node " + std::to_string(i) + " is not on the tape");
            n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
        }
        n.inputs = std::move(inputs);
        return n;
    }

    NodeId push(Node n, Tensor out) {
        if (!out.all_finite())
            throw NumericError(std::string("op ") + op_name(n.op) + " produced non-finite values");
        n.value = std::move(out);
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size()) - 1;
    }

    // Broadcast classification for binary elementwise ops: equal shapes, or
    // one operand is a single row (rank 1, or rank 2 with one row) repeated
    // along the other's leading axis.
    enum class Bcast { none, b_row, a_row };

    static bool row_like(const Tensor& t, std::size_t cols) {
        return (t.rank() == 1 && t.numel() == cols) ||
               (t.rank() == 2 && t.rows() == 1 && t.cols() == cols);
    }

    static Bcast classify(const Tensor& a, const Tensor& b) {
        if (a.same_shape(b)) return Bcast::none;
        if (a.rank() == 2 && row_like(b, a.cols())) return Bcast::b_row;
        if (b.rank() == 2 && row_like(a, b.cols())) return Bcast::a_row;
        throw ShapeError("elementwise op: incompatible shapes " + a.shape_str() + " and " +
                         b.shape_str());
    }

    NodeId binary(OpKind op, NodeId a, NodeId b) {
        const Tensor& x = val(a);
        const Tensor& y = val(b);
        const Bcast bc = classify(x, y);
        const Tensor& big = bc == Bcast::a_row ? y : x;
        Tensor out(big.shape());
        const std::size_t n = big.numel();
        const std::size_t cols = bc == Bcast::none ? 0 : big.cols();
        for (std::size_t i = 0; i < n; ++i) {
            const double xv = bc == Bcast::a_row ? x[i % cols] : x[i];
            const double yv = bc == Bcast::b_row ? y[i % cols] : y[i];
            switch (op) {
                case OpKind::add: out[i] = xv + yv; break;
                case OpKind::sub: out[i] = xv - yv; break;
                case OpKind::mul: out[i] = xv * yv; break;
                default: throw Error("binary: bad op");
            }
        }
        return push(make(op, {a, b}), std::move(out));
    }

    // Fetch-or-create the gradient accumulator for a node. Accumulators are
    // created zeroed exactly once; all contributions are added in place, so
    // no per-edge temporaries are allocated on the hot path.
    Tensor& acc(GradStore& store, NodeId id) {
        if (!store.has_[id]) {
            store.grads_[id] = Tensor(nodes_[id].value.shape(), 0.0);
            store.has_[id] = 1;
        }
        return store.grads_[id];
    }

    // Accumulate sign * g into an input of a binary elementwise op, summing
    // over the leading axis when that input was a broadcast row.
    void add_binary_grad(GradStore& store, NodeId to, const Tensor& g, double sign) {
        Tensor& a = acc(store, to);
        if (a.numel() == g.numel()) {
            for (std::size_t i = 0; i < g.numel(); ++i) a[i] += sign * g[i];
        } else {
            const std::size_t cols = a.numel();
            for (std::size_t i = 0; i < g.numel(); ++i) a[i % cols] += sign * g[i];
        }
    }

    void propagate(GradStore& store, NodeId id) {
        Node& n = nodes_[id];
        const Tensor& g = store.grads_[id];
        auto in_needs = [&](std::size_t idx) { return nodes_[n.inputs[idx]].needs_grad; };

        switch (n.op) {
            case OpKind::input:
                return;
            case OpKind::add: {
                if (in_needs(0)) add_binary_grad(store, n.inputs[0], g, 1.0);
                if (in_needs(1)) add_binary_grad(store, n.inputs[1], g, 1.0);
                return;
            }
            case OpKind::sub: {
                if (in_needs(0)) add_binary_grad(store, n.inputs[0], g, 1.0);
                if (in_needs(1)) add_binary_grad(store, n.inputs[1], g, -1.0);
                return;
            }
            case OpKind::mul: {
                const Tensor& x = nodes_[n.inputs[0]].value;
                const Tensor& y = nodes_[n.inputs[1]].value;
                const std::size_t total = n.value.numel();
                const std::size_t cols = n.value.rank() == 2 ? n.value.cols() : total;
                if (in_needs(0)) {
                    Tensor& a = acc(store, n.inputs[0]);
                    const bool bx = a.numel() != total;   // x was broadcast
                    const bool by = y.numel() != total;   // y was broadcast
                    for (std::size_t i = 0; i < total; ++i) {
                        const double yv = by ? y[i % cols] : y[i];
                        a[bx ? i % cols : i] += g[i] * yv;
                    }
                }
                if (in_needs(1)) {
                    Tensor& a = acc(store, n.inputs[1]);
                    const bool by = a.numel() != total;
                    const bool bx = x.numel() != total;
                    for (std::size_t i = 0; i < total; ++i) {
                        const double xv = bx ? x[i % cols] : x[i];
                        a[by ? i % cols : i] += g[i] * xv;
                    }
                }
                return;
            }
            case OpKind::scale: {
                Tensor& a = acc(store, n.inputs[0]);
                for (std::size_t i = 0; i < g.numel(); ++i) a[i] += g[i] * n.c;
                return;
            }
            case OpKind::relu: {
                const Tensor& x = nodes_[n.inputs[0]].value;
                Tensor& a = acc(store, n.inputs[0]);
                for (std::size_t i = 0; i < x.numel(); ++i)
                    if (x[i] > 0.0) a[i] += g[i];
                return;
            }
            case OpKind::tanh_fn: {
                Tensor& a = acc(store, n.inputs[0]);
                for (std::size_t i = 0; i < g.numel(); ++i)
                    a[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
                return;
            }
            case OpKind::sigmoid_fn: {
                Tensor& a = acc(store, n.inputs[0]);
                for (std::size_t i = 0; i < g.numel(); ++i)
                    a[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
                return;
            }
            case OpKind::matmul: {
                const Tensor& a = nodes_[n.inputs[0]].value;
                const Tensor& b = nodes_[n.inputs[1]].value;
                if (in_needs(0))
                    detail::mm_nt(g.data(), b.data(), acc(store, n.inputs[0]).data(), a.rows(),
                                  b.cols(), a.cols());
                if (in_needs(1))
                    detail::mm_tn(a.data(), g.data(), acc(store, n.inputs[1]).data(), a.cols(),
                                  a.rows(), b.cols());
                return;
            }
            case OpKind::transpose: {
                const Tensor& x = nodes_[n.inputs[0]].value;
                Tensor& a = acc(store, n.inputs[0]);
                for (std::size_t i = 0; i < x.rows(); ++i)
                    for (std::size_t j = 0; j < x.cols(); ++j) a.at(i, j) += g.at(j, i);
                return;
            }
            case OpKind::slice_rows: {
                const Tensor& x = nodes_[n.inputs[0]].value;
                Tensor& a = acc(store, n.inputs[0]);
                double* dst = a.data() + n.a0 * x.cols();
                for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
                return;
            }
            case OpKind::slice_cols: {
                const Tensor& x = nodes_[n.inputs[0]].value;
                Tensor& a = acc(store, n.inputs[0]);
                const std::size_t w = n.a1 - n.a0;
                for (std::size_t i = 0; i < x.rows(); ++i) {
                    double* dst = a.data() + i * x.cols() + n.a0;
                    const double* src = g.data() + i * w;
                    for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
                }
                return;
            }
            case OpKind::concat_cols: {
                std::size_t off = 0;
                const std::size_t total = n.value.cols();
                for (std::size_t p = 0; p < n.inputs.size(); ++p) {
                    const Tensor& t = nodes_[n.inputs[p]].value;
                    if (in_needs(p)) {
                        Tensor& a = acc(store, n.inputs[p]);
                        for (std::size_t i = 0; i < t.rows(); ++i) {
                            double* dst = a.data() + i * t.cols();
                            const double* src = g.data() + i * total + off;
                            for (std::size_t j = 0; j < t.cols(); ++j) dst[j] += src[j];
                        }
                    }
                    off += t.cols();
                }
                return;
            }
            case OpKind::concat_rows: {
                std::size_t off = 0;
                for (std::size_t p = 0; p < n.inputs.size(); ++p) {
                    const Tensor& t = nodes_[n.inputs[p]].value;
                    if (in_needs(p)) {
                        Tensor& a = acc(store, n.inputs[p]);
                        for (std::size_t i = 0; i < t.numel(); ++i) a[i] += g[off + i];
                    }
                    off += t.numel();
                }
                return;
            }
            case OpKind::masked_softmax: {
                // dL/dx = y * (g - sum_j g_j y_j) per row; masked positions
                // have y == 0 and therefore exactly 0 gradient.
                const Tensor& y = n.value;
                Tensor& a = acc(store, n.inputs[0]);
                for (std::size_t i = 0; i < y.rows(); ++i) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < y.cols(); ++j) dot += g.at(i, j) * y.at(i, j);
                    for (std::size_t j = 0; j < y.cols(); ++j)
                        a.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
                }
                return;
            }
            case OpKind::logsumexp: {
                const Tensor& x = nodes_[n.inputs[0]].value;
                const double lse = n.value[0];
                Tensor& a = acc(store, n.inputs[0]);
                for (std::size_t i = 0; i < x.numel(); ++i)
                    a[i] += g[0] * std::exp(x[i] - lse);
                return;
            }
            case OpKind::sum_all: {
                Tensor& a = acc(store, n.inputs[0]);
                for (std::size_t i = 0; i < a.numel(); ++i) a[i] += g[0];
                return;
            }
            case OpKind::reshape: {
                Tensor& a = acc(store, n.inputs[0]);
                for (std::size_t i = 0; i < g.numel(); ++i) a[i] += g[i];
                return;
            }
        }
    }

    std::vector<Node> nodes_;
};

}  // namespace ted

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fourie/errors.hpp"
#include "fourie/tensor.hpp"

namespace fourie::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One value in the computation graph. Forward evaluation is eager: `value`
// is always populated. `grad` is allocated lazily during backward.
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_ready = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backprop; // pushes this->grad into parents
    const char* op = "leaf";

    void ensure_grad() {
        if (!grad_ready) {
            grad = Tensor(value.shape(), 0.0);
            grad_ready = true;
        }
    }
};

// Value-semantic handle to a graph node.
class Var {
public:
    Var() = default;
    explicit Var(NodePtr n) : n_(std::move(n)) {}

    static Var leaf(Tensor t, bool requires_grad) {
        auto n = std::make_shared<Node>();
        n->value = std::move(t);
        n->requires_grad = requires_grad;
        return Var(n);
    }

    static Var constant(Tensor t) { return leaf(std::move(t), false); }

    bool defined() const { return n_ != nullptr; }
    const Tensor& value() const { return n_->value; }
    Tensor& mutable_value() { return n_->value; } // parameter updates between steps
    bool requires_grad() const { return n_->requires_grad; }

    Tensor& grad() {
        n_->ensure_grad();
        return n_->grad;
    }
    const Tensor& grad() const {
        n_->ensure_grad();
        return n_->grad;
    }

    void zero_grad() {
        n_->grad_ready = false;
        n_->grad = Tensor();
    }

    NodePtr node() const { return n_; }

private:
    NodePtr n_;
};

namespace detail {

inline Var make_node(Tensor value, std::vector<Var> inputs,
                     std::function<void(Node&)> backprop, const char* op) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->op = op;
    bool rg = false;
    for (const Var& v : inputs) rg = rg || v.requires_grad();
    n->requires_grad = rg;
    if (rg) {
        n->parents.reserve(inputs.size());
        for (Var& v : inputs) n->parents.push_back(v.node());
        n->backprop = std::move(backprop);
    }
    return Var(n);
}

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shapes " + a.shape_str() + " and " +
                         b.shape_str() + " do not match");
    }
}

} // namespace detail

// ----- elementwise primitives -----

inline Var add(const Var& a, const Var& b) {
    detail::check_same_shape("add", a.value(), b.value());
    Tensor out = a.value();
    const auto& bd = b.value().data();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bd[i];
    return detail::make_node(std::move(out), {a, b}, [](Node& n) {
        for (int p = 0; p < 2; ++p) {
            Node& par = *n.parents[p];
            if (!par.requires_grad) continue;
            par.ensure_grad();
            for (std::size_t i = 0; i < n.grad.numel(); ++i) par.grad[i] += n.grad[i];
        }
    }, "add");
}

inline Var sub(const Var& a, const Var& b) {
    detail::check_same_shape("sub", a.value(), b.value());
    Tensor out = a.value();
    const auto& bd = b.value().data();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bd[i];
    return detail::make_node(std::move(out), {a, b}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (std::size_t i = 0; i < n.grad.numel(); ++i) pa.grad[i] += n.grad[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < n.grad.numel(); ++i) pb.grad[i] -= n.grad[i];
        }
    }, "sub");
}

inline Var mul(const Var& a, const Var& b) {
    detail::check_same_shape("mul", a.value(), b.value());
    Tensor out = a.value();
    const auto& bd = b.value().data();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bd[i];
    return detail::make_node(std::move(out), {a, b}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (std::size_t i = 0; i < n.grad.numel(); ++i)
                pa.grad[i] += n.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < n.grad.numel(); ++i)
                pb.grad[i] += n.grad[i] * pa.value[i];
        }
    }, "mul");
}

inline Var div(const Var& a, const Var& b) {
    detail::check_same_shape("div", a.value(), b.value());
    Tensor out = a.value();
    const auto& bd = b.value().data();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= bd[i];
    return detail::make_node(std::move(out), {a, b}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (std::size_t i = 0; i < n.grad.numel(); ++i)
                pa.grad[i] += n.grad[i] / pb.value[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < n.grad.numel(); ++i)
                pb.grad[i] -= n.grad[i] * pa.value[i] / (pb.value[i] * pb.value[i]);
        }
    }, "div");
}

inline Var scale(const Var& a, double c) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c;
    return detail::make_node(std::move(out), {a}, [c](Node& n) {
        Node& pa = *n.parents[0];
        pa.ensure_grad();
        for (std::size_t i = 0; i < n.grad.numel(); ++i) pa.grad[i] += c * n.grad[i];
    }, "scale");
}

inline Var relu(const Var& a) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    return detail::make_node(std::move(out), {a}, [](Node& n) {
        Node& pa = *n.parents[0];
        pa.ensure_grad();
        // subgradient 0 at exactly zero
        for (std::size_t i = 0; i < n.grad.numel(); ++i)
            if (pa.value[i] > 0.0) pa.grad[i] += n.grad[i];
    }, "relu");
}

inline Var vexp(const Var& a) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::exp(out[i]);
    return detail::make_node(std::move(out), {a}, [](Node& n) {
        Node& pa = *n.parents[0];
        pa.ensure_grad();
        for (std::size_t i = 0; i < n.grad.numel(); ++i)
            pa.grad[i] += n.grad[i] * n.value[i];
    }, "exp");
}

inline Var vlog(const Var& a) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::log(out[i]);
    return detail::make_node(std::move(out), {a}, [](Node& n) {
        Node& pa = *n.parents[0];
        pa.ensure_grad();
        for (std::size_t i = 0; i < n.grad.numel(); ++i)
            pa.grad[i] += n.grad[i] / pa.value[i];
    }, "log");
}

inline Var clamp_min(const Var& a, double lo) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::max(out[i], lo);
    return detail::make_node(std::move(out), {a}, [lo](Node& n) {
        Node& pa = *n.parents[0];
        pa.ensure_grad();
        for (std::size_t i = 0; i < n.grad.numel(); ++i)
            if (pa.value[i] > lo) pa.grad[i] += n.grad[i];
    }, "clamp_min");
}

// ----- matrix primitives -----

namespace detail {

// C += A * B, with optional transposes; raw value-level helper shared by
// matmul forward and backward.
inline void mm_acc(const Tensor& a, bool ta, const Tensor& b, bool tb, Tensor& c) {
    std::size_t m = ta ? a.cols() : a.rows();
    std::size_t k = ta ? a.rows() : a.cols();
    std::size_t n = tb ? b.rows() : b.cols();
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* cd = c.data().data();
    std::size_t ac = a.cols(), bc = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            double av = ta ? ad[p * ac + i] : ad[i * ac + p];
            if (av == 0.0) continue;
            if (!tb) {
                const double* brow = bd + p * bc;
                double* crow = cd + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            } else {
                double* crow = cd + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * bd[j * bc + p];
            }
        }
    }
}

} // namespace detail

inline Var matmul(const Var& a, const Var& b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) {
        throw ShapeError("matmul: shapes " + A.shape_str() + " and " + B.shape_str() +
                         " do not conform");
    }
    Tensor out({A.rows(), B.cols()});
    detail::mm_acc(A, false, B, false, out);
    return detail::make_node(std::move(out), {a, b}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            detail::mm_acc(n.grad, false, pb.value, true, pa.grad); // dA = G * B^T
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            detail::mm_acc(pa.value, true, n.grad, false, pb.grad); // dB = A^T * G
        }
    }, "matmul");
}

inline Var transpose(const Var& a) {
    const Tensor& A = a.value();
    if (A.rank() != 2) throw ShapeError("transpose: shape " + A.shape_str() + " is not rank 2");
    Tensor out({A.cols(), A.rows()});
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) out.at(j, i) = A.at(i, j);
    return detail::make_node(std::move(out), {a}, [](Node& n) {
        Node& pa = *n.parents[0];
        pa.ensure_grad();
        for (std::size_t i = 0; i < n.grad.rows(); ++i)
            for (std::size_t j = 0; j < n.grad.cols(); ++j)
                pa.grad.at(j, i) += n.grad.at(i, j);
    }, "transpose");
}

// Row-wise softmax with max subtraction.
inline Var softmax_rows(const Var& a) {
    const Tensor& A = a.value();
    if (A.rank() != 2) throw ShapeError("softmax: shape " + A.shape_str() + " is not rank 2");
    Tensor out = A;
    std::size_t r = A.rows(), c = A.cols();
    for (std::size_t i = 0; i < r; ++i) {
        double mx = out.at(i, 0);
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, out.at(i, j));
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            double e = std::exp(out.at(i, j) - mx);
            out.at(i, j) = e;
            s += e;
        }
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) /= s;
    }
    return detail::make_node(std::move(out), {a}, [](Node& n) {
        Node& pa = *n.parents[0];
        pa.ensure_grad();
        std::size_t r = n.value.rows(), c = n.value.cols();
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += n.grad.at(i, j) * n.value.at(i, j);
            for (std::size_t j = 0; j < c; ++j)
                pa.grad.at(i, j) += n.value.at(i, j) * (n.grad.at(i, j) - dot);
        }
    }, "softmax");
}

// ----- structural primitives -----

inline Var concat_cols(const Var& a, const Var& b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.rank() != 2 || B.rank() != 2 || A.rows() != B.rows()) {
        throw ShapeError("concat_cols: shapes " + A.shape_str() + " and " + B.shape_str() +
                         " do not conform");
    }
    Tensor out({A.rows(), A.cols() + B.cols()});
    for (std::size_t i = 0; i < A.rows(); ++i) {
        for (std::size_t j = 0; j < A.cols(); ++j) out.at(i, j) = A.at(i, j);
        for (std::size_t j = 0; j < B.cols(); ++j) out.at(i, A.cols() + j) = B.at(i, j);
    }
    std::size_t ca = A.cols();
    return detail::make_node(std::move(out), {a, b}, [ca](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        std::size_t r = n.grad.rows(), cb = n.grad.cols() - ca;
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < ca; ++j) pa.grad.at(i, j) += n.grad.at(i, j);
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < cb; ++j) pb.grad.at(i, j) += n.grad.at(i, ca + j);
        }
    }, "concat_cols");
}

// Vertically stack rank-2 blocks with equal column counts.
inline Var stack_rows(const std::vector<Var>& blocks) {
    if (blocks.empty()) throw ContractError("stack_rows: no inputs");
    std::size_t c = blocks[0].value().cols();
    std::size_t r = 0;
    for (const Var& v : blocks) {
        if (v.value().rank() != 2 || v.value().cols() != c) {
            throw ShapeError("stack_rows: block shape " + v.value().shape_str() +
                             " does not have " + std::to_string(c) + " columns");
        }
        r += v.value().rows();
    }
    Tensor out({r, c});
    std::size_t off = 0;
    for (const Var& v : blocks) {
        const Tensor& B = v.value();
        for (std::size_t i = 0; i < B.rows(); ++i)
            for (std::size_t j = 0; j < c; ++j) out.at(off + i, j) = B.at(i, j);
        off += B.rows();
    }
    return detail::make_node(std::move(out), blocks, [](Node& n) {
        std::size_t off = 0;
        std::size_t c = n.grad.cols();
        for (auto& p : n.parents) {
            std::size_t pr = p->value.rows();
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t i = 0; i < pr; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                        p->grad.at(i, j) += n.grad.at(off + i, j);
            }
            off += pr;
        }
    }, "stack_rows");
}

// Gather rows by index (embedding lookups, span gathers, partition slices).
// Gradient scatter-adds, so repeated indices accumulate.
inline Var select_rows(const Var& a, std::vector<std::size_t> idx) {
    const Tensor& A = a.value();
    if (A.rank() != 2) throw ShapeError("select_rows: shape " + A.shape_str() + " is not rank 2");
    for (std::size_t i : idx) {
        if (i >= A.rows()) {
            throw ContractError("select_rows: row " + std::to_string(i) + " out of range for " +
                                A.shape_str());
        }
    }
    Tensor out({idx.size(), A.cols()});
    for (std::size_t k = 0; k < idx.size(); ++k)
        for (std::size_t j = 0; j < A.cols(); ++j) out.at(k, j) = A.at(idx[k], j);
    return detail::make_node(std::move(out), {a}, [idx = std::move(idx)](Node& n) {
        Node& pa = *n.parents[0];
        pa.ensure_grad();
        for (std::size_t k = 0; k < idx.size(); ++k)
            for (std::size_t j = 0; j < n.grad.cols(); ++j)
                pa.grad.at(idx[k], j) += n.grad.at(k, j);
    }, "select_rows");
}

// Single element as a 1x1 tensor.
inline Var pick(const Var& a, std::size_t i, std::size_t j) {
    const Tensor& A = a.value();
    if (A.rank() != 2 || i >= A.rows() || j >= A.cols()) {
        throw ContractError("pick: index (" + std::to_string(i) + "," + std::to_string(j) +
                            ") out of range for " + A.shape_str());
    }
    Tensor out = Tensor::scalar(A.at(i, j));
    return detail::make_node(std::move(out), {a}, [i, j](Node& n) {
        Node& pa = *n.parents[0];
        pa.ensure_grad();
        pa.grad.at(i, j) += n.grad[0];
    }, "pick");
}

inline Var sum_all(const Var& a) {
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return detail::make_node(Tensor::scalar(s), {a}, [](Node& n) {
        Node& pa = *n.parents[0];
        pa.ensure_grad();
        for (std::size_t i = 0; i < pa.grad.numel(); ++i) pa.grad[i] += n.grad[0];
    }, "sum");
}

// ----- composites -----

inline Var mean_all(const Var& a) {
    return scale(sum_all(a), 1.0 / static_cast<double>(a.value().numel()));
}

inline Var sq_norm(const Var& a) { return sum_all(mul(a, a)); }

inline Var cst(Tensor t) { return Var::constant(std::move(t)); }

inline Var ones_row(std::size_t n) { return cst(Tensor::full(1, n, 1.0)); }
inline Var ones_col(std::size_t n) { return cst(Tensor::full(n, 1, 1.0)); }

// log(sum_j exp(row_j)) over a 1xK row, max-subtracted with a detached
// constant so the gradient is the plain softmax.
inline Var logsumexp_row(const Var& row) {
    const Tensor& R = row.value();
    if (R.rank() != 2 || R.rows() != 1) {
        throw ShapeError("logsumexp_row: shape " + R.shape_str() + " is not 1xK");
    }
    double mx = R[0];
    for (std::size_t j = 1; j < R.cols(); ++j) mx = std::max(mx, R[j]);
    Var shifted = sub(row, cst(Tensor::full(1, R.cols(), mx)));
    return add(vlog(sum_all(vexp(shifted))), cst(Tensor::scalar(mx)));
}

// Row vector of log softmax over a 1xK row (stable).
inline Var log_softmax_row(const Var& row) {
    Var lse = logsumexp_row(row);
    return sub(row, matmul(lse, ones_row(row.value().cols())));
}

// ----- backward -----

inline void backward(const Var& loss) {
    if (loss.value().numel() != 1) {
        throw ContractError("backward: loss has " + std::to_string(loss.value().numel()) +
                            " elements, expected scalar");
    }
    if (!loss.requires_grad()) return;

    // iterative post-order DFS; creation order is not tracked, so derive a
    // topological order from the parent links
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->grad_ready) n->backprop(*n);
    }
}

} // namespace fourie::ad

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "advkit/kernels.hpp"
#include "advkit/tensor.hpp"

namespace advkit {

enum class Op {
    Input,
    Constant,
    Add,
    Sub,
    Mul,
    ScalarMul,
    MatMul,
    Relu,
    Exp,
    Log,
    Sum,
    MaxReduce,
    Abs,
    Sqrt,
    Divide,
    Softmax,
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::Input: return "input";
        case Op::Constant: return "constant";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::ScalarMul: return "scalar-mul";
        case Op::MatMul: return "matmul";
        case Op::Relu: return "relu";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sum: return "sum";
        case Op::MaxReduce: return "max-reduce";
        case Op::Abs: return "abs";
        case Op::Sqrt: return "sqrt";
        case Op::Divide: return "divide";
        case Op::Softmax: return "softmax";
    }
    return "?";
}

using NodeId = int;

// Reverse-mode differentiation tape. Values are computed eagerly as nodes are
// appended, so the record order is a topological order by construction. One
// graph is single-writer; distinct graphs are independent.
template <typename S>
class Graph {
public:
    NodeId input(Tensor<S> v) { return leaf(Op::Input, std::move(v)); }
    NodeId constant(Tensor<S> v) { return leaf(Op::Constant, std::move(v)); }

    NodeId add(NodeId a, NodeId b) { return elementwise(Op::Add, a, b); }
    NodeId sub(NodeId a, NodeId b) { return elementwise(Op::Sub, a, b); }
    NodeId mul(NodeId a, NodeId b) { return elementwise(Op::Mul, a, b); }
    NodeId divide(NodeId a, NodeId b) { return elementwise(Op::Divide, a, b); }

    NodeId scalar_mul(NodeId a, S c) {
        const Tensor<S>& x = val(a);
        Tensor<S> out(x.shape);
        for (std::size_t i = 0; i < x.numel(); ++i) out[i] = c * x[i];
        Node n = make_node(Op::ScalarMul, a, -1, std::move(out));
        n.c = c;
        return push(std::move(n));
    }

    // (m x k)(k x n) -> (m x n), or (m x k)(k) -> (m).
    NodeId matmul(NodeId a, NodeId b) {
        const Tensor<S>& A = val(a);
        const Tensor<S>& B = val(b);
        if (A.shape.size() != 2)
            throw ShapeError("matmul: left operand must be rank 2, got " + shape_string(A));
        const std::size_t m = A.shape[0], k = A.shape[1];
        Tensor<S> out;
        if (B.shape.size() == 1) {
            if (B.shape[0] != k)
                throw ShapeError("matmul: inner dims " + std::to_string(k) + " vs " +
                                 std::to_string(B.shape[0]));
            out = Tensor<S>({m});
            kernels::matvec<S>(A.data, m, k, B.data, out.data);
        } else if (B.shape.size() == 2) {
            if (B.shape[0] != k)
                throw ShapeError("matmul: inner dims " + std::to_string(k) + " vs " +
                                 std::to_string(B.shape[0]));
            const std::size_t ncols = B.shape[1];
            out = Tensor<S>({m, ncols});
            kernels::matmul<S>(A.data, m, k, B.data, ncols, out.data);
        } else {
            throw ShapeError("matmul: right operand must be rank 1 or 2, got " + shape_string(B));
        }
        return push(make_node(Op::MatMul, a, b, std::move(out)));
    }

    NodeId relu(NodeId a) {
        const Tensor<S>& x = val(a);
        Tensor<S> out(x.shape);
        kernels::relu<S>(x.data, out.data);
        return push(make_node(Op::Relu, a, -1, std::move(out)));
    }

    NodeId exp(NodeId a) {
        const Tensor<S>& x = val(a);
        Tensor<S> out(x.shape);
        for (std::size_t i = 0; i < x.numel(); ++i) out[i] = std::exp(x[i]);
        return push(make_node(Op::Exp, a, -1, std::move(out)));
    }

    NodeId log(NodeId a) {
        const Tensor<S>& x = val(a);
        Tensor<S> out(x.shape);
        for (std::size_t i = 0; i < x.numel(); ++i) {
            if (!(x[i] > S(0)))
                throw NumericError("log of non-positive value " +
                                   std::to_string(static_cast<double>(x[i])));
            out[i] = std::log(x[i]);
        }
        return push(make_node(Op::Log, a, -1, std::move(out)));
    }

    NodeId abs(NodeId a) {
        const Tensor<S>& x = val(a);
        Tensor<S> out(x.shape);
        for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] < S(0) ? -x[i] : x[i];
        return push(make_node(Op::Abs, a, -1, std::move(out)));
    }

    NodeId sqrt(NodeId a) {
        const Tensor<S>& x = val(a);
        Tensor<S> out(x.shape);
        for (std::size_t i = 0; i < x.numel(); ++i) {
            if (x[i] < S(0))
                throw NumericError("sqrt of negative value " +
                                   std::to_string(static_cast<double>(x[i])));
            out[i] = std::sqrt(x[i]);
        }
        return push(make_node(Op::Sqrt, a, -1, std::move(out)));
    }

    NodeId sum(NodeId a) {
        const Tensor<S>& x = val(a);
        S acc = S(0);
        for (std::size_t i = 0; i < x.numel(); ++i) acc += x[i];
        return push(make_node(Op::Sum, a, -1, Tensor<S>::scalar(acc)));
    }

    NodeId max_reduce(NodeId a) {
        const Tensor<S>& x = val(a);
        const std::size_t arg = kernels::argmax<S>(x.data);
        Node n = make_node(Op::MaxReduce, a, -1, Tensor<S>::scalar(x[arg]));
        n.arg = arg;
        return push(std::move(n));
    }

    // Max-subtracted softmax over a rank-1 tensor, fused with an analytic
    // backward. Saturated logit gaps still quantize to exact {0,1} outputs.
    NodeId softmax(NodeId a) {
        const Tensor<S>& x = val(a);
        if (x.shape.size() != 1)
            throw ShapeError("softmax expects a rank-1 tensor, got " + shape_string(x));
        Tensor<S> out(x.shape);
        kernels::stable_softmax<S>(x.data, out.data);
        return push(make_node(Op::Softmax, a, -1, std::move(out)));
    }

    const Tensor<S>& value(NodeId id) const { return nodes_[id].value; }
    const Tensor<S>& grad(NodeId id) const { return nodes_[id].grad; }
    std::size_t size() const { return nodes_.size(); }

    void zero_grad() {
        for (Node& n : nodes_) n.grad = Tensor<S>();
    }

    // Populates grad for every node that feeds the loss; grad of the loss
    // w.r.t. itself is 1.
    void backward(NodeId loss) {
        if (!nodes_[loss].value.is_scalar())
            throw ShapeError("backward requires a scalar loss, got " +
                             shape_string(nodes_[loss].value));
        for (Node& n : nodes_) {
            n.grad = Tensor<S>(n.value.shape);
        }
        nodes_[loss].grad[0] = S(1);
        for (NodeId k = loss; k >= 0; --k) backprop_node(k);
    }

private:
    struct Node {
        Op op = Op::Input;
        NodeId a = -1;
        NodeId b = -1;
        S c{};
        Tensor<S> value;
        Tensor<S> grad;
        std::size_t arg = 0;
    };

    std::vector<Node> nodes_;

    const Tensor<S>& val(NodeId id) const { return nodes_[id].value; }

    static Node make_node(Op op, NodeId a, NodeId b, Tensor<S> value) {
        Node n;
        n.op = op;
        n.a = a;
        n.b = b;
        n.value = std::move(value);
        return n;
    }

    NodeId leaf(Op op, Tensor<S> v) {
        return push(make_node(op, -1, -1, std::move(v)));
    }

    NodeId push(Node n) {
        if (!n.value.all_finite())
            throw NumericError(std::string("non-finite values produced by ") + op_name(n.op));
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    NodeId elementwise(Op op, NodeId a, NodeId b) {
        const Tensor<S>& A = val(a);
        const Tensor<S>& B = val(b);
        const bool a_scalar = A.is_scalar();
        const bool b_scalar = B.is_scalar();
        if (!a_scalar && !b_scalar && !A.same_shape(B))
            throw ShapeError(std::string(op_name(op)) + ": shape mismatch " + shape_string(A) +
                             " vs " + shape_string(B));
        const Tensor<S>& big = a_scalar ? B : A;
        Tensor<S> out(big.shape);
        const std::size_t n = out.numel();
        for (std::size_t i = 0; i < n; ++i) {
            const S x = A[a_scalar ? 0 : i];
            const S y = B[b_scalar ? 0 : i];
            switch (op) {
                case Op::Add: out[i] = x + y; break;
                case Op::Sub: out[i] = x - y; break;
                case Op::Mul: out[i] = x * y; break;
                case Op::Divide:
                    if (y == S(0)) throw NumericError("divide by exact zero");
                    out[i] = x / y;
                    break;
                default: break;
            }
        }
        return push(make_node(op, a, b, std::move(out)));
    }

    void backprop_node(NodeId k) {
        Node& n = nodes_[k];
        const Tensor<S>& g = n.grad;
        switch (n.op) {
            case Op::Input:
            case Op::Constant:
                return;
            case Op::Add:
            case Op::Sub: {
                Tensor<S>& da = nodes_[n.a].grad;
                Tensor<S>& db = nodes_[n.b].grad;
                const bool as = da.is_scalar() && !g.is_scalar();
                const bool bs = db.is_scalar() && !g.is_scalar();
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    da[as ? 0 : i] += g[i];
                    if (n.op == Op::Add)
                        db[bs ? 0 : i] += g[i];
                    else
                        db[bs ? 0 : i] -= g[i];
                }
                return;
            }
            case Op::Mul: {
                const Tensor<S>& A = nodes_[n.a].value;
                const Tensor<S>& B = nodes_[n.b].value;
                Tensor<S>& da = nodes_[n.a].grad;
                Tensor<S>& db = nodes_[n.b].grad;
                const bool as = A.is_scalar() && !g.is_scalar();
                const bool bs = B.is_scalar() && !g.is_scalar();
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    da[as ? 0 : i] += g[i] * B[bs ? 0 : i];
                    db[bs ? 0 : i] += g[i] * A[as ? 0 : i];
                }
                return;
            }
            case Op::Divide: {
                const Tensor<S>& A = nodes_[n.a].value;
                const Tensor<S>& B = nodes_[n.b].value;
                Tensor<S>& da = nodes_[n.a].grad;
                Tensor<S>& db = nodes_[n.b].grad;
                const bool as = A.is_scalar() && !g.is_scalar();
                const bool bs = B.is_scalar() && !g.is_scalar();
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    const S y = B[bs ? 0 : i];
                    da[as ? 0 : i] += g[i] / y;
                    db[bs ? 0 : i] -= g[i] * n.value[i] / y;
                }
                return;
            }
            case Op::ScalarMul: {
                Tensor<S>& da = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.numel(); ++i) da[i] += n.c * g[i];
                return;
            }
            case Op::MatMul: {
                const Tensor<S>& A = nodes_[n.a].value;
                const Tensor<S>& B = nodes_[n.b].value;
                Tensor<S>& da = nodes_[n.a].grad;
                Tensor<S>& db = nodes_[n.b].grad;
                const std::size_t m = A.shape[0], kk = A.shape[1];
                const std::size_t ncols = B.shape.size() == 1 ? 1 : B.shape[1];
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < ncols; ++j) {
                        const S gij = g[i * ncols + j];
                        if (gij == S(0)) continue;
                        for (std::size_t t = 0; t < kk; ++t) {
                            da[i * kk + t] += gij * B[t * ncols + j];
                            db[t * ncols + j] += A[i * kk + t] * gij;
                        }
                    }
                }
                return;
            }
            case Op::Relu: {
                const Tensor<S>& X = nodes_[n.a].value;
                Tensor<S>& da = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.numel(); ++i)
                    if (X[i] > S(0)) da[i] += g[i];
                return;
            }
            case Op::Exp: {
                Tensor<S>& da = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i] * n.value[i];
                return;
            }
            case Op::Log: {
                const Tensor<S>& X = nodes_[n.a].value;
                Tensor<S>& da = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i] / X[i];
                return;
            }
            case Op::Abs: {
                const Tensor<S>& X = nodes_[n.a].value;
                Tensor<S>& da = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    if (X[i] > S(0))
                        da[i] += g[i];
                    else if (X[i] < S(0))
                        da[i] -= g[i];
                }
                return;
            }
            case Op::Sqrt: {
                Tensor<S>& da = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    if (g[i] == S(0)) continue;
                    da[i] += g[i] / (S(2) * n.value[i]);
                }
                return;
            }
            case Op::Sum: {
                Tensor<S>& da = nodes_[n.a].grad;
                for (std::size_t i = 0; i < da.numel(); ++i) da[i] += g[0];
                return;
            }
            case Op::MaxReduce: {
                nodes_[n.a].grad[n.arg] += g[0];
                return;
            }
            case Op::Softmax: {
                const Tensor<S>& p = n.value;
                Tensor<S>& da = nodes_[n.a].grad;
                S dot = S(0);
                for (std::size_t i = 0; i < g.numel(); ++i) dot += g[i] * p[i];
                for (std::size_t i = 0; i < g.numel(); ++i) da[i] += p[i] * (g[i] - dot);
                return;
            }
        }
    }
};

} // namespace advkit

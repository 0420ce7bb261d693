#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "advkit/graph.hpp"
#include "advkit/kernels.hpp"
#include "advkit/rng.hpp"
#include "advkit/tensor.hpp"

namespace advkit {

// Feedforward ReLU classifier f: [0,1]^d -> R^C. Weights are stored as
// 32-bit floats (the weight-file unit); forward passes run in the caller's
// working precision. A loaded Classifier is immutable in use and safe to
// share across threads.
struct Classifier {
    std::vector<std::size_t> dims;            // [d, h1, ..., C]
    std::vector<std::vector<float>> weights;  // layer k: dims[k+1] x dims[k], row-major
    std::vector<std::vector<float>> biases;   // layer k: dims[k+1]
    float logit_scale = 1.0f;

    std::size_t input_dim() const { return dims.front(); }
    std::size_t num_classes() const { return dims.back(); }
    std::size_t num_layers() const { return dims.size() - 1; }

    void validate() const {
        if (dims.size() < 2) throw ShapeError("classifier needs at least one layer");
        if (weights.size() != num_layers() || biases.size() != num_layers())
            throw ShapeError("layer count mismatch between dims and weights");
        for (std::size_t k = 0; k < num_layers(); ++k) {
            if (weights[k].size() != dims[k + 1] * dims[k])
                throw ShapeError("weight matrix of layer " + std::to_string(k) +
                                 " does not conform to dims");
            if (biases[k].size() != dims[k + 1])
                throw ShapeError("bias vector of layer " + std::to_string(k) +
                                 " does not conform to dims");
        }
        if (!(logit_scale > 0.0f)) throw ConfigError("logit-scale must be > 0");
    }
};

struct Prediction {
    std::vector<double> logits;
    int label = 0;
    double confidence = 0.0;
};

// Deterministic He-style uniform init; biases zero.
inline Classifier init_classifier(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    Classifier m;
    m.dims = dims;
    RandomStream rng(seed);
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        const std::size_t rows = dims[k + 1], cols = dims[k];
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        std::vector<float> w(rows * cols);
        for (float& v : w) v = static_cast<float>(rng.uniform(-bound, bound));
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::vector<float>(rows, 0.0f));
    }
    m.validate();
    return m;
}

namespace detail {

template <typename S>
std::vector<S> cast_weights(const std::vector<float>& w) {
    std::vector<S> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = static_cast<S>(w[i]);
    return out;
}

} // namespace detail

// Builds the forward pass on a graph; x must be a rank-1 node of length d.
// Weights enter as constants. Returns the logits node (length C).
template <typename S>
NodeId forward_graph(const Classifier& m, Graph<S>& g, NodeId x) {
    if (g.value(x).shape != std::vector<std::size_t>{m.input_dim()})
        throw ShapeError("forward: input has shape " + shape_string(g.value(x)) +
                         ", model expects (" + std::to_string(m.input_dim()) + ")");
    NodeId h = x;
    for (std::size_t k = 0; k < m.num_layers(); ++k) {
        const std::size_t rows = m.dims[k + 1], cols = m.dims[k];
        NodeId W = g.constant(Tensor<S>({rows, cols}, detail::cast_weights<S>(m.weights[k])));
        NodeId b = g.constant(Tensor<S>({rows}, detail::cast_weights<S>(m.biases[k])));
        h = g.add(g.matmul(W, h), b);
        if (k + 1 < m.num_layers()) h = g.relu(h);
    }
    if (m.logit_scale != 1.0f) h = g.scalar_mul(h, static_cast<S>(m.logit_scale));
    return h;
}

// Same as above with trainable weights: every weight/bias becomes an input
// leaf so backward yields parameter gradients. Leaf ids are appended to
// weight_nodes as (W0, b0, W1, b1, ...).
template <typename S>
NodeId forward_graph_trainable(const Classifier& m, Graph<S>& g, NodeId x,
                               std::vector<NodeId>& weight_nodes) {
    NodeId h = x;
    for (std::size_t k = 0; k < m.num_layers(); ++k) {
        const std::size_t rows = m.dims[k + 1], cols = m.dims[k];
        NodeId W = g.input(Tensor<S>({rows, cols}, detail::cast_weights<S>(m.weights[k])));
        NodeId b = g.input(Tensor<S>({rows}, detail::cast_weights<S>(m.biases[k])));
        weight_nodes.push_back(W);
        weight_nodes.push_back(b);
        h = g.add(g.matmul(W, h), b);
        if (k + 1 < m.num_layers()) h = g.relu(h);
    }
    if (m.logit_scale != 1.0f) h = g.scalar_mul(h, static_cast<S>(m.logit_scale));
    return h;
}

// No-graph forward. Uses the same kernels in the same order as the graph
// route, so logits agree bitwise within one precision mode.
template <typename S>
std::vector<S> forward_values(const Classifier& m, std::span<const S> x) {
    if (x.size() != m.input_dim())
        throw ShapeError("forward: input length " + std::to_string(x.size()) +
                         ", model expects " + std::to_string(m.input_dim()));
    std::vector<S> cur(x.begin(), x.end());
    std::vector<S> next;
    std::vector<S> scratch_w, scratch_b;
    for (std::size_t k = 0; k < m.num_layers(); ++k) {
        const std::size_t rows = m.dims[k + 1], cols = m.dims[k];
        std::span<const S> W, b;
        if constexpr (std::is_same_v<S, float>) {
            W = m.weights[k];
            b = m.biases[k];
        } else {
            scratch_w = detail::cast_weights<S>(m.weights[k]);
            scratch_b = detail::cast_weights<S>(m.biases[k]);
            W = scratch_w;
            b = scratch_b;
        }
        next.assign(rows, S(0));
        kernels::matvec<S>(W, rows, cols, std::span<const S>(cur), std::span<S>(next));
        kernels::add<S>(std::span<const S>(next), b, std::span<S>(next));
        if (k + 1 < m.num_layers()) kernels::relu<S>(std::span<const S>(next), std::span<S>(next));
        cur.swap(next);
    }
    if (m.logit_scale != 1.0f) {
        const S c = static_cast<S>(m.logit_scale);
        for (S& v : cur) v = c * v;
    }
    return cur;
}

template <typename S>
Prediction predict(const Classifier& m, std::span<const S> x) {
    const std::vector<S> z = forward_values<S>(m, x);
    std::vector<S> p(z.size());
    kernels::stable_softmax<S>(std::span<const S>(z), std::span<S>(p));
    Prediction pred;
    pred.logits.assign(z.begin(), z.end());
    pred.label = static_cast<int>(kernels::argmax<S>(std::span<const S>(z)));
    pred.confidence = static_cast<double>(p[pred.label]);
    return pred;
}

template <typename S>
std::vector<Prediction> predict_batch(const Classifier& m, std::span<const S> xs, std::size_t n) {
    std::vector<Prediction> out;
    out.reserve(n);
    const std::size_t d = m.input_dim();
    for (std::size_t i = 0; i < n; ++i) out.push_back(predict<S>(m, xs.subspan(i * d, d)));
    return out;
}

// Gradient of logit z_k w.r.t. the input.
template <typename S>
Tensor<S> input_gradient_logit(const Classifier& m, const Tensor<S>& x, std::size_t k) {
    if (k >= m.num_classes())
        throw ShapeError("logit index " + std::to_string(k) + " out of range, C=" +
                         std::to_string(m.num_classes()));
    Graph<S> g;
    NodeId xin = g.input(x);
    NodeId z = forward_graph<S>(m, g, xin);
    Tensor<S> sel({m.num_classes()});
    sel[k] = S(1);
    NodeId zk = g.sum(g.mul(z, g.constant(std::move(sel))));
    g.backward(zk);
    return g.grad(xin);
}

} // namespace advkit

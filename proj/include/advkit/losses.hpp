#pragma once

#include <algorithm>
#include <string>

#include "advkit/graph.hpp"
#include "advkit/rng.hpp"

namespace advkit {

enum class LossKind { CrossEntropy, CarliniWagner, Dlr, L2Scaled, Noise, Jitter };
enum class NormKind { L1, L2, LInf };

inline const char* loss_kind_name(LossKind k) {
    switch (k) {
        case LossKind::CrossEntropy: return "CE";
        case LossKind::CarliniWagner: return "CW";
        case LossKind::Dlr: return "DLR";
        case LossKind::L2Scaled: return "L2Scaled";
        case LossKind::Noise: return "Noise";
        case LossKind::Jitter: return "Jitter";
    }
    return "?";
}

inline const char* norm_kind_name(NormKind k) {
    switch (k) {
        case NormKind::L1: return "l1";
        case NormKind::L2: return "l2";
        case NormKind::LInf: return "linf";
    }
    return "?";
}

struct LossConfig {
    LossKind kind = LossKind::CrossEntropy;
    double scale_alpha = 10.0;     // softmax input range control; must stay well below 83
    double sigma = 0.0;            // logit noise magnitude
    NormKind minimized_norm = NormKind::L2;
    double norm_floor = 1e-12;     // guards DLR denominator and the |gamma| division
    bool ce_on_scaled = false;     // CE over rescaled logits (ablation row "CE & Scaled")
    std::string label;             // report label; defaults to the kind name

    std::string display_name() const {
        if (!label.empty()) return label;
        if (kind == LossKind::CrossEntropy && ce_on_scaled) return "CE+Scaled";
        return loss_kind_name(kind);
    }
};

// Per-evaluation notes filled while building a loss (degenerate all-zero
// logits trigger the uniform fallback of the rescaling step).
struct LossTrace {
    bool degenerate_scale = false;
};

template <typename S>
Tensor<S> one_hot(std::size_t classes, int y) {
    Tensor<S> t({classes});
    t[static_cast<std::size_t>(y)] = S(1);
    return t;
}

namespace detail {

// z_i as a differentiable scalar node.
template <typename S>
NodeId pick(Graph<S>& g, NodeId z, std::size_t i) {
    Tensor<S> sel({g.value(z).shape[0]});
    sel[i] = S(1);
    return g.sum(g.mul(z, g.constant(std::move(sel))));
}

// max_{i != y} z_i; the excluded entry is pushed below every finite logit.
template <typename S>
NodeId max_excluding(Graph<S>& g, NodeId z, int y) {
    const std::size_t c = g.value(z).shape[0];
    Tensor<S> mask({c});
    mask[static_cast<std::size_t>(y)] = S(-1e30);
    return g.max_reduce(g.add(z, g.constant(std::move(mask))));
}

} // namespace detail

// CE(z, y) = -log(softmax(z)_y). With saturated logit gaps in 32-bit the
// softmax output is exactly one-hot, the loss quantizes to 0 and the
// gradient vanishes identically.
template <typename S>
NodeId cross_entropy(Graph<S>& g, NodeId z, int y) {
    NodeId p = g.softmax(z);
    NodeId py = detail::pick(g, p, static_cast<std::size_t>(y));
    return g.scalar_mul(g.log(py), S(-1));
}

// CW(z, y) = -z_y + max_{i != y} z_i; positive iff the argmax is not y.
template <typename S>
NodeId cw_loss(Graph<S>& g, NodeId z, int y) {
    return g.sub(detail::max_excluding(g, z, y), detail::pick(g, z, static_cast<std::size_t>(y)));
}

// DLR(z, y) = -(z_y - max_{i != y} z_i) / (z_(1) - z_(3) + floor), the
// untargeted shift- and scale-invariant margin ratio over sorted logits.
template <typename S>
NodeId dlr_loss(Graph<S>& g, NodeId z, int y, S norm_floor = S(1e-12)) {
    const Tensor<S>& zv = g.value(z);
    const std::size_t c = zv.shape[0];
    if (c < 3) throw ShapeError("DLR needs at least 3 classes");
    // descending sort indices, ties to the lowest index
    std::vector<std::size_t> idx(c);
    for (std::size_t i = 0; i < c; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return zv[a] > zv[b]; });
    const std::size_t p1 = idx[0];
    const std::size_t p3 = idx[2];
    NodeId zy = detail::pick(g, z, static_cast<std::size_t>(y));
    NodeId margin = g.sub(zy, detail::max_excluding(g, z, y));
    NodeId denom = g.add(g.sub(detail::pick(g, z, p1), detail::pick(g, z, p3)),
                         g.constant(Tensor<S>::scalar(norm_floor)));
    return g.scalar_mul(g.divide(margin, denom), S(-1));
}

// z_hat = softmax(alpha * z / ||z||_inf). The normalization is a single IEEE
// division per entry, so exactly scaled logit vectors produce bitwise equal
// outputs. All-zero logits fall back to the uniform distribution (flagged).
template <typename S>
NodeId scale_logits(Graph<S>& g, NodeId z, S alpha, LossTrace* trace = nullptr) {
    const Tensor<S>& zv = g.value(z);
    const std::size_t c = zv.shape[0];
    const std::size_t m = kernels::argmax_abs<S>(std::span<const S>(zv.data));
    const S norm = zv[m] < S(0) ? -zv[m] : zv[m];
    if (norm == S(0)) {
        if (trace) trace->degenerate_scale = true;
        return g.constant(Tensor<S>({c}, std::vector<S>(c, S(1) / static_cast<S>(c))));
    }
    NodeId ninf = g.max_reduce(g.abs(z));
    return g.softmax(g.scalar_mul(g.divide(z, ninf), alpha));
}

// L2(z_hat, Y) = ||z_hat - Y||_2
template <typename S>
NodeId l2_loss(Graph<S>& g, NodeId zhat, const Tensor<S>& onehot) {
    NodeId d = g.sub(zhat, g.constant(onehot));
    return g.sqrt(g.sum(g.mul(d, d)));
}

// ||z_hat + N(0, sigma) - Y||_2 with fresh i.i.d. noise per call. sigma == 0
// reduces exactly to l2_loss.
template <typename S>
NodeId noise_loss(Graph<S>& g, NodeId zhat, const Tensor<S>& onehot, S sigma, RandomStream& rng) {
    NodeId noisy = zhat;
    if (sigma > S(0)) {
        const std::size_t c = g.value(zhat).shape[0];
        Tensor<S> noise({c});
        for (std::size_t i = 0; i < c; ++i)
            noise[i] = sigma * static_cast<S>(rng.gaussian());
        noisy = g.add(zhat, g.constant(std::move(noise)));
    }
    return l2_loss(g, noisy, onehot);
}

template <typename S>
NodeId p_norm(Graph<S>& g, NodeId v, NormKind p) {
    switch (p) {
        case NormKind::L1: return g.sum(g.abs(v));
        case NormKind::L2: return g.sqrt(g.sum(g.mul(v, v)));
        case NormKind::LInf: return g.max_reduce(g.abs(v));
    }
    throw ConfigError("unknown norm kind");
}

// The full objective: noise_loss divided by max(||gamma||_p, floor) once the
// current iterate is misclassified, plain noise_loss otherwise. The division
// denominator stays in the graph so gradient flows through gamma.
template <typename S>
NodeId jitter_loss(Graph<S>& g, NodeId zhat, const Tensor<S>& onehot, S sigma, RandomStream& rng,
                   NodeId gamma, NormKind p, S norm_floor, bool misclassified) {
    NodeId num = noise_loss(g, zhat, onehot, sigma, rng);
    if (!misclassified) return num;
    NodeId mag = p_norm(g, gamma, p);
    if (g.value(mag)[0] < norm_floor) {
        // max() picks the constant floor; no gradient through a vanishing norm
        return g.divide(num, g.constant(Tensor<S>::scalar(norm_floor)));
    }
    return g.divide(num, mag);
}

// Dispatcher used by the attack engine: builds the configured loss over the
// logits node. gamma must be the (x_adv - x) node for the Jitter division.
template <typename S>
NodeId build_attack_loss(const LossConfig& cfg, Graph<S>& g, NodeId z, int y, NodeId gamma,
                         bool misclassified, RandomStream& rng, LossTrace* trace = nullptr) {
    const std::size_t c = g.value(z).shape[0];
    switch (cfg.kind) {
        case LossKind::CrossEntropy: {
            if (!cfg.ce_on_scaled) return cross_entropy(g, z, y);
            NodeId zhat = scale_logits(g, z, static_cast<S>(cfg.scale_alpha), trace);
            NodeId py = detail::pick(g, zhat, static_cast<std::size_t>(y));
            return g.scalar_mul(g.log(py), S(-1));
        }
        case LossKind::CarliniWagner:
            return cw_loss(g, z, y);
        case LossKind::Dlr:
            return dlr_loss(g, z, y, static_cast<S>(cfg.norm_floor));
        case LossKind::L2Scaled: {
            NodeId zhat = scale_logits(g, z, static_cast<S>(cfg.scale_alpha), trace);
            return l2_loss(g, zhat, one_hot<S>(c, y));
        }
        case LossKind::Noise: {
            NodeId zhat = scale_logits(g, z, static_cast<S>(cfg.scale_alpha), trace);
            return noise_loss(g, zhat, one_hot<S>(c, y), static_cast<S>(cfg.sigma), rng);
        }
        case LossKind::Jitter: {
            NodeId zhat = scale_logits(g, z, static_cast<S>(cfg.scale_alpha), trace);
            return jitter_loss(g, zhat, one_hot<S>(c, y), static_cast<S>(cfg.sigma), rng, gamma,
                               cfg.minimized_norm, static_cast<S>(cfg.norm_floor), misclassified);
        }
    }
    throw ConfigError("unknown loss kind");
}

// Noiseless loss value at given logits; used by best-point tracking. For the
// noise-bearing kinds this is the sigma=0 objective without the division.
template <typename S>
double noiseless_loss_value(const LossConfig& cfg, std::span<const S> z, int y) {
    Graph<S> g;
    NodeId zn = g.constant(Tensor<S>({z.size()}, std::vector<S>(z.begin(), z.end())));
    RandomStream unused(0);
    LossConfig plain = cfg;
    plain.sigma = 0.0;
    if (plain.kind == LossKind::Jitter) plain.kind = LossKind::Noise;
    NodeId loss = build_attack_loss<S>(plain, g, zn, y, zn, false, unused);
    return static_cast<double>(g.value(loss)[0]);
}

} // namespace advkit

#pragma once

#include <numeric>
#include <optional>

#include "advkit/attack.hpp"
#include "advkit/dataset.hpp"
#include "advkit/model.hpp"
#include "advkit/util.hpp"

namespace advkit {

struct TrainConfig {
    int epochs = 20;
    int batch_size = 32;
    double learning_rate = 0.1;
    std::optional<AttackConfig> adversarial;  // inner-loop PGD for robust training
    std::uint64_t seed = 0;
};

namespace detail {

// CE gradient w.r.t. every weight tensor for one sample; grads are appended
// into acc (same layout as weight_nodes: W0, b0, W1, b1, ...).
template <typename S>
double accumulate_sample_grads(const Classifier& m, std::span<const S> x, int y,
                               std::vector<std::vector<S>>& acc) {
    Graph<S> g;
    std::vector<NodeId> weight_nodes;
    NodeId xin = g.constant(Tensor<S>({x.size()}, std::vector<S>(x.begin(), x.end())));
    NodeId z = forward_graph_trainable<S>(m, g, xin, weight_nodes);
    NodeId loss = cross_entropy<S>(g, z, y);
    g.backward(loss);
    for (std::size_t t = 0; t < weight_nodes.size(); ++t) {
        const Tensor<S>& gr = g.grad(weight_nodes[t]);
        for (std::size_t i = 0; i < gr.numel(); ++i) acc[t][i] += gr[i];
    }
    return static_cast<double>(g.value(loss)[0]);
}

} // namespace detail

// Minibatch SGD on CE. The seed fixes everything including batch shuffling;
// reruns reproduce final weights bitwise. Adversarial mode first replaces
// each batch sample by its inner PGD perturbation against the current model.
template <typename S>
Classifier train_classifier(Classifier model, const Dataset& train, const TrainConfig& cfg) {
    if (train.size() == 0) throw ConfigError("training split is empty");
    if (!(cfg.learning_rate > 0.0) && cfg.learning_rate != 0.0)
        throw ConfigError("learning rate must be >= 0");
    if (cfg.adversarial && cfg.adversarial->engine != Engine::Pgd)
        throw ConfigError("adversarial training requires the PGD engine");

    RandomStream shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    const S lr = static_cast<S>(cfg.learning_rate);
    const std::size_t layers = model.num_layers();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.index(i)]);

        AttackConfig inner;
        if (cfg.adversarial) {
            inner = *cfg.adversarial;
            inner.seed = derive_seed(cfg.seed, "adv-train-epoch", static_cast<std::uint64_t>(epoch));
        }

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<std::vector<S>> acc;
            for (std::size_t k = 0; k < layers; ++k) {
                acc.emplace_back(model.weights[k].size(), S(0));
                acc.emplace_back(model.biases[k].size(), S(0));
            }
            try {
                for (std::size_t b = start; b < end; ++b) {
                    const std::size_t idx = order[b];
                    std::span<const float> raw = train.sample(idx);
                    std::vector<S> x(raw.begin(), raw.end());
                    if (cfg.adversarial) {
                        auto outcome = run_with_restarts<S>(model, x, train.labels[idx], inner, idx);
                        x = outcome.x_adv;
                    }
                    detail::accumulate_sample_grads<S>(model, x, train.labels[idx], acc);
                }
            } catch (const NumericError& e) {
                throw NumericError(std::string("training diverged: ") + e.what());
            }
            const S inv = S(1) / static_cast<S>(end - start);
            for (std::size_t k = 0; k < layers; ++k) {
                std::vector<float>& w = model.weights[k];
                std::vector<float>& bias = model.biases[k];
                const std::vector<S>& gw = acc[2 * k];
                const std::vector<S>& gb = acc[2 * k + 1];
                for (std::size_t i = 0; i < w.size(); ++i)
                    w[i] = static_cast<float>(static_cast<S>(w[i]) - lr * (gw[i] * inv));
                for (std::size_t i = 0; i < bias.size(); ++i)
                    bias[i] = static_cast<float>(static_cast<S>(bias[i]) - lr * (gb[i] * inv));
            }
        }
    }
    return model;
}

template <typename S>
Classifier train_standard(const Classifier& init, const Dataset& train, const TrainConfig& cfg) {
    TrainConfig plain = cfg;
    plain.adversarial.reset();
    return train_classifier<S>(init, train, plain);
}

template <typename S>
Classifier train_adversarial(const Classifier& init, const Dataset& train, const TrainConfig& cfg) {
    if (!cfg.adversarial) throw ConfigError("train_adversarial needs an inner attack config");
    return train_classifier<S>(init, train, cfg);
}

struct AccuracyReport {
    double clean_accuracy = 0.0;
    double robust_accuracy = 0.0;
    std::vector<char> clean_correct;
    std::vector<char> robust_correct;
};

// Robust accuracy counts a sample as correct only if it is correctly
// classified after the attack; clean-misclassified samples are immediate
// attack successes.
template <typename S>
AccuracyReport evaluate_accuracy(const Classifier& m, const Dataset& ds,
                                 const std::optional<AttackConfig>& attack, int threads = 1,
                                 std::size_t limit = 0) {
    const std::size_t n = limit == 0 ? ds.size() : std::min(limit, ds.size());
    if (n == 0) throw ConfigError("evaluation split is empty");
    AccuracyReport rep;
    rep.clean_correct.assign(n, 0);
    rep.robust_correct.assign(n, 0);
    parallel_for(n, threads, [&](std::size_t i) {
        std::span<const float> raw = ds.sample(i);
        std::vector<S> x(raw.begin(), raw.end());
        const Prediction pred = predict<S>(m, x);
        rep.clean_correct[i] = pred.label == ds.labels[i] ? 1 : 0;
        if (attack) {
            auto outcome = run_with_restarts<S>(m, x, ds.labels[i], *attack, i);
            rep.robust_correct[i] = outcome.success ? 0 : 1;
        } else {
            rep.robust_correct[i] = rep.clean_correct[i];
        }
    });
    std::size_t clean = 0, robust = 0;
    for (std::size_t i = 0; i < n; ++i) {
        clean += rep.clean_correct[i];
        robust += rep.robust_correct[i];
    }
    rep.clean_accuracy = static_cast<double>(clean) / static_cast<double>(n);
    rep.robust_accuracy = static_cast<double>(robust) / static_cast<double>(n);
    return rep;
}

} // namespace advkit

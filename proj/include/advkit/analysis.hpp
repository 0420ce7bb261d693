#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advkit/dataset.hpp"
#include "advkit/losses.hpp"
#include "advkit/model.hpp"

namespace advkit {

// One serialized attack result; mirrors the results.csv row.
struct OutcomeRow {
    std::size_t index = 0;
    int true_label = -1;
    int clean_pred = -1;
    int adv_pred = -1;
    bool success = false;
    double l2_norm = 0.0;
    double linf_norm = 0.0;
    std::optional<int> first_success_iteration;
    std::string loss;
    std::string model;
    std::uint64_t seed = 0;
};

enum class ConfusionVariant { All, MisclassifiedOnly, Binarized };

// Rows index the original (clean) prediction, columns the adversarial one.
struct ConfusionMatrix {
    std::size_t classes = 0;
    ConfusionVariant variant = ConfusionVariant::All;
    std::vector<long long> counts;

    long long at(std::size_t i, std::size_t j) const { return counts[i * classes + j]; }
    long long& at(std::size_t i, std::size_t j) { return counts[i * classes + j]; }

    std::size_t nonzero_off_diagonal() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < classes; ++i)
            for (std::size_t j = 0; j < classes; ++j)
                if (i != j && at(i, j) != 0) ++n;
        return n;
    }
};

inline ConfusionMatrix confusion(std::span<const OutcomeRow> rows, std::size_t classes,
                                 ConfusionVariant variant) {
    ConfusionMatrix cm;
    cm.classes = classes;
    cm.variant = variant;
    cm.counts.assign(classes * classes, 0);
    for (const OutcomeRow& r : rows) {
        const auto i = static_cast<std::size_t>(r.clean_pred);
        const auto j = static_cast<std::size_t>(r.adv_pred);
        if (variant != ConfusionVariant::All && i == j) continue;
        cm.at(i, j) += 1;
    }
    if (variant == ConfusionVariant::Binarized)
        for (long long& c : cm.counts) c = c != 0 ? 1 : 0;
    return cm;
}

inline std::vector<double> average_confusions(const std::vector<ConfusionMatrix>& ms) {
    if (ms.empty()) throw ConfigError("average_confusions needs at least one matrix");
    const std::size_t c = ms.front().classes;
    for (const ConfusionMatrix& m : ms)
        if (m.classes != c) throw ShapeError("confusion matrices disagree on class count");
    std::vector<double> avg(c * c, 0.0);
    for (const ConfusionMatrix& m : ms)
        for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += static_cast<double>(m.counts[i]);
    for (double& v : avg) v /= static_cast<double>(ms.size());
    return avg;
}

// Per-sample count of attacked models that misclassify the input. Robust
// images are misclassified by none, non-robust by all.
struct RobustnessPartition {
    std::size_t models = 0;
    std::vector<int> per_sample_count;
    std::vector<std::size_t> histogram;  // size models+1
    std::size_t robust_count = 0;
    std::size_t nonrobust_count = 0;

    bool is_robust(std::size_t i) const { return per_sample_count[i] == 0; }
    bool is_nonrobust(std::size_t i) const {
        return per_sample_count[i] == static_cast<int>(models);
    }
};

inline RobustnessPartition partition_robustness(
    const std::vector<std::span<const OutcomeRow>>& per_model) {
    if (per_model.empty()) throw ConfigError("partition needs at least one model");
    const std::size_t n = per_model.front().size();
    for (const auto& rows : per_model)
        if (rows.size() != n)
            throw ShapeError("per-model outcome lists have different lengths");
    RobustnessPartition part;
    part.models = per_model.size();
    part.per_sample_count.assign(n, 0);
    for (const auto& rows : per_model)
        for (std::size_t i = 0; i < n; ++i) {
            if (rows[i].index != per_model.front()[i].index)
                throw ShapeError("per-model outcome lists are not sample-aligned");
            if (rows[i].success) part.per_sample_count[i] += 1;
        }
    part.histogram.assign(part.models + 1, 0);
    for (int c : part.per_sample_count) part.histogram[static_cast<std::size_t>(c)] += 1;
    part.robust_count = part.histogram.front();
    part.nonrobust_count = part.histogram.back();
    return part;
}

struct ClassDistribution {
    std::vector<std::size_t> robust;
    std::vector<std::size_t> nonrobust;
};

inline ClassDistribution class_distribution(const RobustnessPartition& part,
                                            std::span<const int> labels, std::size_t classes) {
    ClassDistribution dist;
    dist.robust.assign(classes, 0);
    dist.nonrobust.assign(classes, 0);
    for (std::size_t i = 0; i < part.per_sample_count.size(); ++i) {
        if (part.is_robust(i)) dist.robust[static_cast<std::size_t>(labels[i])] += 1;
        if (part.is_nonrobust(i)) dist.nonrobust[static_cast<std::size_t>(labels[i])] += 1;
    }
    return dist;
}

// Box-plot style summary: quartiles plus whiskers at the central 95% range.
struct SummaryStats {
    std::size_t count = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double min = 0.0;
    double max = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double whisker_lo = 0.0;  // 2.5th percentile
    double whisker_hi = 0.0;  // 97.5th percentile
};

// Linear-interpolation quantile over a sorted sample (the numpy default).
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) return 0.0;
    if (sorted.size() == 1) return sorted[0];
    const double h = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - std::floor(h);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline SummaryStats summarize(std::vector<double> values) {
    SummaryStats s;
    s.count = values.size();
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(values.size()));
    std::sort(values.begin(), values.end());
    s.min = values.front();
    s.max = values.back();
    s.q1 = quantile_sorted(values, 0.25);
    s.median = quantile_sorted(values, 0.5);
    s.q3 = quantile_sorted(values, 0.75);
    s.whisker_lo = quantile_sorted(values, 0.025);
    s.whisker_hi = quantile_sorted(values, 0.975);
    return s;
}

struct LogitStats {
    SummaryStats logits;       // over every logit entry
    SummaryStats confidence;   // per-sample max softmax probability
};

template <typename S>
LogitStats logit_stats(const Classifier& m, const Dataset& ds, std::size_t limit = 0) {
    const std::size_t n = limit == 0 ? ds.size() : std::min(limit, ds.size());
    std::vector<double> logits;
    std::vector<double> confidence;
    logits.reserve(n * m.num_classes());
    confidence.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::span<const float> raw = ds.sample(i);
        std::vector<S> x(raw.begin(), raw.end());
        const Prediction pred = predict<S>(m, x);
        for (double z : pred.logits) logits.push_back(z);
        confidence.push_back(pred.confidence);
    }
    return LogitStats{summarize(std::move(logits)), summarize(std::move(confidence))};
}

// Cosine-similarity matrix of per-class input gradients (the saliency
// geometry). Zero-gradient classes yield a defined cosine of 0 and a flag.
struct CsmEntry {
    std::size_t classes = 0;
    std::vector<double> matrix;  // C x C
    double mean_off_diagonal = 0.0;
    bool zero_gradient = false;

    double at(std::size_t i, std::size_t j) const { return matrix[i * classes + j]; }
};

template <typename S>
CsmEntry csm(const Classifier& m, std::span<const S> x) {
    const std::size_t c = m.num_classes();
    CsmEntry entry;
    entry.classes = c;
    entry.matrix.assign(c * c, 0.0);

    Graph<S> g;
    NodeId xin = g.input(Tensor<S>({x.size()}, std::vector<S>(x.begin(), x.end())));
    NodeId z = forward_graph<S>(m, g, xin);
    std::vector<std::vector<double>> grads(c);
    std::vector<double> norms(c, 0.0);
    for (std::size_t k = 0; k < c; ++k) {
        Tensor<S> sel({c});
        sel[k] = S(1);
        NodeId zk = g.sum(g.mul(z, g.constant(std::move(sel))));
        g.backward(zk);
        const Tensor<S>& gr = g.grad(xin);
        grads[k].assign(gr.data.begin(), gr.data.end());
        double nn = 0.0;
        for (double v : grads[k]) nn += v * v;
        norms[k] = std::sqrt(nn);
        if (norms[k] == 0.0) entry.zero_gradient = true;
        g.zero_grad();
    }
    double off_sum = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            double cosine = 0.0;
            if (norms[i] != 0.0 && norms[j] != 0.0) {
                double dot = 0.0;
                for (std::size_t t = 0; t < grads[i].size(); ++t) dot += grads[i][t] * grads[j][t];
                cosine = dot / (norms[i] * norms[j]);
            }
            entry.matrix[i * c + j] = cosine;
            if (i != j) off_sum += cosine;
        }
    }
    entry.mean_off_diagonal = c > 1 ? off_sum / static_cast<double>(c * (c - 1)) : 0.0;
    return entry;
}

// CW loss along x + t * gamma/||gamma||_2 for uniform t in [0, t_max],
// domain-clamped before evaluation. Records the first grid t with CW > 0.
struct LandscapeCurve {
    std::vector<double> ts;
    std::vector<double> values;
    std::optional<double> first_positive_t;
};

template <typename S>
LandscapeCurve landscape(const Classifier& m, std::span<const S> x, std::span<const S> gamma,
                         int y, double t_max, std::size_t steps) {
    double norm = 0.0;
    for (const S v : gamma) norm += static_cast<double>(v) * static_cast<double>(v);
    norm = std::sqrt(norm);
    if (norm == 0.0) throw NumericError("landscape direction gamma is zero");
    if (steps < 2) throw ConfigError("landscape needs at least 2 steps");

    LossConfig cw;
    cw.kind = LossKind::CarliniWagner;

    LandscapeCurve curve;
    std::vector<S> probe(x.size());
    for (std::size_t s = 0; s < steps; ++s) {
        const double t = t_max * static_cast<double>(s) / static_cast<double>(steps - 1);
        for (std::size_t i = 0; i < probe.size(); ++i) {
            double v = static_cast<double>(x[i]) + t * static_cast<double>(gamma[i]) / norm;
            probe[i] = static_cast<S>(std::clamp(v, 0.0, 1.0));
        }
        const std::vector<S> z = forward_values<S>(m, probe);
        const double value = noiseless_loss_value<S>(cw, z, y);
        curve.ts.push_back(t);
        curve.values.push_back(value);
        if (value > 0.0 && !curve.first_positive_t) curve.first_positive_t = t;
    }
    return curve;
}

// Per-loss l2 statistics over successful attacks.
inline std::map<std::string, SummaryStats> norm_stats(std::span<const OutcomeRow> rows) {
    std::map<std::string, std::vector<double>> by_loss;
    for (const OutcomeRow& r : rows)
        if (r.success) by_loss[r.loss].push_back(r.l2_norm);
    std::map<std::string, SummaryStats> out;
    for (auto& [loss, values] : by_loss) out[loss] = summarize(std::move(values));
    return out;
}

// Channel-summed absolute perturbation per pixel; channels == 1 returns
// plain |gamma|.
template <typename S>
std::vector<double> perturbation_magnitude(std::span<const S> x_adv, std::span<const S> x,
                                           std::size_t channels) {
    if (channels == 0 || x.size() % channels != 0)
        throw ShapeError("perturbation_magnitude: dimension not divisible by channel count");
    const std::size_t pixels = x.size() / channels;
    std::vector<double> out(pixels, 0.0);
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t p = 0; p < pixels; ++p)
            out[p] += std::abs(static_cast<double>(x_adv[c * pixels + p]) -
                               static_cast<double>(x[c * pixels + p]));
    return out;
}

} // namespace advkit

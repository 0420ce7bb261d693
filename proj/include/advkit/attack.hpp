#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "advkit/losses.hpp"
#include "advkit/model.hpp"

namespace advkit {

enum class Engine { Pgd, Apgd };

inline const char* engine_name(Engine e) { return e == Engine::Pgd ? "PGD" : "APGD"; }

struct AttackConfig {
    LossConfig loss;
    double epsilon = 8.0 / 255.0;
    int iterations = 100;
    int restarts = 1;
    double step_size = 0.0;  // vanilla PGD; 0 resolves to epsilon/4
    Engine engine = Engine::Apgd;
    std::uint64_t seed = 0;
    bool track_best = true;    // off: the outcome is the final iterate
    bool record_trace = false; // keep per-gradient-pass loss values

    double effective_step() const { return step_size > 0.0 ? step_size : epsilon / 4.0; }
};

template <typename S>
struct AttackOutcome {
    std::vector<S> x_adv;
    bool success = false;
    int clean_pred = -1;
    int adv_pred = -1;
    double l2_norm = 0.0;
    double linf_norm = 0.0;
    std::optional<int> first_success_iteration;
    std::vector<double> trace;
    bool degenerate_scale = false;  // the rescaling hit all-zero logits at least once
};

template <typename S>
using IterateCallback = std::function<void(std::span<const S>)>;

// RNG stream for one (seed, sample, restart) triple; every draw an attack
// makes for that sample comes from here, so parallel and serial execution
// agree bitwise.
inline std::uint64_t attack_stream_seed(std::uint64_t seed, std::size_t sample,
                                        std::size_t restart) {
    return derive_seed(derive_seed(seed, "attack-sample", sample), "restart", restart);
}

// clamp(clamp(candidate, x-eps, x+eps), 0, 1), elementwise.
template <typename S>
void project_linf(std::span<S> candidate, std::span<const S> x, double epsilon) {
    const S eps = static_cast<S>(epsilon);
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        S lo = x[i] - eps;
        S hi = x[i] + eps;
        S v = candidate[i];
        if (v < lo) v = lo;
        if (v > hi) v = hi;
        if (v < S(0)) v = S(0);
        if (v > S(1)) v = S(1);
        candidate[i] = v;
    }
}

template <typename S>
std::vector<S> random_start(std::span<const S> x, double epsilon, RandomStream& rng) {
    std::vector<S> out(x.begin(), x.end());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = x[i] + static_cast<S>(epsilon * (2.0 * rng.uniform01() - 1.0));
    project_linf<S>(out, x, epsilon);
    return out;
}

// x_{t+1} = project(x_t + step * sign(grad)); sign(0) = 0. Non-finite
// gradients are an error (obfuscation or NaN upstream).
template <typename S>
std::vector<S> pgd_step(std::span<const S> x_adv, std::span<const S> gradient, double step_size,
                        std::span<const S> x, double epsilon) {
    const S step = static_cast<S>(step_size);
    std::vector<S> out(x_adv.size());
    for (std::size_t i = 0; i < x_adv.size(); ++i) {
        const S gi = gradient[i];
        if (!std::isfinite(static_cast<double>(gi)))
            throw NumericError("non-finite gradient in pgd_step");
        const S s = gi > S(0) ? S(1) : (gi < S(0) ? S(-1) : S(0));
        out[i] = x_adv[i] + step * s;
    }
    project_linf<S>(out, x, epsilon);
    return out;
}

namespace detail {

template <typename S>
struct PointEval {
    int pred = -1;
    double noiseless_loss = 0.0;  // only computed for unsuccessful points
    double l2 = 0.0;
    double linf = 0.0;
    double minimized = 0.0;
};

template <typename S>
PointEval<S> eval_point(const Classifier& m, std::span<const S> x_adv, std::span<const S> x,
                        int y, const LossConfig& loss) {
    PointEval<S> ev;
    const std::vector<S> z = forward_values<S>(m, x_adv);
    ev.pred = static_cast<int>(kernels::argmax<S>(std::span<const S>(z)));
    std::vector<S> gamma(x_adv.size());
    for (std::size_t i = 0; i < gamma.size(); ++i) gamma[i] = x_adv[i] - x[i];
    ev.l2 = static_cast<double>(kernels::norm_l2<S>(std::span<const S>(gamma)));
    ev.linf = static_cast<double>(kernels::norm_linf<S>(std::span<const S>(gamma)));
    switch (loss.minimized_norm) {
        case NormKind::L1: ev.minimized = kernels::norm_l1<S>(std::span<const S>(gamma)); break;
        case NormKind::L2: ev.minimized = ev.l2; break;
        case NormKind::LInf: ev.minimized = ev.linf; break;
    }
    if (ev.pred == y) ev.noiseless_loss = noiseless_loss_value<S>(loss, z, y);
    return ev;
}

template <typename S>
struct GradEval {
    double loss = 0.0;
    std::vector<S> grad;
    bool degenerate_scale = false;
};

template <typename S>
GradEval<S> loss_gradient(const Classifier& m, std::span<const S> x_adv, std::span<const S> x,
                          int y, const LossConfig& loss, RandomStream& rng) {
    Graph<S> g;
    NodeId xin = g.input(Tensor<S>({x_adv.size()}, std::vector<S>(x_adv.begin(), x_adv.end())));
    NodeId z = forward_graph<S>(m, g, xin);
    const bool misclassified =
        static_cast<int>(kernels::argmax<S>(std::span<const S>(g.value(z).data))) != y;
    NodeId gamma = -1;
    if (loss.kind == LossKind::Jitter)
        gamma = g.sub(xin, g.constant(Tensor<S>({x.size()}, std::vector<S>(x.begin(), x.end()))));
    LossTrace trace;
    NodeId l = build_attack_loss<S>(loss, g, z, y, gamma, misclassified, rng, &trace);
    g.backward(l);
    GradEval<S> out;
    out.loss = static_cast<double>(g.value(l)[0]);
    out.grad = g.grad(xin).data;
    out.degenerate_scale = trace.degenerate_scale;
    return out;
}

} // namespace detail

// Gradient of a configured loss w.r.t. the input, evaluated at the clean
// point (gamma = 0). Complements input_gradient_logit for saliency use.
template <typename S>
Tensor<S> input_gradient_loss(const Classifier& m, const Tensor<S>& x, int y,
                              const LossConfig& loss, RandomStream* rng = nullptr) {
    RandomStream fallback(0);
    Graph<S> g;
    NodeId xin = g.input(x);
    NodeId z = forward_graph<S>(m, g, xin);
    const bool misclassified =
        static_cast<int>(kernels::argmax<S>(std::span<const S>(g.value(z).data))) != y;
    NodeId gamma = -1;
    if (loss.kind == LossKind::Jitter) gamma = g.sub(xin, g.constant(x));
    NodeId l = build_attack_loss<S>(loss, g, z, y, gamma, misclassified,
                                    rng ? *rng : fallback);
    g.backward(l);
    return g.grad(xin);
}

// Best-point state under the success-preserving ordering: (a) success beats
// failure, (b) successful points compare by the minimized norm (smaller
// wins), (c) unsuccessful points compare by noiseless loss (higher wins). A
// successful best is never displaced by an unsuccessful candidate.
template <typename S>
struct BestPoint {
    bool valid = false;
    bool success = false;
    std::vector<S> x;
    int pred = -1;
    double noiseless_loss = 0.0;
    double minimized = 0.0;
    double l2 = 0.0;
    double linf = 0.0;
    int iteration = 0;
};

template <typename S>
bool track_best_prefers(const BestPoint<S>& candidate, const BestPoint<S>& best) {
    if (!best.valid) return true;
    if (candidate.success != best.success) return candidate.success;
    if (candidate.success) return candidate.minimized < best.minimized;
    return candidate.noiseless_loss > best.noiseless_loss;
}

template <typename S>
void track_best(BestPoint<S>& best, const BestPoint<S>& candidate) {
    if (track_best_prefers(candidate, best)) best = candidate;
}

namespace detail {

template <typename S>
BestPoint<S> make_candidate(std::vector<S> point, const PointEval<S>& ev, int y, int iteration) {
    BestPoint<S> c;
    c.valid = true;
    c.success = ev.pred != y;
    c.x = std::move(point);
    c.pred = ev.pred;
    c.noiseless_loss = ev.noiseless_loss;
    c.minimized = ev.minimized;
    c.l2 = ev.l2;
    c.linf = ev.linf;
    c.iteration = iteration;
    return c;
}

template <typename S>
struct SingleRun {
    BestPoint<S> best;      // under track_best ordering
    BestPoint<S> final_pt;  // last iterate, for the no-tracking mode
    std::optional<int> first_success;
    std::vector<double> trace;
    bool degenerate_scale = false;
};

template <typename S>
void observe(SingleRun<S>& run, BestPoint<S> candidate) {
    if (candidate.success && !run.first_success)
        run.first_success = candidate.iteration;
    run.final_pt = candidate;
    track_best(run.best, candidate);
}

template <typename S>
SingleRun<S> single_pgd(const Classifier& m, std::span<const S> x, int y,
                        const AttackConfig& cfg, std::uint64_t stream_seed,
                        const IterateCallback<S>* cb) {
    RandomStream rng(stream_seed);
    SingleRun<S> run;
    std::vector<S> xt = random_start<S>(x, cfg.epsilon, rng);
    if (cb) (*cb)(xt);
    observe(run, make_candidate(xt, eval_point<S>(m, xt, x, y, cfg.loss), y, 0));
    const double step = cfg.effective_step();
    for (int t = 1; t <= cfg.iterations; ++t) {
        GradEval<S> ge = loss_gradient<S>(m, xt, x, y, cfg.loss, rng);
        run.degenerate_scale |= ge.degenerate_scale;
        if (cfg.record_trace) run.trace.push_back(ge.loss);
        xt = pgd_step<S>(xt, ge.grad, step, x, cfg.epsilon);
        if (cb) (*cb)(xt);
        observe(run, make_candidate(xt, eval_point<S>(m, xt, x, y, cfg.loss), y, t));
    }
    return run;
}

// Checkpoint fractions p_0=0, p_1=0.22, p_{j+1} = p_j + max(p_j - p_{j-1} -
// 0.03, 0.06), mapped to iteration indices by ceil(p * iterations).
inline std::vector<int> apgd_checkpoints(int iterations) {
    std::vector<int> w;
    double p_prev = 0.0, p_cur = 0.22;
    while (true) {
        const int iter = static_cast<int>(std::ceil(p_cur * iterations));
        if (iter >= iterations) break;
        if (w.empty() || iter > w.back()) w.push_back(iter);
        const double p_next = p_cur + std::max(p_cur - p_prev - 0.03, 0.06);
        p_prev = p_cur;
        p_cur = p_next;
    }
    return w;
}

template <typename S>
SingleRun<S> single_apgd(const Classifier& m, std::span<const S> x, int y,
                         const AttackConfig& cfg, std::uint64_t stream_seed,
                         const IterateCallback<S>* cb) {
    RandomStream rng(stream_seed);
    SingleRun<S> run;

    double eta = 2.0 * cfg.epsilon;
    std::vector<S> x0 = random_start<S>(x, cfg.epsilon, rng);
    if (cb) (*cb)(x0);
    observe(run, make_candidate(x0, eval_point<S>(m, x0, x, y, cfg.loss), y, 0));

    GradEval<S> ge = loss_gradient<S>(m, x0, x, y, cfg.loss, rng);
    run.degenerate_scale |= ge.degenerate_scale;
    if (cfg.record_trace) run.trace.push_back(ge.loss);
    double f_prev = ge.loss;
    double f_max = ge.loss;
    std::vector<S> x_max = x0;

    std::vector<S> x_prev = x0;
    std::vector<S> x_cur = pgd_step<S>(x0, ge.grad, eta, x, cfg.epsilon);
    if (cb) (*cb)(x_cur);
    observe(run, make_candidate(x_cur, eval_point<S>(m, x_cur, x, y, cfg.loss), y, 1));

    const std::vector<int> checkpoints = apgd_checkpoints(cfg.iterations);
    std::size_t next_cp = 0;
    int improved = 0, window = 0;
    double eta_at_cp = eta, fmax_at_cp = f_max;

    for (int t = 1; t < cfg.iterations; ++t) {
        if (next_cp < checkpoints.size() && t == checkpoints[next_cp]) {
            const bool few_improvements = improved < 0.75 * static_cast<double>(window);
            const bool stagnated = eta == eta_at_cp && f_max == fmax_at_cp;
            if (few_improvements || stagnated) {
                eta *= 0.5;
                x_cur = x_max;   // restart from the best objective seen
                x_prev = x_max;
                f_prev = f_max;
            }
            improved = 0;
            window = 0;
            eta_at_cp = eta;
            fmax_at_cp = f_max;
            ++next_cp;
        }

        ge = loss_gradient<S>(m, x_cur, x, y, cfg.loss, rng);
        run.degenerate_scale |= ge.degenerate_scale;
        if (cfg.record_trace) run.trace.push_back(ge.loss);
        if (ge.loss > f_prev) ++improved;
        ++window;
        if (ge.loss > f_max) {
            f_max = ge.loss;
            x_max = x_cur;
        }
        f_prev = ge.loss;

        // gradient step, then momentum combination with coefficient 0.75
        std::vector<S> z = pgd_step<S>(x_cur, ge.grad, eta, x, cfg.epsilon);
        std::vector<S> x_next(x_cur.size());
        for (std::size_t i = 0; i < x_next.size(); ++i) {
            x_next[i] = x_cur[i] + S(0.75) * (z[i] - x_cur[i]) + S(0.25) * (x_cur[i] - x_prev[i]);
        }
        project_linf<S>(std::span<S>(x_next), x, cfg.epsilon);
        x_prev = std::move(x_cur);
        x_cur = std::move(x_next);
        if (cb) (*cb)(x_cur);
        observe(run, make_candidate(x_cur, eval_point<S>(m, x_cur, x, y, cfg.loss), y, t + 1));
    }
    return run;
}

template <typename S>
AttackOutcome<S> outcome_from_run(const SingleRun<S>& run, int clean_pred, int y, bool tracked) {
    const BestPoint<S>& pt = tracked ? run.best : run.final_pt;
    AttackOutcome<S> out;
    out.x_adv = pt.x;
    out.success = pt.pred != y;
    out.clean_pred = clean_pred;
    out.adv_pred = pt.pred;
    out.l2_norm = pt.l2;
    out.linf_norm = pt.linf;
    out.first_success_iteration = run.first_success;
    out.trace = run.trace;
    out.degenerate_scale = run.degenerate_scale;
    return out;
}

template <typename S>
std::optional<AttackOutcome<S>> clean_shortcut(const Classifier& m, std::span<const S> x, int y,
                                               int* clean_pred_out) {
    const Prediction pred = predict<S>(m, x);
    *clean_pred_out = pred.label;
    if (pred.label == y) return std::nullopt;
    AttackOutcome<S> out;
    out.x_adv.assign(x.begin(), x.end());
    out.success = true;
    out.clean_pred = pred.label;
    out.adv_pred = pred.label;
    out.l2_norm = 0.0;
    out.linf_norm = 0.0;
    out.first_success_iteration = 0;
    return out;
}

} // namespace detail

template <typename S>
AttackOutcome<S> run_pgd(const Classifier& m, std::span<const S> x, int y,
                         const AttackConfig& cfg, std::size_t sample_index = 0,
                         const IterateCallback<S>* cb = nullptr) {
    int clean_pred = -1;
    if (auto shortcut = detail::clean_shortcut<S>(m, x, y, &clean_pred)) return *shortcut;
    auto run = detail::single_pgd<S>(m, x, y, cfg, attack_stream_seed(cfg.seed, sample_index, 0), cb);
    return detail::outcome_from_run(run, clean_pred, y, cfg.track_best);
}

template <typename S>
AttackOutcome<S> run_apgd(const Classifier& m, std::span<const S> x, int y,
                          const AttackConfig& cfg, std::size_t sample_index = 0,
                          const IterateCallback<S>* cb = nullptr) {
    if (cfg.iterations < 5) throw ConfigError("APGD needs at least 5 iterations");
    int clean_pred = -1;
    if (auto shortcut = detail::clean_shortcut<S>(m, x, y, &clean_pred)) return *shortcut;
    auto run = detail::single_apgd<S>(m, x, y, cfg, attack_stream_seed(cfg.seed, sample_index, 0), cb);
    return detail::outcome_from_run(run, clean_pred, y, cfg.track_best);
}

// Best outcome across restarts under the track_best ordering. Streams are
// keyed by (seed, sample, restart), so raising the restart count reruns the
// lower restarts identically.
template <typename S>
AttackOutcome<S> run_with_restarts(const Classifier& m, std::span<const S> x, int y,
                                   const AttackConfig& cfg, std::size_t sample_index = 0,
                                   const IterateCallback<S>* cb = nullptr) {
    if (cfg.restarts < 1) throw ConfigError("restarts must be >= 1");
    if (cfg.engine == Engine::Apgd && cfg.iterations < 5)
        throw ConfigError("APGD needs at least 5 iterations");
    int clean_pred = -1;
    if (auto shortcut = detail::clean_shortcut<S>(m, x, y, &clean_pred)) return *shortcut;

    BestPoint<S> best;
    std::optional<int> first_success;
    std::vector<double> trace;
    bool degenerate = false;
    BestPoint<S> last_final;
    for (int r = 0; r < cfg.restarts; ++r) {
        const std::uint64_t seed = attack_stream_seed(cfg.seed, sample_index, static_cast<std::size_t>(r));
        auto run = cfg.engine == Engine::Pgd ? detail::single_pgd<S>(m, x, y, cfg, seed, cb)
                                             : detail::single_apgd<S>(m, x, y, cfg, seed, cb);
        track_best(best, run.best);
        if (run.first_success && !first_success) first_success = run.first_success;
        if (cfg.record_trace)
            trace.insert(trace.end(), run.trace.begin(), run.trace.end());
        degenerate |= run.degenerate_scale;
        last_final = run.final_pt;
    }

    AttackOutcome<S> out;
    const BestPoint<S>& pt = cfg.track_best ? best : last_final;
    out.x_adv = pt.x;
    out.success = pt.pred != y;
    out.clean_pred = clean_pred;
    out.adv_pred = pt.pred;
    out.l2_norm = pt.l2;
    out.linf_norm = pt.linf;
    out.first_success_iteration = first_success;
    out.trace = std::move(trace);
    out.degenerate_scale = degenerate;
    return out;
}

} // namespace advkit

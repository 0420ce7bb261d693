#include <doctest.h>

#include <cmath>

#include "advkit/attack.hpp"
#include "advkit/gradcheck.hpp"
#include "advkit/rng.hpp"

using namespace advkit;

namespace {

Classifier linear(std::vector<float> w, std::vector<float> b, std::size_t classes,
                  std::size_t dim) {
    Classifier m;
    m.dims = {dim, classes};
    m.weights = {std::move(w)};
    m.biases = {std::move(b)};
    m.validate();
    return m;
}

// Exact L-inf oracle for linear models: the misclassification margin
// max_{k!=y} (z_k - z_y) is convex piecewise-linear, so its maximum over the
// clamped box sits at a corner; enumerate all of them.
bool corner_oracle_attackable(const Classifier& m, std::span<const double> x, int y,
                              double eps) {
    const std::size_t d = m.input_dim();
    std::vector<double> lo(d), hi(d);
    for (std::size_t i = 0; i < d; ++i) {
        lo[i] = std::max(0.0, x[i] - eps);
        hi[i] = std::min(1.0, x[i] + eps);
    }
    for (std::size_t mask = 0; mask < (std::size_t(1) << d); ++mask) {
        std::vector<double> p(d);
        for (std::size_t i = 0; i < d; ++i) p[i] = (mask >> i) & 1 ? hi[i] : lo[i];
        if (predict<double>(m, p).label != y) return true;
    }
    return false;
}

// Two-class model whose margin is a tent peaked at an interior point c:
// z1 - z0 = peak - sum_i |x_i - c_i|, built from paired ReLUs.
Classifier tent_model(const std::vector<float>& c, float peak) {
    const std::size_t d = c.size();
    Classifier m;
    m.dims = {d, 2 * d, 2};
    std::vector<float> w1(2 * d * d, 0.0f), b1(2 * d);
    for (std::size_t i = 0; i < d; ++i) {
        w1[(2 * i) * d + i] = 1.0f;
        b1[2 * i] = -c[i];
        w1[(2 * i + 1) * d + i] = -1.0f;
        b1[2 * i + 1] = c[i];
    }
    std::vector<float> w2(2 * 2 * d, 0.0f), b2 = {0.0f, peak};
    for (std::size_t j = 0; j < 2 * d; ++j) w2[2 * d + j] = -1.0f;
    m.weights = {std::move(w1), std::move(w2)};
    m.biases = {std::move(b1), std::move(b2)};
    m.validate();
    return m;
}

AttackConfig pgd_config(double eps, int iterations, std::uint64_t seed) {
    AttackConfig cfg;
    cfg.loss.kind = LossKind::CarliniWagner;
    cfg.epsilon = eps;
    cfg.iterations = iterations;
    cfg.engine = Engine::Pgd;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("project_linf") {
    const std::vector<double> x = {0.5, 0.1, 0.95};
    SUBCASE("feasible points pass through unchanged") {
        std::vector<double> c = {0.52, 0.08, 0.94};
        const std::vector<double> orig = c;
        project_linf<double>(c, x, 0.05);
        CHECK(c == orig);
    }
    SUBCASE("ball clamp then domain clamp") {
        std::vector<double> c = {0.5 + 0.2, 0.1 - 0.2, 0.95 + 0.2};
        project_linf<double>(c, x, 0.1);
        CHECK(c[0] == doctest::Approx(0.6));
        CHECK(c[1] == doctest::Approx(0.0));
        CHECK(c[2] == 1.0);  // ball bound 1.05 clamps to the domain
    }
    SUBCASE("idempotence over random candidates") {
        RandomStream rng(1);
        for (int t = 0; t < 1000; ++t) {
            std::vector<double> base(4), cand(4);
            for (int i = 0; i < 4; ++i) {
                base[i] = rng.uniform01();
                cand[i] = rng.uniform(-0.5, 1.5);
            }
            const double eps = rng.uniform(0.0, 0.3);
            project_linf<double>(cand, base, eps);
            std::vector<double> twice = cand;
            project_linf<double>(twice, base, eps);
            CHECK(twice == cand);
        }
    }
}

TEST_CASE("random_start") {
    const std::vector<double> x = {0.3, 0.7, 0.5};
    SUBCASE("epsilon 0 returns x exactly") {
        RandomStream rng(2);
        CHECK(random_start<double>(x, 0.0, rng) == x);
    }
    SUBCASE("every draw stays inside the ball") {
        RandomStream rng(3);
        for (int t = 0; t < 10000; ++t) {
            const std::vector<double> s = random_start<double>(x, 0.1, rng);
            for (int i = 0; i < 3; ++i) {
                CHECK(std::abs(s[i] - x[i]) <= 0.1 + 1e-15);
                CHECK(s[i] >= 0.0);
                CHECK(s[i] <= 1.0);
            }
        }
    }
    SUBCASE("fixed seed reproduces the start") {
        RandomStream a(4), b(4);
        CHECK(random_start<double>(x, 0.2, a) == random_start<double>(x, 0.2, b));
    }
}

TEST_CASE("pgd_step") {
    const std::vector<double> x = {0.5, 0.5};
    SUBCASE("zero gradient leaves the iterate in place") {
        const std::vector<double> xt = {0.52, 0.48};
        const std::vector<double> g = {0.0, 0.0};
        CHECK(pgd_step<double>(xt, g, 0.01, x, 0.1) == xt);
    }
    SUBCASE("all-positive gradient with step epsilon lands on the ball corner") {
        const std::vector<double> g = {1.0, 2.5};
        const std::vector<double> out = pgd_step<double>(x, g, 0.1, x, 0.1);
        CHECK(out == std::vector<double>{0.6, 0.6});
    }
    SUBCASE("non-finite gradient is an error") {
        const std::vector<double> g = {std::nan(""), 0.0};
        CHECK_THROWS_AS(pgd_step<double>(x, g, 0.1, x, 0.1), NumericError);
    }
    SUBCASE("one step on a 1-D linear margin reaches the optimal corner") {
        // z = [0, w x]: CW gradient w.r.t. x is w, so one epsilon-step lands
        // on x + eps*sign(w), the maximizer of a linear function on the ball
        for (float w : {2.0f, -3.0f}) {
            Classifier m = linear({0.0f, w}, {0.0f, 0.0f}, 2, 1);
            const std::vector<double> x0 = {0.5};
            Graph<double> g;
            NodeId xin = g.input(Tensor<double>({1}, x0));
            NodeId z = forward_graph<double>(m, g, xin);
            g.backward(cw_loss(g, z, 0));
            const std::vector<double> stepped =
                pgd_step<double>(x0, g.grad(xin).data, 0.1, x0, 0.1);
            CHECK(stepped[0] == doctest::Approx(0.5 + 0.1 * (w > 0 ? 1 : -1)));
        }
    }
}

TEST_CASE("run_pgd degenerate and analytic cases") {
    SUBCASE("epsilon 0: success iff the clean prediction is wrong") {
        Classifier m = linear({1.0f, 0.0f, 0.0f, 1.0f}, {0.0f, 0.0f}, 2, 2);
        AttackConfig cfg = pgd_config(0.0, 5, 7);
        const std::vector<double> x = {0.9, 0.1};
        auto correct = run_pgd<double>(m, x, 0, cfg);
        CHECK_FALSE(correct.success);
        CHECK(correct.adv_pred == 0);
        auto wrong = run_pgd<double>(m, x, 1, cfg);
        CHECK(wrong.success);
        CHECK(wrong.x_adv == std::vector<double>{0.9, 0.1});
        CHECK(wrong.l2_norm == 0.0);
        CHECK(wrong.first_success_iteration == 0);
    }
    SUBCASE("margin beyond the reachable bound is robust") {
        // z0 - z1 = (w0-w1).x + 2; the ball takes at most eps*||w0-w1||_1 = 0.3
        Classifier m = linear({1.0f, 1.0f, 2.0f, 0.0f}, {2.0f, 0.0f}, 2, 2);
        const std::vector<double> x = {0.5, 0.5};
        REQUIRE(predict<double>(m, x).label == 0);
        auto out = run_pgd<double>(m, x, 0, pgd_config(0.1, 100, 8));
        CHECK_FALSE(out.success);
        CHECK(out.adv_pred == 0);
    }
    SUBCASE("attackable margin flips within 10 iterations") {
        // margin at x is 0.1; eps*||w0-w1||_1 = 0.2*2 = 0.4 > 0.1
        Classifier m = linear({1.0f, 0.0f, 0.0f, 1.0f}, {0.0f, 0.0f}, 2, 2);
        const std::vector<double> x = {0.55, 0.45};
        REQUIRE(predict<double>(m, x).label == 0);
        auto out = run_pgd<double>(m, x, 0, pgd_config(0.2, 100, 9));
        CHECK(out.success);
        REQUIRE(out.first_success_iteration.has_value());
        CHECK(*out.first_success_iteration <= 10);
        CHECK(out.linf_norm <= 0.2 + 1e-15);
    }
}

TEST_CASE("pgd agrees with the corner-enumeration oracle") {
    RandomStream rng(10);
    int attackable = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t d = 1 + rng.index(3);
        const std::size_t classes = 2 + rng.index(2);
        std::vector<float> w(classes * d), b(classes);
        for (float& v : w) v = static_cast<float>(rng.uniform(-2, 2));
        for (float& v : b) v = static_cast<float>(rng.uniform(-0.5, 0.5));
        Classifier m = linear(std::move(w), std::move(b), classes, d);
        std::vector<double> x(d);
        for (double& v : x) v = rng.uniform(0.2, 0.8);
        const int y = predict<double>(m, x).label;  // clean-correct by construction
        const double eps = rng.uniform(0.05, 0.3);

        const bool oracle = corner_oracle_attackable(m, x, y, eps);
        // a single start can stall chasing a class whose margin never crosses
        // zero; fresh starts decorrelate the initial target class
        AttackConfig cfg = pgd_config(eps, 100, 1000 + t);
        cfg.restarts = 5;
        const auto out = run_with_restarts<double>(m, x, y, cfg, t);
        CHECK(out.success == oracle);
        if (oracle) ++attackable;
    }
    CHECK(attackable > 20);  // the instance mix exercises both outcomes
    CHECK(attackable < 95);
}

TEST_CASE("track_best ordering") {
    auto mk = [](bool success, double norm, double loss) {
        BestPoint<double> p;
        p.valid = true;
        p.success = success;
        p.minimized = norm;
        p.noiseless_loss = loss;
        return p;
    };
    SUBCASE("success beats failure regardless of norm") {
        BestPoint<double> best = mk(false, 0.0, 100.0);
        track_best(best, mk(true, 5.0, -1.0));
        CHECK(best.success);
        CHECK(best.minimized == 5.0);
    }
    SUBCASE("successful points prefer the smaller minimized norm") {
        BestPoint<double> best = mk(true, 0.5, 0.0);
        track_best(best, mk(true, 0.3, 0.0));
        CHECK(best.minimized == 0.3);
        track_best(best, mk(true, 0.4, 0.0));
        CHECK(best.minimized == 0.3);
    }
    SUBCASE("unsuccessful points prefer the higher loss") {
        BestPoint<double> best = mk(false, 0.0, 1.0);
        track_best(best, mk(false, 0.0, 2.0));
        CHECK(best.noiseless_loss == 2.0);
        track_best(best, mk(false, 0.0, 1.5));
        CHECK(best.noiseless_loss == 2.0);
    }
    SUBCASE("a successful best is never displaced by a failure") {
        BestPoint<double> best = mk(true, 0.5, 0.0);
        track_best(best, mk(false, 0.0, 1e9));
        CHECK(best.success);
    }
}

TEST_CASE("apgd") {
    SUBCASE("requires at least 5 iterations") {
        Classifier m = linear({1.0f, 0.0f, 0.0f, 1.0f}, {0.0f, 0.0f}, 2, 2);
        AttackConfig cfg = pgd_config(0.1, 3, 1);
        cfg.engine = Engine::Apgd;
        CHECK_THROWS_AS(run_apgd<double>(m, std::vector<double>{0.5, 0.5}, 0, cfg), ConfigError);
    }
    SUBCASE("epsilon 0 keeps the run_pgd contract") {
        Classifier m = linear({1.0f, 0.0f, 0.0f, 1.0f}, {0.0f, 0.0f}, 2, 2);
        AttackConfig cfg = pgd_config(0.0, 20, 2);
        cfg.engine = Engine::Apgd;
        const std::vector<double> x = {0.9, 0.1};
        CHECK_FALSE(run_apgd<double>(m, x, 0, cfg).success);
        CHECK(run_apgd<double>(m, x, 1, cfg).success);
    }
    SUBCASE("every visited iterate is feasible") {
        Classifier m = tent_model({0.55f, 0.45f, 0.5f}, -0.05f);
        const std::vector<double> x = {0.5, 0.5, 0.5};
        AttackConfig cfg = pgd_config(0.12, 60, 3);
        cfg.engine = Engine::Apgd;
        int visited = 0;
        IterateCallback<double> cb = [&](std::span<const double> pt) {
            ++visited;
            for (std::size_t i = 0; i < pt.size(); ++i) {
                CHECK(std::abs(pt[i] - x[i]) <= 0.12 + 1e-15);
                CHECK(pt[i] >= 0.0);
                CHECK(pt[i] <= 1.0);
            }
        };
        run_apgd<double>(m, x, 0, cfg, 0, &cb);
        CHECK(visited == 61);  // start plus one point per iteration
    }
    SUBCASE("adaptive steps localize an interior optimum at least as well as pgd") {
        // tent peak strictly inside the ball; fixed eps/4 steps orbit it
        Classifier m = tent_model({0.53f, 0.47f}, -0.02f);
        const std::vector<double> x = {0.5, 0.5};
        int apgd_wins = 0;
        for (int t = 0; t < 100; ++t) {
            AttackConfig pc = pgd_config(0.1, 50, 100 + t);
            AttackConfig ac = pc;
            ac.engine = Engine::Apgd;
            auto eval_best = [&](const AttackOutcome<double>& o) {
                LossConfig cw;
                cw.kind = LossKind::CarliniWagner;
                return noiseless_loss_value<double>(cw, forward_values<double>(m, o.x_adv), 0);
            };
            const double pgd_best = eval_best(run_pgd<double>(m, x, 0, pc, t));
            const double apgd_best = eval_best(run_apgd<double>(m, x, 0, ac, t));
            if (apgd_best >= pgd_best) ++apgd_wins;
        }
        CHECK(apgd_wins >= 80);
    }
}

TEST_CASE("restarts") {
    Classifier m = linear({1.0f, 0.0f, 0.0f, 1.0f}, {0.15f, 0.0f}, 2, 2);
    const std::vector<double> x = {0.5, 0.5};
    REQUIRE(predict<double>(m, x).label == 0);

    SUBCASE("restarts=1 equals the single run bitwise") {
        AttackConfig cfg = pgd_config(0.2, 30, 77);
        cfg.restarts = 1;
        const auto single = run_pgd<double>(m, x, 0, cfg, 5);
        const auto multi = run_with_restarts<double>(m, x, 0, cfg, 5);
        CHECK(single.x_adv == multi.x_adv);
        CHECK(single.success == multi.success);
        CHECK(single.l2_norm == multi.l2_norm);
    }
    SUBCASE("success never decreases with more restarts") {
        Classifier tricky = tent_model({0.56f, 0.44f}, 0.03f);
        for (int t = 0; t < 25; ++t) {
            AttackConfig one = pgd_config(0.1, 15, 400 + t);
            AttackConfig five = one;
            five.restarts = 5;
            const bool s1 = run_with_restarts<double>(tricky, x, 0, one, t).success;
            const bool s5 = run_with_restarts<double>(tricky, x, 0, five, t).success;
            if (s1) CHECK(s5);
        }
    }
    SUBCASE("five-restart jitter norm is never above the single-restart norm") {
        AttackConfig one = pgd_config(0.2, 25, 88);
        one.loss.kind = LossKind::Jitter;
        one.loss.sigma = 0.1;
        AttackConfig five = one;
        five.restarts = 5;
        for (int t = 0; t < 20; ++t) {
            std::vector<double> pt = {0.45 + 0.01 * t, 0.55 - 0.01 * t};
            const auto o1 = run_with_restarts<double>(m, pt, 0, one, t);
            const auto o5 = run_with_restarts<double>(m, pt, 0, five, t);
            if (o1.success && o5.success) CHECK(o5.l2_norm <= o1.l2_norm);
            if (o1.success) CHECK(o5.success);
        }
    }
}

TEST_CASE("loss-target input gradients") {
    Classifier m = linear({1.0f, -2.0f, 0.5f, 1.5f}, {0.0f, 0.1f}, 2, 2);
    Tensor<double> x({2}, {0.4, 0.6});
    SUBCASE("CE gradient matches finite differences at the clean point") {
        LossConfig ce;
        const Tensor<double> g = input_gradient_loss<double>(m, x, 0, ce);
        auto f = [&](const Tensor<double>& probe) {
            LossConfig cfg;
            return static_cast<double>(noiseless_loss_value<double>(
                cfg, forward_values<double>(m, probe.data), 0));
        };
        const Tensor<double> fd = finite_difference_gradient<double>(f, x, 1e-7);
        CHECK(gradients_match(fd, g));
    }
    SUBCASE("CW gradient of a linear model is the row difference") {
        LossConfig cw;
        cw.kind = LossKind::CarliniWagner;
        const Tensor<double> g = input_gradient_loss<double>(m, x, 0, cw);
        CHECK(g[0] == doctest::Approx(0.5 - 1.0));
        CHECK(g[1] == doctest::Approx(1.5 - -2.0));
    }
}

TEST_CASE("trace records one loss per gradient pass") {
    Classifier m = linear({1.0f, 0.0f, 0.0f, 1.0f}, {0.1f, 0.0f}, 2, 2);
    const std::vector<double> x = {0.55, 0.45};
    REQUIRE(predict<double>(m, x).label == 0);
    for (Engine engine : {Engine::Pgd, Engine::Apgd}) {
        AttackConfig cfg = pgd_config(0.05, 20, 3);
        cfg.engine = engine;
        cfg.record_trace = true;
        const auto out = engine == Engine::Pgd ? run_pgd<double>(m, x, 0, cfg)
                                               : run_apgd<double>(m, x, 0, cfg);
        CHECK(out.trace.size() == 20);
        for (double v : out.trace) CHECK(std::isfinite(v));
    }
}

TEST_CASE("determinism and feasibility of outcomes") {
    Classifier m = tent_model({0.52f, 0.5f, 0.46f}, 0.05f);
    const std::vector<double> x = {0.5, 0.5, 0.5};
    for (Engine engine : {Engine::Pgd, Engine::Apgd}) {
        AttackConfig cfg = pgd_config(0.15, 40, 31337);
        cfg.engine = engine;
        cfg.loss.kind = LossKind::Jitter;
        cfg.loss.sigma = 0.05;
        const auto a = run_with_restarts<double>(m, x, 0, cfg, 3);
        const auto b = run_with_restarts<double>(m, x, 0, cfg, 3);
        CHECK(a.x_adv == b.x_adv);
        CHECK(a.success == b.success);
        CHECK(a.l2_norm == b.l2_norm);
        CHECK(a.first_success_iteration == b.first_success_iteration);
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(std::abs(a.x_adv[i] - x[i]) <= 0.15 * (1 + 1e-15));
            CHECK(a.x_adv[i] >= 0.0);
            CHECK(a.x_adv[i] <= 1.0);
        }
    }
}

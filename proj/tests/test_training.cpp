#include <doctest.h>

#include "advkit/dataset.hpp"
#include "advkit/train.hpp"

using namespace advkit;

namespace {

// CE over a fixed batch, for the first-epoch descent check.
double batch_ce(const Classifier& m, const Dataset& ds, std::size_t count) {
    double total = 0;
    for (std::size_t i = 0; i < count; ++i) {
        std::span<const float> raw = ds.sample(i);
        std::vector<double> x(raw.begin(), raw.end());
        Graph<double> g;
        NodeId z = forward_graph<double>(m, g, g.input(Tensor<double>({x.size()}, x)));
        total += g.value(cross_entropy(g, z, ds.labels[i]))[0];
    }
    return total / static_cast<double>(count);
}

bool same_weights(const Classifier& a, const Classifier& b) {
    return a.dims == b.dims && a.weights == b.weights && a.biases == b.biases;
}

} // namespace

TEST_CASE("generate_synthetic") {
    SUBCASE("spread 0 collapses each class onto its mean") {
        const Dataset ds = generate_synthetic(3, 4, 5, 0.0, 42);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const std::size_t ref = static_cast<std::size_t>(ds.labels[i]);
            for (std::size_t j = 0; j < 4; ++j)
                CHECK(ds.inputs[i * 4 + j] == ds.inputs[ref * 4 + j]);
        }
    }
    SUBCASE("same seed is bitwise identical, different seed is not") {
        const Dataset a = generate_synthetic(4, 6, 10, 0.1, 7);
        const Dataset b = generate_synthetic(4, 6, 10, 0.1, 7);
        const Dataset c = generate_synthetic(4, 6, 10, 0.1, 8);
        CHECK(a.inputs == b.inputs);
        CHECK(a.labels == b.labels);
        CHECK(a.inputs != c.inputs);
    }
    SUBCASE("round-robin labels keep prefixes balanced") {
        const Dataset ds = generate_synthetic(5, 4, 8, 0.2, 3);
        for (std::size_t i = 0; i < ds.size(); ++i)
            CHECK(ds.labels[i] == static_cast<int>(i % 5));
        const auto counts = ds.class_counts();
        for (std::size_t c : counts) CHECK(c == 8);
    }
    SUBCASE("inputs stay in the domain") {
        const Dataset ds = generate_synthetic(3, 8, 50, 0.5, 9);
        for (float v : ds.inputs) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
    SUBCASE("parameter validation") {
        CHECK_THROWS_AS(generate_synthetic(1, 4, 5, 0.1, 0), ConfigError);
        CHECK_THROWS_AS(generate_synthetic(3, 1, 5, 0.1, 0), ConfigError);
    }
}

TEST_CASE("train_standard") {
    const Dataset train = generate_synthetic(4, 8, 40, 0.08, 11);
    const Classifier init = init_classifier({8, 16, 4}, 12);

    SUBCASE("lr 0 leaves the weights unchanged") {
        TrainConfig tc;
        tc.epochs = 1;
        tc.learning_rate = 0.0;
        tc.seed = 5;
        const Classifier out = train_standard<float>(init, train, tc);
        CHECK(same_weights(out, init));
    }
    SUBCASE("fixed-batch loss decreases over the first epoch") {
        TrainConfig tc;
        tc.epochs = 1;
        tc.learning_rate = 0.3;
        tc.seed = 5;
        const double before = batch_ce(init, train, 32);
        const Classifier out = train_standard<float>(init, train, tc);
        CHECK(batch_ce(out, train, 32) < before);
    }
    SUBCASE("seeded rerun reproduces the weights bitwise") {
        TrainConfig tc;
        tc.epochs = 3;
        tc.learning_rate = 0.3;
        tc.seed = 5;
        const Classifier a = train_standard<float>(init, train, tc);
        const Classifier b = train_standard<float>(init, train, tc);
        CHECK(same_weights(a, b));
    }
    SUBCASE("empty training split is an error") {
        Dataset empty;
        empty.dim = 8;
        empty.classes = 4;
        CHECK_THROWS_AS(train_standard<float>(init, empty, TrainConfig{}), ConfigError);
    }
    SUBCASE("divergent training surfaces a numeric error") {
        TrainConfig tc;
        tc.epochs = 3;
        tc.learning_rate = 1e12;
        tc.seed = 5;
        CHECK_THROWS_AS(train_standard<float>(init, train, tc), NumericError);
    }
}

TEST_CASE("smoke benchmark reaches 95 percent") {
    const Dataset train = generate_synthetic(10, 32, 200, 0.1, 21);
    const Dataset test = generate_synthetic(10, 32, 60, 0.1, 21);  // same blobs, same seed
    TrainConfig tc;
    tc.epochs = 12;
    tc.batch_size = 32;
    tc.learning_rate = 0.5;
    tc.seed = 22;
    const Classifier model =
        train_standard<float>(init_classifier({32, 64, 10}, 23), train, tc);
    const AccuracyReport acc = evaluate_accuracy<float>(model, test, std::nullopt, 4);
    CHECK(acc.clean_accuracy >= 0.95);
}

TEST_CASE("train_adversarial") {
    const Dataset train = generate_synthetic(4, 12, 80, 0.14, 31);
    const Dataset test = generate_synthetic(4, 12, 40, 0.14, 31);
    const Classifier init = init_classifier({12, 24, 4}, 32);

    SUBCASE("inner epsilon 0 reproduces standard training bitwise") {
        TrainConfig plain;
        plain.epochs = 2;
        plain.learning_rate = 0.3;
        plain.seed = 33;
        TrainConfig adv = plain;
        AttackConfig inner;
        inner.engine = Engine::Pgd;
        inner.epsilon = 0.0;
        inner.iterations = 3;
        inner.step_size = 0.0;
        adv.adversarial = inner;
        const Classifier a = train_standard<float>(init, train, plain);
        const Classifier b = train_adversarial<float>(init, train, adv);
        CHECK(same_weights(a, b));
    }
    SUBCASE("the inner attack must be PGD") {
        TrainConfig adv;
        AttackConfig inner;
        inner.engine = Engine::Apgd;
        adv.adversarial = inner;
        CHECK_THROWS_AS(train_adversarial<float>(init, train, adv), ConfigError);
    }
    SUBCASE("adversarial training raises robust accuracy on the smoke benchmark") {
        const double eps = 0.15;
        TrainConfig plain;
        plain.epochs = 25;
        plain.learning_rate = 0.4;
        plain.seed = 34;
        TrainConfig adv = plain;
        AttackConfig inner;
        inner.engine = Engine::Pgd;
        inner.epsilon = eps;
        inner.iterations = 7;
        inner.step_size = eps / 4.0;
        adv.adversarial = inner;

        const Classifier std_model = train_standard<float>(init, train, plain);
        const Classifier adv_model = train_adversarial<float>(init, train, adv);

        AttackConfig eval_attack;
        eval_attack.loss.kind = LossKind::CarliniWagner;
        eval_attack.engine = Engine::Pgd;
        eval_attack.epsilon = eps;
        eval_attack.iterations = 25;
        eval_attack.seed = 35;
        const AccuracyReport std_acc =
            evaluate_accuracy<float>(std_model, test, eval_attack, 4);
        const AccuracyReport adv_acc =
            evaluate_accuracy<float>(adv_model, test, eval_attack, 4);
        CHECK(adv_acc.robust_accuracy > std_acc.robust_accuracy);
        // the usual clean-accuracy trade-off is recorded, not enforced
        if (adv_acc.clean_accuracy > std_acc.clean_accuracy)
            MESSAGE("adversarial clean accuracy ", adv_acc.clean_accuracy,
                    " above standard ", std_acc.clean_accuracy);
    }
}

TEST_CASE("evaluate_accuracy") {
    const Dataset ds = generate_synthetic(3, 8, 40, 0.1, 41);
    TrainConfig tc;
    tc.epochs = 6;
    tc.learning_rate = 0.4;
    tc.seed = 42;
    const Classifier model = train_standard<float>(init_classifier({8, 16, 3}, 43), ds, tc);

    SUBCASE("no attack: robust equals clean") {
        const AccuracyReport r = evaluate_accuracy<float>(model, ds, std::nullopt, 2);
        CHECK(r.robust_accuracy == r.clean_accuracy);
        CHECK(r.robust_correct == r.clean_correct);
    }
    SUBCASE("epsilon 0 attack: robust equals clean") {
        AttackConfig atk;
        atk.engine = Engine::Pgd;
        atk.epsilon = 0.0;
        atk.iterations = 3;
        const AccuracyReport r = evaluate_accuracy<float>(model, ds, atk, 2);
        CHECK(r.robust_accuracy == r.clean_accuracy);
    }
    SUBCASE("robust accuracy never exceeds clean accuracy") {
        AttackConfig atk;
        atk.loss.kind = LossKind::CarliniWagner;
        atk.engine = Engine::Pgd;
        atk.epsilon = 0.1;
        atk.iterations = 15;
        atk.seed = 44;
        const AccuracyReport r = evaluate_accuracy<float>(model, ds, atk, 4);
        CHECK(r.robust_accuracy <= r.clean_accuracy);
        for (std::size_t i = 0; i < r.clean_correct.size(); ++i)
            if (r.robust_correct[i]) CHECK(r.clean_correct[i]);
    }
    SUBCASE("robust accuracy is non-increasing in epsilon") {
        double prev = 1.0;
        for (double eps : {0.02, 0.06, 0.12, 0.2}) {
            AttackConfig atk;
            atk.loss.kind = LossKind::CarliniWagner;
            atk.engine = Engine::Pgd;
            atk.epsilon = eps;
            atk.iterations = 15;
            atk.seed = 45;
            const AccuracyReport r = evaluate_accuracy<float>(model, ds, atk, 4);
            CHECK(r.robust_accuracy <= prev + 1e-12);
            prev = r.robust_accuracy;
        }
    }
}

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "advkit/config.hpp"
#include "advkit/dataset.hpp"
#include "advkit/report.hpp"
#include "advkit/rng.hpp"

using namespace advkit;

namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / name; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

} // namespace

TEST_CASE("config parsing") {
    SUBCASE("empty attack block fills the published defaults") {
        const ExperimentConfig cfg = parse_config_text(R"({"attack": {}})", "test");
        CHECK(cfg.attack.epsilon == doctest::Approx(8.0 / 255.0).epsilon(1e-15));
        CHECK(cfg.attack.iterations == 100);
        CHECK(cfg.attack.restarts == 1);
        CHECK(cfg.attack.engine == Engine::Apgd);
        REQUIRE(cfg.attack.losses.size() == 1);
        CHECK(cfg.attack.losses[0].scale_alpha == 10.0);
        CHECK(cfg.precision == 32);
    }
    SUBCASE("unknown keys are rejected by name") {
        CHECK_THROWS_WITH_AS(parse_config_text(R"({"attakc": {}})", "test"),
                             doctest::Contains("unknown key 'config.attakc'"), ConfigError);
        CHECK_THROWS_WITH_AS(
            parse_config_text(R"({"attack": {"epsilonn": 0.1}})", "test"),
            doctest::Contains("unknown key 'attack.epsilonn'"), ConfigError);
        CHECK_THROWS_WITH_AS(
            parse_config_text(R"({"attack": {"losses": [{"kind":"CE","sgima":1}]}})", "test"),
            doctest::Contains("attack.losses[0].sgima"), ConfigError);
    }
    SUBCASE("out-of-range values name the offending field") {
        CHECK_THROWS_WITH_AS(
            parse_config_text(R"({"attack": {"losses": [{"kind":"Jitter","scale_alpha":100}]}})",
                              "test"),
            doctest::Contains("scale_alpha"), ConfigError);
        CHECK_THROWS_WITH_AS(parse_config_text(R"({"attack": {"epsilon": -0.5}})", "test"),
                             doctest::Contains("attack.epsilon"), ConfigError);
        CHECK_THROWS_WITH_AS(parse_config_text(R"({"attack": {"iterations": 0}})", "test"),
                             doctest::Contains("attack.iterations"), ConfigError);
        CHECK_THROWS_WITH_AS(
            parse_config_text(R"({"attack": {"epsilon": 0.1, "step_size": 0.2}})", "test"),
            doctest::Contains("step_size"), ConfigError);
        CHECK_THROWS_WITH_AS(parse_config_text(R"({"precision": 48})", "test"),
                             doctest::Contains("precision"), ConfigError);
        CHECK_THROWS_WITH_AS(
            parse_config_text(R"({"attack":{"losses":[{"kind":"Twist"}]}})", "test"),
            doctest::Contains("kind"), ConfigError);
        CHECK_THROWS_WITH_AS(
            parse_config_text(R"({"models":[{"name":"a","learning_rate":0}]})", "test"),
            doctest::Contains("learning_rate"), ConfigError);
    }
    SUBCASE("missing required fields are named") {
        CHECK_THROWS_WITH_AS(parse_config_text(R"({"attack":{"losses":[{}]}})", "test"),
                             doctest::Contains("attack.losses[0].kind"), ConfigError);
        CHECK_THROWS_WITH_AS(parse_config_text(R"({"models":[{"hidden":[4]}]})", "test"),
                             doctest::Contains("name"), ConfigError);
        CHECK_THROWS_WITH_AS(parse_config_text(R"({"dataset":{"type":"cifar10"}})", "test"),
                             doctest::Contains("test_path"), ConfigError);
    }
    SUBCASE("every out-of-invariant value is rejected with its field named") {
        // field path fragments paired with an invalid document
        const std::vector<std::pair<std::string, std::string>> cases = {
            {"sigma", R"({"attack":{"losses":[{"kind":"Noise","sigma":-0.1}]}})"},
            {"norm_floor", R"({"attack":{"losses":[{"kind":"DLR","norm_floor":0}]}})"},
            {"minimized_norm", R"({"attack":{"losses":[{"kind":"Jitter","minimized_norm":"l7"}]}})"},
            {"restarts", R"({"attack":{"restarts":0}})"},
            {"threads", R"({"threads":0})"},
            {"batch_size", R"({"models":[{"name":"a","batch_size":0}]})"},
            {"logit_scale", R"({"models":[{"name":"a","logit_scale":0}]})"},
            {"epochs", R"({"models":[{"name":"a","epochs":-1}]})"},
            {"hidden", R"({"models":[{"name":"a","hidden":[0]}]})"},
            {"spread", R"({"dataset":{"type":"synthetic","spread":-1}})"},
            {"classes", R"({"dataset":{"type":"synthetic","classes":1}})"},
            {"dim", R"({"dataset":{"type":"synthetic","dim":1}})"},
            {"steps", R"({"analyze":{"landscape":{"steps":1}}})"},
            {"t_max_scale", R"({"analyze":{"landscape":{"t_max_scale":0}}})"},
            {"iterations", R"({"attack":{"engine":"APGD","iterations":4}})"},
            {"epsilon", R"({"models":[{"name":"a","adversarial":{"epsilon":0}}]})"},
            {"engine", R"({"attack":{"engine":"BFGS"}})"},
            {"type", R"({"dataset":{"type":"imagenet"}})"},
        };
        for (const auto& [field, doc] : cases) {
            CAPTURE(doc);
            CHECK_THROWS_WITH_AS(parse_config_text(doc, "fuzz"),
                                 doctest::Contains(field.c_str()), ConfigError);
        }
    }
    SUBCASE("cross references are checked") {
        CHECK_THROWS_WITH_AS(
            parse_config_text(R"({"models":[{"name":"a"},{"name":"a"}]})", "test"),
            doctest::Contains("duplicate model name"), ConfigError);
        CHECK_THROWS_WITH_AS(
            parse_config_text(R"({"models":[{"name":"a","base":"ghost"}]})", "test"),
            doctest::Contains("unknown base"), ConfigError);
    }
    SUBCASE("normalized round trip is stable") {
        const std::string text = R"({
            "seed": 9, "threads": 2,
            "dataset": {"type":"synthetic","classes":4,"dim":8,"spread":0.12},
            "models": [{"name":"m","hidden":[16],"epochs":3,
                        "adversarial":{"epsilon":0.05,"iterations":5}}],
            "attack": {"losses":[{"kind":"Jitter","sigma":0.1},{"kind":"CE","scaled":true}],
                        "epsilon":0.05,"iterations":20},
            "analyze": {"csm_samples": 7},
            "report": {"ablation": true}
        })";
        const ExperimentConfig once = parse_config_text(text, "test");
        const std::string ser1 = serialize_config(once);
        const ExperimentConfig twice = parse_config_text(ser1, "test");
        const std::string ser2 = serialize_config(twice);
        CHECK(ser1 == ser2);
        CHECK(twice.attack.losses[1].ce_on_scaled);
        CHECK(twice.attack.losses[1].display_name() == "CE+Scaled");
        CHECK(twice.models[0].adversarial);
    }
    SUBCASE("scaled flag only applies to CE") {
        CHECK_THROWS_WITH_AS(
            parse_config_text(R"({"attack":{"losses":[{"kind":"CW","scaled":true}]}})", "test"),
            doctest::Contains("scaled"), ConfigError);
    }
}

TEST_CASE("standalone attack config json") {
    const AttackConfig cfg = parse_attack_config_json(
        R"({"engine":"PGD","epsilon":0.1,"iterations":40,"seed":5,
            "loss":{"kind":"Jitter","sigma":0.05,"minimized_norm":"linf"}})");
    CHECK(cfg.engine == Engine::Pgd);
    CHECK(cfg.iterations == 40);
    CHECK(cfg.loss.kind == LossKind::Jitter);
    CHECK(cfg.loss.minimized_norm == NormKind::LInf);
    CHECK_THROWS_AS(parse_attack_config_json(R"({"engine":"APGD","iterations":3})"), ConfigError);
    CHECK_THROWS_AS(parse_attack_config_json("not json"), FormatError);
}

TEST_CASE("cifar10 reader") {
    SUBCASE("single record with label 7 and saturated pixels") {
        const auto path = temp_file("advkit_cifar_one.bin");
        std::vector<unsigned char> rec(3073, 255);
        rec[0] = 7;
        std::ofstream(path, std::ios::binary)
            .write(reinterpret_cast<const char*>(rec.data()), rec.size());
        const Dataset ds = read_cifar10_binary(path.string());
        CHECK(ds.size() == 1);
        CHECK(ds.dim == 3072);
        CHECK(ds.labels[0] == 7);
        for (float v : ds.inputs) CHECK(v == 1.0f);
        fs::remove(path);
    }
    SUBCASE("truncated file names the byte offset") {
        const auto path = temp_file("advkit_cifar_trunc.bin");
        std::vector<unsigned char> rec(3073 + 100, 0);
        std::ofstream(path, std::ios::binary)
            .write(reinterpret_cast<const char*>(rec.data()), rec.size());
        CHECK_THROWS_WITH_AS(read_cifar10_binary(path.string()), doctest::Contains("3073"),
                             FormatError);
        CHECK_THROWS_WITH_AS(read_cifar10_binary(path.string()), doctest::Contains("3073"),
                             FormatError);
        fs::remove(path);
    }
    SUBCASE("label byte above 9 is rejected") {
        const auto path = temp_file("advkit_cifar_label.bin");
        std::vector<unsigned char> rec(3073, 0);
        rec[0] = 12;
        std::ofstream(path, std::ios::binary)
            .write(reinterpret_cast<const char*>(rec.data()), rec.size());
        CHECK_THROWS_WITH_AS(read_cifar10_binary(path.string()),
                             doctest::Contains("label byte 12"), FormatError);
        fs::remove(path);
    }
    SUBCASE("a full batch parses into 10000 samples") {
        const auto path = temp_file("advkit_cifar_batch.bin");
        {
            std::ofstream out(path, std::ios::binary);
            std::vector<char> rec(3073, 3);
            for (int i = 0; i < 10000; ++i) {
                rec[0] = static_cast<char>(i % 10);
                out.write(rec.data(), rec.size());
            }
        }
        const Dataset ds = read_cifar10_binary(path.string());
        CHECK(ds.size() == 10000);
        CHECK(ds.labels[9999] == 9);
        CHECK(ds.inputs[0] == doctest::Approx(3.0f / 255.0f));
        fs::remove(path);
    }
}

TEST_CASE("results csv") {
    std::vector<OutcomeRow> rows;
    OutcomeRow r;
    r.index = 0;
    r.true_label = 1;
    r.clean_pred = 1;
    r.adv_pred = 2;
    r.success = true;
    r.l2_norm = 0.123456789123;
    r.linf_norm = 0.0625;
    r.first_success_iteration = 17;
    r.loss = "Jitter";
    r.model = "standard";
    r.seed = 42;
    rows.push_back(r);
    r.index = 1;
    r.adv_pred = 1;
    r.success = false;
    r.first_success_iteration.reset();
    rows.push_back(r);

    SUBCASE("empty list writes a header-only file") {
        const auto path = temp_file("advkit_empty.csv");
        write_results_csv({}, path.string());
        CHECK(slurp(path) == std::string(kResultsCsvHeader) + "\n");
        fs::remove(path);
    }
    SUBCASE("repeated writes are byte identical and round trip") {
        const auto p1 = temp_file("advkit_rows1.csv");
        const auto p2 = temp_file("advkit_rows2.csv");
        write_results_csv(rows, p1.string());
        write_results_csv(rows, p2.string());
        CHECK(slurp(p1) == slurp(p2));
        const std::vector<OutcomeRow> back = read_results_csv(p1.string());
        REQUIRE(back.size() == 2);
        CHECK(back[0].index == 0);
        CHECK(back[0].adv_pred == 2);
        CHECK(back[0].success);
        CHECK(back[0].l2_norm == doctest::Approx(0.123456789).epsilon(1e-9));
        CHECK(back[0].first_success_iteration == 17);
        CHECK_FALSE(back[1].first_success_iteration.has_value());
        CHECK(back[1].loss == "Jitter");
        fs::remove(p1);
        fs::remove(p2);
    }
    SUBCASE("nine significant digits in float fields") {
        const auto path = temp_file("advkit_digits.csv");
        write_results_csv(rows, path.string());
        CHECK(slurp(path).find("0.123456789") != std::string::npos);
        fs::remove(path);
    }
    SUBCASE("wrong header is rejected") {
        const auto path = temp_file("advkit_badhdr.csv");
        std::ofstream(path) << "nope\n";
        CHECK_THROWS_AS(read_results_csv(path.string()), FormatError);
        fs::remove(path);
    }
}

TEST_CASE("adversarial example sidecar") {
    const auto path = temp_file("advkit_adv.advx");
    std::vector<float> data = {0.1f, 0.2f, 0.3f, 0.4f, 0.5f, 0.6f};
    write_adv_examples(data, 2, 3, path.string());
    std::size_t n = 0, d = 0;
    const std::vector<float> back = read_adv_examples(path.string(), &n, &d);
    CHECK(n == 2);
    CHECK(d == 3);
    CHECK(back == data);
    fs::remove(path);
    CHECK_THROWS_AS(read_adv_examples("/nonexistent.advx", &n, &d), IoError);
}

TEST_CASE("json numbers cap at nine significant digits") {
    CHECK(json_number(0.1234567891234).dump() == "0.123456789");
    CHECK(json_number(1.0).dump() == "1");
    CHECK(json_number(8.0 / 255.0).dump() == "0.031372549");
}

TEST_CASE("seed derivation is stable across runs and purposes") {
    const std::uint64_t a = derive_seed(42, "attack", 0);
    const std::uint64_t b = derive_seed(42, "attack", 1);
    const std::uint64_t c = derive_seed(42, "train", 0);
    CHECK(a == derive_seed(42, "attack", 0));
    CHECK(a != b);
    CHECK(a != c);
    // frozen regression values: changing the derivation breaks every seeded
    // artifact, so pin it
    CHECK(derive_seed(0, "x", 0) == 0x5b8fbfe061ff4b3cULL);
    CHECK(derive_seed(1, "dataset", 3) == 0xc5dff359ea525758ULL);
}

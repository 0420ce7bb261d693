#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "advkit/attack.hpp"
#include "advkit/losses.hpp"

namespace advkit {

struct DatasetSpec {
    enum class Type { Synthetic, Cifar10 };
    Type type = Type::Synthetic;
    // synthetic
    std::size_t classes = 10;
    std::size_t dim = 32;
    std::size_t train_per_class = 200;
    std::size_t test_per_class = 50;
    double spread = 0.1;
    // cifar10
    std::string train_path;
    std::string test_path;
    std::size_t limit = 0;  // 0 = all records
};

struct ModelSpec {
    std::string name;
    std::vector<std::size_t> hidden = {64};
    int epochs = 20;
    int batch_size = 32;
    double learning_rate = 0.5;
    double logit_scale = 1.0;
    std::string base;  // reuse another model's weights (logit-scale wrappers)
    bool adversarial = false;
    double adv_epsilon = 8.0 / 255.0;
    int adv_iterations = 7;
    double adv_step_size = 0.0;  // 0 = epsilon/4
};

struct AttackSpec {
    std::vector<std::string> models;
    std::vector<LossConfig> losses;
    Engine engine = Engine::Apgd;
    double epsilon = 8.0 / 255.0;
    int iterations = 100;
    int restarts = 1;
    double step_size = 0.0;  // vanilla PGD only; 0 = epsilon/4
    std::size_t samples = 0;  // 0 = whole test split
    bool tune_sigma = false;
    bool track_best = true;
};

struct LandscapeSpec {
    std::vector<std::string> losses = {"CE", "Jitter"};
    std::size_t samples = 25;
    std::size_t steps = 41;
    double t_max_scale = 2.0;  // t_max = scale * ||gamma||_2 per sample
};

struct AnalyzeSpec {
    std::vector<std::string> models;  // empty = attack.models
    std::size_t csm_samples = 50;
    std::size_t magnitude_samples = 8;
    std::size_t channels = 0;  // 0 = auto: 3 for cifar10, 1 otherwise
    std::string partition_loss;  // empty = DLR if attacked, else first loss
    LandscapeSpec landscape;
};

struct ReportSpec {
    bool ablation = false;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    int precision = 32;  // 32 or 64
    int threads = 1;
    std::string out_dir = "out";
    DatasetSpec dataset;
    std::vector<ModelSpec> models;
    AttackSpec attack;
    AnalyzeSpec analyze;
    ReportSpec report;
};

// Parses and validates one experiment JSON document. Unknown keys and
// out-of-range values are rejected with the offending field named. Defaults
// (epsilon 8/255, 100 iterations, alpha 10) are filled in.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

// Normalized form: defaults made explicit, stable key order. Parsing the
// output reproduces the config; serializing again is byte-identical.
std::string serialize_config(const ExperimentConfig& cfg);

AttackConfig make_attack_config(const AttackSpec& spec, const LossConfig& loss,
                                std::uint64_t seed);

// Standalone attack document for the C API:
//   {"engine":"PGD","epsilon":0.031,"iterations":100,"restarts":1,"seed":7,
//    "step_size":0.0,"track_best":true,"loss":{"kind":"CE",...}}
AttackConfig parse_attack_config_json(const std::string& text);

} // namespace advkit

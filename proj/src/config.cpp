#include "advkit/config.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace advkit {

namespace {

using json = nlohmann::ordered_json;

// Tracks the JSON path for error messages and rejects unknown keys.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + " must be a JSON object");
    }
    ~Section() = default;

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError("unknown key '" + path_ + "." + it.key() + "'");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const json* get(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string where(const std::string& key) const { return path_ + "." + key; }

    double number(const std::string& key, double fallback) {
        const json* v = get(key);
        if (!v) return fallback;
        if (!v->is_number()) throw ConfigError(where(key) + " must be a number");
        return v->get<double>();
    }

    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        const json* v = get(key);
        if (!v) return fallback;
        if (!v->is_number_integer()) throw ConfigError(where(key) + " must be an integer");
        return v->get<std::int64_t>();
    }

    std::uint64_t uinteger(const std::string& key, std::uint64_t fallback) {
        const json* v = get(key);
        if (!v) return fallback;
        if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
            throw ConfigError(where(key) + " must be a non-negative integer");
        return v->get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool fallback) {
        const json* v = get(key);
        if (!v) return fallback;
        if (!v->is_boolean()) throw ConfigError(where(key) + " must be a boolean");
        return v->get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback) {
        const json* v = get(key);
        if (!v) return fallback;
        if (!v->is_string()) throw ConfigError(where(key) + " must be a string");
        return v->get<std::string>();
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

NormKind parse_norm(const std::string& s, const std::string& where) {
    if (s == "l1") return NormKind::L1;
    if (s == "l2") return NormKind::L2;
    if (s == "linf") return NormKind::LInf;
    throw ConfigError(where + " must be one of l1, l2, linf (got '" + s + "')");
}

LossKind parse_loss_kind(const std::string& s, const std::string& where) {
    if (s == "CE") return LossKind::CrossEntropy;
    if (s == "CW") return LossKind::CarliniWagner;
    if (s == "DLR") return LossKind::Dlr;
    if (s == "L2Scaled") return LossKind::L2Scaled;
    if (s == "Noise") return LossKind::Noise;
    if (s == "Jitter") return LossKind::Jitter;
    throw ConfigError(where + " must be one of CE, CW, DLR, L2Scaled, Noise, Jitter (got '" + s +
                      "')");
}

// model names and loss labels land in CSV fields and file names
void validate_identifier(const std::string& s, const std::string& where) {
    if (s.empty()) throw ConfigError("missing required field " + where);
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.' &&
            c != '+')
            throw ConfigError(where + " may only contain letters, digits and _-.+ (got '" + s +
                              "')");
}

void validate_loss(const LossConfig& l, const std::string& where) {
    if (!(l.scale_alpha > 0.0) || l.scale_alpha >= 83.0)
        throw ConfigError(where + ".scale_alpha must lie in (0, 83); values at or above ~83 "
                          "overflow 32-bit softmax inputs");
    if (l.sigma < 0.0) throw ConfigError(where + ".sigma must be >= 0");
    if (!(l.norm_floor > 0.0)) throw ConfigError(where + ".norm_floor must be > 0");
}

LossConfig parse_loss(const json& j, const std::string& path) {
    Section s(j, path);
    LossConfig l;
    const json* kind = s.get("kind");
    if (!kind) throw ConfigError("missing required field " + path + ".kind");
    if (!kind->is_string()) throw ConfigError(path + ".kind must be a string");
    l.kind = parse_loss_kind(kind->get<std::string>(), path + ".kind");
    l.scale_alpha = s.number("scale_alpha", l.scale_alpha);
    l.sigma = s.number("sigma", l.sigma);
    if (s.has("minimized_norm"))
        l.minimized_norm = parse_norm(s.text("minimized_norm", "l2"), s.where("minimized_norm"));
    l.norm_floor = s.number("norm_floor", l.norm_floor);
    l.ce_on_scaled = s.boolean("scaled", false);
    if (l.ce_on_scaled && l.kind != LossKind::CrossEntropy)
        throw ConfigError(path + ".scaled only applies to the CE loss");
    l.label = s.text("label", "");
    if (!l.label.empty()) validate_identifier(l.label, path + ".label");
    s.finish();
    validate_loss(l, path);
    return l;
}

DatasetSpec parse_dataset(const json& j) {
    Section s(j, "dataset");
    DatasetSpec d;
    const std::string type = s.text("type", "synthetic");
    if (type == "synthetic") {
        d.type = DatasetSpec::Type::Synthetic;
        d.classes = s.uinteger("classes", d.classes);
        d.dim = s.uinteger("dim", d.dim);
        d.train_per_class = s.uinteger("train_per_class", d.train_per_class);
        d.test_per_class = s.uinteger("test_per_class", d.test_per_class);
        d.spread = s.number("spread", d.spread);
        if (d.classes < 2) throw ConfigError("dataset.classes must be >= 2");
        if (d.dim < 2) throw ConfigError("dataset.dim must be >= 2");
        if (d.spread < 0.0) throw ConfigError("dataset.spread must be >= 0");
        if (d.train_per_class == 0) throw ConfigError("dataset.train_per_class must be >= 1");
        if (d.test_per_class == 0) throw ConfigError("dataset.test_per_class must be >= 1");
    } else if (type == "cifar10") {
        d.type = DatasetSpec::Type::Cifar10;
        d.classes = 10;
        d.dim = 3072;
        d.train_path = s.text("train_path", "");
        d.test_path = s.text("test_path", "");
        d.limit = s.uinteger("limit", 0);
        if (d.test_path.empty())
            throw ConfigError("missing required field dataset.test_path for cifar10");
    } else {
        throw ConfigError("dataset.type must be 'synthetic' or 'cifar10' (got '" + type + "')");
    }
    s.finish();
    return d;
}

ModelSpec parse_model(const json& j, const std::string& path) {
    Section s(j, path);
    ModelSpec m;
    m.name = s.text("name", "");
    validate_identifier(m.name, path + ".name");
    if (const json* hidden = s.get("hidden")) {
        if (!hidden->is_array()) throw ConfigError(path + ".hidden must be an array of integers");
        m.hidden.clear();
        for (const auto& h : *hidden) {
            if (!h.is_number_integer() || h.get<std::int64_t>() <= 0)
                throw ConfigError(path + ".hidden entries must be positive integers");
            m.hidden.push_back(h.get<std::size_t>());
        }
    }
    m.epochs = static_cast<int>(s.integer("epochs", m.epochs));
    m.batch_size = static_cast<int>(s.integer("batch_size", m.batch_size));
    m.learning_rate = s.number("learning_rate", m.learning_rate);
    m.logit_scale = s.number("logit_scale", m.logit_scale);
    m.base = s.text("base", "");
    if (const json* adv = s.get("adversarial")) {
        Section a(*adv, path + ".adversarial");
        m.adversarial = true;
        m.adv_epsilon = a.number("epsilon", m.adv_epsilon);
        m.adv_iterations = static_cast<int>(a.integer("iterations", m.adv_iterations));
        m.adv_step_size = a.number("step_size", 0.0);
        a.finish();
        if (!(m.adv_epsilon > 0.0)) throw ConfigError(path + ".adversarial.epsilon must be > 0");
        if (m.adv_iterations < 1)
            throw ConfigError(path + ".adversarial.iterations must be >= 1");
    }
    s.finish();
    if (m.epochs < 0) throw ConfigError(path + ".epochs must be >= 0");
    if (m.batch_size < 1) throw ConfigError(path + ".batch_size must be >= 1");
    if (!(m.learning_rate > 0.0)) throw ConfigError(path + ".learning_rate must be > 0");
    if (!(m.logit_scale > 0.0)) throw ConfigError(path + ".logit_scale must be > 0");
    return m;
}

AttackSpec parse_attack(const json& j) {
    Section s(j, "attack");
    AttackSpec a;
    if (const json* models = s.get("models")) {
        if (!models->is_array()) throw ConfigError("attack.models must be an array of strings");
        for (const auto& m : *models) {
            if (!m.is_string()) throw ConfigError("attack.models entries must be strings");
            a.models.push_back(m.get<std::string>());
        }
    }
    if (const json* losses = s.get("losses")) {
        if (!losses->is_array()) throw ConfigError("attack.losses must be an array");
        for (std::size_t i = 0; i < losses->size(); ++i)
            a.losses.push_back(parse_loss((*losses)[i], "attack.losses[" + std::to_string(i) + "]"));
    }
    const std::string engine = s.text("engine", "APGD");
    if (engine == "PGD")
        a.engine = Engine::Pgd;
    else if (engine == "APGD")
        a.engine = Engine::Apgd;
    else
        throw ConfigError("attack.engine must be 'PGD' or 'APGD' (got '" + engine + "')");
    a.epsilon = s.number("epsilon", a.epsilon);
    a.iterations = static_cast<int>(s.integer("iterations", a.iterations));
    a.restarts = static_cast<int>(s.integer("restarts", a.restarts));
    a.step_size = s.number("step_size", 0.0);
    a.samples = s.uinteger("samples", 0);
    a.tune_sigma = s.boolean("tune_sigma", false);
    a.track_best = s.boolean("track_best", true);
    s.finish();
    if (!(a.epsilon > 0.0)) throw ConfigError("attack.epsilon must be > 0");
    if (a.iterations < 1) throw ConfigError("attack.iterations must be >= 1");
    if (a.engine == Engine::Apgd && a.iterations < 5)
        throw ConfigError("attack.iterations must be >= 5 for APGD");
    if (a.restarts < 1) throw ConfigError("attack.restarts must be >= 1");
    if (a.step_size != 0.0 && (!(a.step_size > 0.0) || a.step_size > a.epsilon))
        throw ConfigError("attack.step_size must satisfy 0 < step_size <= epsilon");
    if (a.losses.empty()) a.losses.push_back(LossConfig{});
    return a;
}

AnalyzeSpec parse_analyze(const json& j) {
    Section s(j, "analyze");
    AnalyzeSpec an;
    if (const json* models = s.get("models")) {
        if (!models->is_array()) throw ConfigError("analyze.models must be an array of strings");
        for (const auto& m : *models) an.models.push_back(m.get<std::string>());
    }
    an.csm_samples = s.uinteger("csm_samples", an.csm_samples);
    an.magnitude_samples = s.uinteger("magnitude_samples", an.magnitude_samples);
    an.channels = s.uinteger("channels", 0);
    an.partition_loss = s.text("partition_loss", "");
    if (const json* land = s.get("landscape")) {
        Section l(*land, "analyze.landscape");
        if (const json* losses = l.get("losses")) {
            an.landscape.losses.clear();
            for (const auto& e : *losses) an.landscape.losses.push_back(e.get<std::string>());
        }
        an.landscape.samples = l.uinteger("samples", an.landscape.samples);
        an.landscape.steps = l.uinteger("steps", an.landscape.steps);
        an.landscape.t_max_scale = l.number("t_max_scale", an.landscape.t_max_scale);
        l.finish();
        if (an.landscape.steps < 2) throw ConfigError("analyze.landscape.steps must be >= 2");
        if (!(an.landscape.t_max_scale > 0.0))
            throw ConfigError("analyze.landscape.t_max_scale must be > 0");
    }
    s.finish();
    return an;
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(origin + ": " + e.what());
    }
    Section root(doc, "config");
    ExperimentConfig cfg;
    cfg.seed = root.uinteger("seed", 0);
    cfg.precision = static_cast<int>(root.integer("precision", 32));
    if (cfg.precision != 32 && cfg.precision != 64)
        throw ConfigError("config.precision must be 32 or 64");
    cfg.threads = static_cast<int>(root.integer("threads", 1));
    if (cfg.threads < 1) throw ConfigError("config.threads must be >= 1");
    cfg.out_dir = root.text("out", cfg.out_dir);

    if (const json* ds = root.get("dataset")) cfg.dataset = parse_dataset(*ds);
    if (const json* models = root.get("models")) {
        if (!models->is_array()) throw ConfigError("config.models must be an array");
        for (std::size_t i = 0; i < models->size(); ++i)
            cfg.models.push_back(parse_model((*models)[i], "models[" + std::to_string(i) + "]"));
    }
    if (const json* attack = root.get("attack")) cfg.attack = parse_attack(*attack);
    if (const json* analyze = root.get("analyze")) cfg.analyze = parse_analyze(*analyze);
    if (const json* report = root.get("report")) {
        Section r(*report, "report");
        cfg.report.ablation = r.boolean("ablation", false);
        r.finish();
    }
    root.finish();

    // cross checks
    std::set<std::string> names;
    for (const ModelSpec& m : cfg.models) {
        if (!names.insert(m.name).second)
            throw ConfigError("duplicate model name '" + m.name + "'");
    }
    for (const ModelSpec& m : cfg.models)
        if (!m.base.empty() && !names.count(m.base))
            throw ConfigError("model '" + m.name + "' references unknown base '" + m.base + "'");
    if (cfg.attack.models.empty())
        for (const ModelSpec& m : cfg.models) cfg.attack.models.push_back(m.name);
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

namespace {

json loss_to_json(const LossConfig& l) {
    json j;
    j["kind"] = loss_kind_name(l.kind);
    j["scale_alpha"] = l.scale_alpha;
    j["sigma"] = l.sigma;
    j["minimized_norm"] = norm_kind_name(l.minimized_norm);
    j["norm_floor"] = l.norm_floor;
    if (l.ce_on_scaled) j["scaled"] = true;
    if (!l.label.empty()) j["label"] = l.label;
    return j;
}

} // namespace

std::string serialize_config(const ExperimentConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["precision"] = cfg.precision;
    j["threads"] = cfg.threads;
    j["out"] = cfg.out_dir;

    json ds;
    if (cfg.dataset.type == DatasetSpec::Type::Synthetic) {
        ds["type"] = "synthetic";
        ds["classes"] = cfg.dataset.classes;
        ds["dim"] = cfg.dataset.dim;
        ds["train_per_class"] = cfg.dataset.train_per_class;
        ds["test_per_class"] = cfg.dataset.test_per_class;
        ds["spread"] = cfg.dataset.spread;
    } else {
        ds["type"] = "cifar10";
        if (!cfg.dataset.train_path.empty()) ds["train_path"] = cfg.dataset.train_path;
        ds["test_path"] = cfg.dataset.test_path;
        ds["limit"] = cfg.dataset.limit;
    }
    j["dataset"] = ds;

    j["models"] = json::array();
    for (const ModelSpec& m : cfg.models) {
        json jm;
        jm["name"] = m.name;
        jm["hidden"] = m.hidden;
        jm["epochs"] = m.epochs;
        jm["batch_size"] = m.batch_size;
        jm["learning_rate"] = m.learning_rate;
        jm["logit_scale"] = m.logit_scale;
        if (!m.base.empty()) jm["base"] = m.base;
        if (m.adversarial) {
            json ja;
            ja["epsilon"] = m.adv_epsilon;
            ja["iterations"] = m.adv_iterations;
            ja["step_size"] = m.adv_step_size;
            jm["adversarial"] = ja;
        }
        j["models"].push_back(jm);
    }

    json ja;
    ja["models"] = cfg.attack.models;
    ja["losses"] = json::array();
    for (const LossConfig& l : cfg.attack.losses) ja["losses"].push_back(loss_to_json(l));
    ja["engine"] = engine_name(cfg.attack.engine);
    ja["epsilon"] = cfg.attack.epsilon;
    ja["iterations"] = cfg.attack.iterations;
    ja["restarts"] = cfg.attack.restarts;
    ja["step_size"] = cfg.attack.step_size;
    ja["samples"] = cfg.attack.samples;
    ja["tune_sigma"] = cfg.attack.tune_sigma;
    ja["track_best"] = cfg.attack.track_best;
    j["attack"] = ja;

    json jan;
    jan["models"] = cfg.analyze.models;
    jan["csm_samples"] = cfg.analyze.csm_samples;
    jan["magnitude_samples"] = cfg.analyze.magnitude_samples;
    jan["channels"] = cfg.analyze.channels;
    if (!cfg.analyze.partition_loss.empty()) jan["partition_loss"] = cfg.analyze.partition_loss;
    json jl;
    jl["losses"] = cfg.analyze.landscape.losses;
    jl["samples"] = cfg.analyze.landscape.samples;
    jl["steps"] = cfg.analyze.landscape.steps;
    jl["t_max_scale"] = cfg.analyze.landscape.t_max_scale;
    jan["landscape"] = jl;
    j["analyze"] = jan;

    json jr;
    jr["ablation"] = cfg.report.ablation;
    j["report"] = jr;

    return j.dump(2) + "\n";
}

AttackConfig make_attack_config(const AttackSpec& spec, const LossConfig& loss,
                                std::uint64_t seed) {
    AttackConfig cfg;
    cfg.loss = loss;
    cfg.epsilon = spec.epsilon;
    cfg.iterations = spec.iterations;
    cfg.restarts = spec.restarts;
    cfg.step_size = spec.step_size;
    cfg.engine = spec.engine;
    cfg.seed = seed;
    cfg.track_best = spec.track_best;
    return cfg;
}

AttackConfig parse_attack_config_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("attack config: ") + e.what());
    }
    Section s(doc, "attack");
    AttackConfig cfg;
    const std::string engine = s.text("engine", "APGD");
    if (engine == "PGD")
        cfg.engine = Engine::Pgd;
    else if (engine == "APGD")
        cfg.engine = Engine::Apgd;
    else
        throw ConfigError("attack.engine must be 'PGD' or 'APGD' (got '" + engine + "')");
    cfg.epsilon = s.number("epsilon", cfg.epsilon);
    cfg.iterations = static_cast<int>(s.integer("iterations", cfg.iterations));
    cfg.restarts = static_cast<int>(s.integer("restarts", cfg.restarts));
    cfg.step_size = s.number("step_size", 0.0);
    cfg.seed = s.uinteger("seed", 0);
    cfg.track_best = s.boolean("track_best", true);
    if (const json* loss = s.get("loss")) cfg.loss = parse_loss(*loss, "attack.loss");
    s.finish();
    if (!(cfg.epsilon > 0.0)) throw ConfigError("attack.epsilon must be > 0");
    if (cfg.iterations < 1) throw ConfigError("attack.iterations must be >= 1");
    if (cfg.engine == Engine::Apgd && cfg.iterations < 5)
        throw ConfigError("attack.iterations must be >= 5 for APGD");
    if (cfg.restarts < 1) throw ConfigError("attack.restarts must be >= 1");
    if (cfg.step_size != 0.0 && (!(cfg.step_size > 0.0) || cfg.step_size > cfg.epsilon))
        throw ConfigError("attack.step_size must satisfy 0 < step_size <= epsilon");
    return cfg;
}

} // namespace advkit

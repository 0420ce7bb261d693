#include "advkit/driver.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "advkit/analysis.hpp"
#include "advkit/attack.hpp"
#include "advkit/config.hpp"
#include "advkit/dataset.hpp"
#include "advkit/model_io.hpp"
#include "advkit/report.hpp"
#include "advkit/train.hpp"
#include "advkit/util.hpp"

namespace advkit {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Context {
    ExperimentConfig cfg;
    fs::path out;
};

fs::path models_dir(const Context& ctx) { return ctx.out / "models"; }
fs::path adv_dir(const Context& ctx) { return ctx.out / "adv"; }

std::string weights_path(const Context& ctx, const std::string& name) {
    return (models_dir(ctx) / (name + ".advw")).string();
}

std::string adv_path(const Context& ctx, const std::string& model, const std::string& loss) {
    return (adv_dir(ctx) / (model + "__" + loss + ".advx")).string();
}

// One synthetic draw covers both splits so they share the class means: the
// round-robin sample order keeps every contiguous block balanced.
Dataset synthetic_slice(const ExperimentConfig& cfg, std::size_t skip, std::size_t take) {
    Dataset full = generate_synthetic(cfg.dataset.classes, cfg.dataset.dim,
                                      cfg.dataset.train_per_class + cfg.dataset.test_per_class,
                                      cfg.dataset.spread, derive_seed(cfg.seed, "dataset"));
    Dataset out;
    out.dim = full.dim;
    out.classes = full.classes;
    out.provenance = full.provenance;
    out.inputs.assign(full.inputs.begin() + skip * full.dim,
                      full.inputs.begin() + (skip + take) * full.dim);
    out.labels.assign(full.labels.begin() + skip, full.labels.begin() + skip + take);
    return out;
}

Dataset build_train_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset.type == DatasetSpec::Type::Synthetic)
        return synthetic_slice(cfg, 0, cfg.dataset.classes * cfg.dataset.train_per_class);
    if (cfg.dataset.train_path.empty())
        throw ConfigError("dataset.train_path is required to train on cifar10");
    return read_cifar10_binary(cfg.dataset.train_path);
}

Dataset truncate(Dataset ds, std::size_t limit) {
    if (limit == 0 || limit >= ds.size()) return ds;
    ds.inputs.resize(limit * ds.dim);
    ds.labels.resize(limit);
    return ds;
}

Dataset build_test_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset.type == DatasetSpec::Type::Synthetic)
        return synthetic_slice(cfg, cfg.dataset.classes * cfg.dataset.train_per_class,
                               cfg.dataset.classes * cfg.dataset.test_per_class);
    return truncate(read_cifar10_binary(cfg.dataset.test_path), cfg.dataset.limit);
}

Classifier load_model_or_fail(const Context& ctx, const std::string& name,
                              const std::string& needed_by) {
    const std::string path = weights_path(ctx, name);
    if (!fs::exists(path))
        throw IoError("model '" + name + "' not found at " + path +
                      ": run the train command first (needed by " + needed_by + ")");
    return load_weights(path);
}

json stats_to_json(const SummaryStats& s) {
    json j;
    j["count"] = s.count;
    j["mean"] = json_number(s.mean);
    j["stddev"] = json_number(s.stddev);
    j["min"] = json_number(s.min);
    j["max"] = json_number(s.max);
    j["q1"] = json_number(s.q1);
    j["median"] = json_number(s.median);
    j["q3"] = json_number(s.q3);
    j["whisker_lo"] = json_number(s.whisker_lo);
    j["whisker_hi"] = json_number(s.whisker_hi);
    return j;
}

json matrix_to_json(const std::vector<long long>& counts, std::size_t c) {
    json rows = json::array();
    for (std::size_t i = 0; i < c; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < c; ++j) row.push_back(counts[i * c + j]);
        rows.push_back(row);
    }
    return rows;
}

json matrix_to_json(const std::vector<double>& values, std::size_t c) {
    json rows = json::array();
    for (std::size_t i = 0; i < c; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < c; ++j) row.push_back(json_number(values[i * c + j]));
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

template <typename S>
void cmd_train(const Context& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    if (cfg.models.empty()) throw ConfigError("config.models is empty; nothing to train");
    fs::create_directories(models_dir(ctx));
    const Dataset train = build_train_dataset(cfg);
    const Dataset test = build_test_dataset(cfg);

    json summary;
    summary["dataset"] = train.provenance;
    summary["train_size"] = train.size();
    summary["test_size"] = test.size();
    summary["models"] = json::array();

    // wrappers (base != "") reuse weights trained in this pass
    for (const ModelSpec& spec : cfg.models) {
        if (!spec.base.empty()) continue;
        std::vector<std::size_t> dims;
        dims.push_back(train.dim);
        for (std::size_t h : spec.hidden) dims.push_back(h);
        dims.push_back(train.classes);

        Classifier init = init_classifier(dims, derive_seed(cfg.seed, "model-init:" + spec.name));
        TrainConfig tc;
        tc.epochs = spec.epochs;
        tc.batch_size = spec.batch_size;
        tc.learning_rate = spec.learning_rate;
        tc.seed = derive_seed(cfg.seed, "train:" + spec.name);
        if (spec.adversarial) {
            AttackConfig inner;
            inner.loss.kind = LossKind::CrossEntropy;
            inner.epsilon = spec.adv_epsilon;
            inner.iterations = spec.adv_iterations;
            inner.step_size = spec.adv_step_size;
            inner.engine = Engine::Pgd;
            tc.adversarial = inner;
        }
        Classifier model = train_classifier<S>(init, train, tc);
        model.logit_scale = static_cast<float>(spec.logit_scale);
        save_weights(model, weights_path(ctx, spec.name));

        const AccuracyReport train_acc = evaluate_accuracy<S>(model, train, std::nullopt, cfg.threads);
        const AccuracyReport test_acc = evaluate_accuracy<S>(model, test, std::nullopt, cfg.threads);
        json jm;
        jm["name"] = spec.name;
        jm["dims"] = dims;
        jm["adversarial"] = spec.adversarial;
        jm["logit_scale"] = json_number(spec.logit_scale);
        jm["clean_train_accuracy"] = json_number(train_acc.clean_accuracy);
        jm["clean_test_accuracy"] = json_number(test_acc.clean_accuracy);
        summary["models"].push_back(jm);
        std::cout << "trained " << spec.name << ": train acc "
                  << format_float9(train_acc.clean_accuracy) << ", test acc "
                  << format_float9(test_acc.clean_accuracy) << "\n";
    }

    for (const ModelSpec& spec : cfg.models) {
        if (spec.base.empty()) continue;
        Classifier base = load_model_or_fail(ctx, spec.base, "model '" + spec.name + "'");
        base.logit_scale = static_cast<float>(spec.logit_scale);
        save_weights(base, weights_path(ctx, spec.name));
        const AccuracyReport test_acc = evaluate_accuracy<S>(base, test, std::nullopt, cfg.threads);
        json jm;
        jm["name"] = spec.name;
        jm["base"] = spec.base;
        jm["logit_scale"] = json_number(spec.logit_scale);
        jm["clean_test_accuracy"] = json_number(test_acc.clean_accuracy);
        summary["models"].push_back(jm);
        std::cout << "wrapped " << spec.base << " -> " << spec.name << " (logit scale "
                  << format_float9(spec.logit_scale) << ")\n";
    }

    write_json_file(summary, (ctx.out / "train_summary.json").string());
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

constexpr double kSigmaGrid[] = {0.0, 0.05, 0.1, 0.15, 0.2};

template <typename S>
double attack_success_rate(const Classifier& model, const Dataset& test, std::size_t n,
                           const AttackConfig& cfg, int threads) {
    std::vector<char> success(n, 0);
    parallel_for(n, threads, [&](std::size_t i) {
        std::span<const float> raw = test.sample(i);
        std::vector<S> x(raw.begin(), raw.end());
        success[i] = run_with_restarts<S>(model, x, test.labels[i], cfg, i).success ? 1 : 0;
    });
    std::size_t hits = 0;
    for (char c : success) hits += c;
    return static_cast<double>(hits) / static_cast<double>(n);
}

template <typename S>
void cmd_attack(const Context& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    const Dataset test = build_test_dataset(cfg);
    const std::size_t n =
        cfg.attack.samples == 0 ? test.size() : std::min(cfg.attack.samples, test.size());
    if (n == 0) throw ConfigError("attack sample budget is empty");
    if (cfg.attack.models.empty())
        throw ConfigError("attack.models is empty and config.models defines none");
    fs::create_directories(adv_dir(ctx));

    std::vector<OutcomeRow> rows;
    json summary;
    summary["engine"] = engine_name(cfg.attack.engine);
    summary["epsilon"] = json_number(cfg.attack.epsilon);
    summary["iterations"] = cfg.attack.iterations;
    summary["restarts"] = cfg.attack.restarts;
    summary["samples"] = n;
    summary["seed"] = cfg.seed;
    summary["track_best"] = cfg.attack.track_best;
    summary["models"] = json::array();
    json tuning_runs = json::array();

    for (const std::string& model_name : cfg.attack.models) {
        const Classifier model = load_model_or_fail(ctx, model_name, "the attack command");
        double clean_correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::span<const float> raw = test.sample(i);
            std::vector<S> x(raw.begin(), raw.end());
            if (predict<S>(model, x).label == test.labels[i]) clean_correct += 1;
        }
        json jmodel;
        jmodel["model"] = model_name;
        jmodel["clean_accuracy"] = json_number(clean_correct / static_cast<double>(n));
        jmodel["losses"] = json::array();

        for (const LossConfig& loss : cfg.attack.losses) {
            LossConfig used = loss;
            const std::string loss_name = loss.display_name();
            json jtune;
            if (cfg.attack.tune_sigma &&
                (loss.kind == LossKind::Jitter || loss.kind == LossKind::Noise)) {
                const std::size_t tune_n = std::min<std::size_t>(100, n);
                double best_rate = -1.0;
                double best_sigma = 0.0;
                json rates = json::array();
                std::size_t grid_index = 0;
                for (double sigma : kSigmaGrid) {
                    LossConfig probe = loss;
                    probe.sigma = sigma;
                    AttackConfig acfg = make_attack_config(
                        cfg.attack, probe,
                        derive_seed(cfg.seed, "tune:" + model_name + ":" + loss_name, grid_index));
                    const double rate =
                        attack_success_rate<S>(model, test, tune_n, acfg, cfg.threads);
                    rates.push_back(json_number(rate));
                    if (rate > best_rate) {  // ties resolve to the smaller sigma
                        best_rate = rate;
                        best_sigma = sigma;
                    }
                    ++grid_index;
                }
                used.sigma = best_sigma;
                jtune["model"] = model_name;
                jtune["loss"] = loss_name;
                jtune["grid"] = json::array();
                for (double sigma : kSigmaGrid) jtune["grid"].push_back(json_number(sigma));
                jtune["success_rates"] = rates;
                jtune["chosen_sigma"] = json_number(best_sigma);
                const double tuning_evals = static_cast<double>(std::size(kSigmaGrid)) *
                                            static_cast<double>(tune_n) * cfg.attack.iterations *
                                            cfg.attack.restarts;
                const double main_evals = static_cast<double>(n) * cfg.attack.iterations *
                                          cfg.attack.restarts;
                jtune["tuning_model_evaluations"] = json_number(tuning_evals);
                jtune["main_model_evaluations"] = json_number(main_evals);
                // evaluation counts, not wall time: summaries must be
                // byte-identical across reruns
                jtune["overhead_ratio"] = json_number(tuning_evals / main_evals);
                tuning_runs.push_back(jtune);
            }

            AttackConfig acfg = make_attack_config(
                cfg.attack, used, derive_seed(cfg.seed, "attack:" + model_name + ":" + loss_name));
            std::vector<AttackOutcome<S>> outcomes(n);
            parallel_for(n, cfg.threads, [&](std::size_t i) {
                std::span<const float> raw = test.sample(i);
                std::vector<S> x(raw.begin(), raw.end());
                outcomes[i] = run_with_restarts<S>(model, x, test.labels[i], acfg, i);
            });

            std::vector<float> adv(n * test.dim);
            std::size_t successes = 0;
            double l2_sum = 0;
            std::size_t degenerate = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const AttackOutcome<S>& o = outcomes[i];
                OutcomeRow r;
                r.index = i;
                r.true_label = test.labels[i];
                r.clean_pred = o.clean_pred;
                r.adv_pred = o.adv_pred;
                r.success = o.success;
                r.l2_norm = o.l2_norm;
                r.linf_norm = o.linf_norm;
                r.first_success_iteration = o.first_success_iteration;
                r.loss = loss_name;
                r.model = model_name;
                r.seed = cfg.seed;
                rows.push_back(std::move(r));
                for (std::size_t j = 0; j < test.dim; ++j)
                    adv[i * test.dim + j] = static_cast<float>(o.x_adv[j]);
                if (o.success) {
                    ++successes;
                    l2_sum += o.l2_norm;
                }
                if (o.degenerate_scale) ++degenerate;
            }
            write_adv_examples(adv, n, test.dim, adv_path(ctx, model_name, loss_name));

            json jloss;
            jloss["loss"] = loss_name;
            jloss["sigma"] = json_number(used.sigma);
            jloss["success_rate"] = json_number(static_cast<double>(successes) /
                                                static_cast<double>(n));
            jloss["robust_accuracy"] =
                json_number(1.0 - static_cast<double>(successes) / static_cast<double>(n));
            jloss["mean_l2_successful"] =
                json_number(successes ? l2_sum / static_cast<double>(successes) : 0.0);
            jloss["degenerate_scale_samples"] = degenerate;
            jmodel["losses"].push_back(jloss);
            std::cout << model_name << " x " << loss_name << ": robust acc "
                      << format_float9(1.0 - static_cast<double>(successes) /
                                                 static_cast<double>(n))
                      << "\n";
        }

        // flag best (lowest robust accuracy) and second-best; diff = best - second
        std::vector<std::pair<double, std::size_t>> ranked;
        for (std::size_t i = 0; i < jmodel["losses"].size(); ++i)
            ranked.emplace_back(jmodel["losses"][i]["robust_accuracy"].get<double>(), i);
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        if (!ranked.empty()) {
            jmodel["losses"][ranked[0].second]["best"] = true;
            jmodel["best_loss"] = jmodel["losses"][ranked[0].second]["loss"];
            if (ranked.size() > 1) {
                jmodel["losses"][ranked[1].second]["second"] = true;
                jmodel["diff_best_second"] = json_number(ranked[0].first - ranked[1].first);
            }
        }
        summary["models"].push_back(jmodel);
    }

    if (!tuning_runs.empty()) summary["sigma_tuning"] = tuning_runs;
    write_results_csv(rows, (ctx.out / "results.csv").string());
    write_json_file(summary, (ctx.out / "attack_summary.json").string());
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

template <typename S>
void cmd_analyze(const Context& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    const std::string results_path = (ctx.out / "results.csv").string();
    if (!fs::exists(results_path))
        throw IoError("results.csv not found in " + ctx.out.string() +
                      ": run the attack command first");
    const std::vector<OutcomeRow> all_rows = read_results_csv(results_path);
    const Dataset test = build_test_dataset(cfg);

    std::vector<std::string> model_names =
        cfg.analyze.models.empty() ? cfg.attack.models : cfg.analyze.models;
    std::map<std::string, Classifier> models;
    for (const std::string& name : model_names)
        models.emplace(name, load_model_or_fail(ctx, name, "the analyze command"));

    // group rows by model then loss, preserving sample order
    std::map<std::string, std::map<std::string, std::vector<OutcomeRow>>> grouped;
    std::vector<std::string> loss_names;
    for (const OutcomeRow& r : all_rows) {
        grouped[r.model][r.loss].push_back(r);
        if (std::find(loss_names.begin(), loss_names.end(), r.loss) == loss_names.end())
            loss_names.push_back(r.loss);
    }
    for (const std::string& name : model_names)
        if (!grouped.count(name))
            throw ConfigError("no attack rows for model '" + name +
                              "': run the attack command first");

    const std::size_t classes = test.classes;
    json out;
    out["classes"] = classes;
    out["models"] = model_names;
    out["losses"] = loss_names;

    // confusion matrices per model x loss plus cross-model averages per loss
    json jconf;
    for (const std::string& name : model_names) {
        json per_model;
        for (const auto& [loss, rows] : grouped[name]) {
            json e;
            e["all"] = matrix_to_json(
                confusion(rows, classes, ConfusionVariant::All).counts, classes);
            e["misclassified_only"] = matrix_to_json(
                confusion(rows, classes, ConfusionVariant::MisclassifiedOnly).counts, classes);
            e["binarized"] = matrix_to_json(
                confusion(rows, classes, ConfusionVariant::Binarized).counts, classes);
            per_model[loss] = e;
        }
        jconf[name] = per_model;
    }
    out["confusion"] = jconf;

    json javg;
    for (const std::string& loss : loss_names) {
        std::vector<ConfusionMatrix> alls, mis;
        for (const std::string& name : model_names) {
            auto it = grouped[name].find(loss);
            if (it == grouped[name].end()) continue;
            alls.push_back(confusion(it->second, classes, ConfusionVariant::All));
            mis.push_back(confusion(it->second, classes, ConfusionVariant::MisclassifiedOnly));
        }
        if (alls.empty()) continue;
        json e;
        e["all"] = matrix_to_json(average_confusions(alls), classes);
        e["misclassified_only"] = matrix_to_json(average_confusions(mis), classes);
        javg[loss] = e;
    }
    out["confusion_averaged"] = javg;

    // robust / non-robust partition for the designated loss
    std::string partition_loss = cfg.analyze.partition_loss;
    if (partition_loss.empty()) {
        partition_loss = loss_names.front();
        for (const std::string& l : loss_names)
            if (l == "DLR") partition_loss = l;
    }
    std::vector<std::span<const OutcomeRow>> per_model_rows;
    for (const std::string& name : model_names) {
        auto it = grouped[name].find(partition_loss);
        if (it == grouped[name].end())
            throw ConfigError("partition loss '" + partition_loss + "' missing for model '" +
                              name + "'");
        per_model_rows.emplace_back(it->second);
    }
    const RobustnessPartition part = partition_robustness(per_model_rows);
    std::vector<int> labels;
    for (const OutcomeRow& r : per_model_rows.front()) labels.push_back(r.true_label);
    const ClassDistribution dist = class_distribution(part, labels, classes);
    {
        json jp;
        jp["loss"] = partition_loss;
        jp["models"] = part.models;
        jp["histogram"] = part.histogram;
        jp["robust"] = part.robust_count;
        jp["non_robust"] = part.nonrobust_count;
        jp["intermediate"] =
            part.per_sample_count.size() - part.robust_count - part.nonrobust_count;
        jp["class_distribution_robust"] = dist.robust;
        jp["class_distribution_non_robust"] = dist.nonrobust;
        out["partition"] = jp;
    }

    // logit / confidence statistics on clean inputs
    const std::size_t n_attacked = per_model_rows.front().size();
    json jlogit;
    for (const std::string& name : model_names) {
        const LogitStats stats = logit_stats<S>(models.at(name), test, n_attacked);
        json e;
        e["logits"] = stats_to_json(stats.logits);
        e["confidence"] = stats_to_json(stats.confidence);
        jlogit[name] = e;
    }
    out["logit_stats"] = jlogit;

    // CSM means on clean inputs, grouped by the partition
    json jcsm;
    const std::size_t csm_n = std::min(cfg.analyze.csm_samples, n_attacked);
    for (const std::string& name : model_names) {
        std::vector<double> means(csm_n);
        std::vector<char> zero_flags(csm_n, 0);
        parallel_for(csm_n, cfg.threads, [&](std::size_t i) {
            std::span<const float> raw = test.sample(i);
            std::vector<S> x(raw.begin(), raw.end());
            const CsmEntry entry = csm<S>(models.at(name), x);
            means[i] = entry.mean_off_diagonal;
            zero_flags[i] = entry.zero_gradient ? 1 : 0;
        });
        std::vector<double> robust_means, nonrobust_means;
        for (std::size_t i = 0; i < csm_n; ++i) {
            if (part.is_robust(i)) robust_means.push_back(means[i]);
            if (part.is_nonrobust(i)) nonrobust_means.push_back(means[i]);
        }
        json e;
        e["mean_per_sample"] = json::array();
        for (double v : means) e["mean_per_sample"].push_back(json_number(v));
        e["robust"] = stats_to_json(summarize(std::move(robust_means)));
        e["non_robust"] = stats_to_json(summarize(std::move(nonrobust_means)));
        std::size_t zeros = 0;
        for (char f : zero_flags) zeros += f;
        e["zero_gradient_samples"] = zeros;
        jcsm[name] = e;
    }
    out["csm"] = jcsm;

    // CW landscape along stored adversarial directions
    json jland;
    for (const std::string& name : model_names) {
        json per_loss;
        for (const std::string& loss : cfg.analyze.landscape.losses) {
            auto it = grouped[name].find(loss);
            const std::string file = adv_path(ctx, name, loss);
            if (it == grouped[name].end() || !fs::exists(file)) continue;
            std::size_t an = 0, ad = 0;
            const std::vector<float> adv = read_adv_examples(file, &an, &ad);
            if (ad != test.dim || an < it->second.size())
                throw FormatError(file + ": stale adversarial examples; rerun the attack command");

            const std::size_t steps = cfg.analyze.landscape.steps;
            std::vector<double> mean_ts(steps, 0.0), mean_values(steps, 0.0);
            std::vector<double> crossings;
            json curves = json::array();
            std::size_t used = 0;
            for (const OutcomeRow& r : it->second) {
                if (used >= cfg.analyze.landscape.samples) break;
                if (!r.success || r.l2_norm <= 0.0) continue;
                const std::size_t i = r.index;
                std::span<const float> raw = test.sample(i);
                std::vector<S> x(raw.begin(), raw.end());
                std::vector<S> gamma(test.dim);
                for (std::size_t j = 0; j < test.dim; ++j)
                    gamma[j] = static_cast<S>(adv[i * test.dim + j]) - x[j];
                const double t_max = cfg.analyze.landscape.t_max_scale * r.l2_norm;
                const LandscapeCurve curve =
                    landscape<S>(models.at(name), x, gamma, r.true_label, t_max, steps);
                for (std::size_t s = 0; s < steps; ++s) {
                    mean_ts[s] += curve.ts[s];
                    mean_values[s] += curve.values[s];
                }
                if (curve.first_positive_t) crossings.push_back(*curve.first_positive_t);
                json jc;
                jc["index"] = i;
                jc["ts"] = json::array();
                jc["values"] = json::array();
                for (double t : curve.ts) jc["ts"].push_back(json_number(t));
                for (double v : curve.values) jc["values"].push_back(json_number(v));
                curves.push_back(jc);
                ++used;
            }
            if (used == 0) continue;
            json e;
            e["samples"] = used;
            e["mean_ts"] = json::array();
            e["mean_values"] = json::array();
            std::optional<double> mean_crossing;
            for (std::size_t s = 0; s < steps; ++s) {
                const double mt = mean_ts[s] / static_cast<double>(used);
                const double mv = mean_values[s] / static_cast<double>(used);
                e["mean_ts"].push_back(json_number(mt));
                e["mean_values"].push_back(json_number(mv));
                if (mv > 0.0 && !mean_crossing) mean_crossing = mt;
            }
            e["mean_curve_crossing_t"] =
                mean_crossing ? json_number(*mean_crossing) : json(nullptr);
            e["mean_sample_crossing_t"] = crossings.empty()
                                              ? json(nullptr)
                                              : json_number(summarize(crossings).mean);
            e["curves"] = curves;
            per_loss[loss] = e;
        }
        jland[name] = per_loss;
    }
    out["landscape"] = jland;

    // per-loss norm statistics of successful attacks
    json jnorm;
    for (const std::string& name : model_names) {
        std::vector<OutcomeRow> rows;
        for (const auto& [loss, lr] : grouped[name]) rows.insert(rows.end(), lr.begin(), lr.end());
        json e;
        for (const auto& [loss, stats] : norm_stats(rows)) e[loss] = stats_to_json(stats);
        jnorm[name] = e;
    }
    out["norm_stats"] = jnorm;

    // per-pixel perturbation magnitude export
    const std::size_t channels =
        cfg.analyze.channels != 0 ? cfg.analyze.channels
                                  : (cfg.dataset.type == DatasetSpec::Type::Cifar10 ? 3 : 1);
    for (const std::string& name : model_names) {
        for (const auto& [loss, rows] : grouped[name]) {
            const std::string file = adv_path(ctx, name, loss);
            if (!fs::exists(file)) continue;
            std::size_t an = 0, ad = 0;
            const std::vector<float> adv = read_adv_examples(file, &an, &ad);
            std::ofstream mg((ctx.out / ("magnitude_" + name + "__" + loss + ".csv")).string(),
                             std::ios::binary);
            mg << "index";
            for (std::size_t p = 0; p < test.dim / channels; ++p) mg << ",p" << p;
            mg << "\n";
            std::size_t used = 0;
            for (const OutcomeRow& r : rows) {
                if (used >= cfg.analyze.magnitude_samples) break;
                if (!r.success) continue;
                const std::size_t i = r.index;
                std::span<const float> x = test.sample(i);
                std::span<const float> xa(adv.data() + i * test.dim, test.dim);
                const std::vector<double> mags = perturbation_magnitude<float>(xa, x, channels);
                mg << i;
                for (double v : mags) mg << ',' << format_float9(v);
                mg << "\n";
                ++used;
            }
        }
    }

    write_json_file(out, (ctx.out / "analysis.json").string());
    std::cout << "analysis written to " << (ctx.out / "analysis.json").string() << "\n";
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

void cmd_report(const Context& ctx) {
    const std::string summary_path = (ctx.out / "attack_summary.json").string();
    if (!fs::exists(summary_path))
        throw IoError("attack_summary.json not found in " + ctx.out.string() +
                      ": run the attack command first");
    const json summary = read_json_file(summary_path);

    // Table-2 style accuracy summary: one row per model, one column per loss,
    // best flagged, diff between best and second best.
    std::vector<std::string> loss_order;
    for (const auto& jm : summary["models"])
        for (const auto& jl : jm["losses"]) {
            const std::string l = jl["loss"].get<std::string>();
            if (std::find(loss_order.begin(), loss_order.end(), l) == loss_order.end())
                loss_order.push_back(l);
        }
    {
        std::ofstream out((ctx.out / "summary_table.csv").string(), std::ios::binary);
        out << "model";
        for (const std::string& l : loss_order) out << ',' << l;
        out << ",best,second,diff\n";
        for (const auto& jm : summary["models"]) {
            out << jm["model"].get<std::string>();
            std::string best, second;
            for (const std::string& l : loss_order) {
                bool found = false;
                for (const auto& jl : jm["losses"]) {
                    if (jl["loss"].get<std::string>() != l) continue;
                    out << ',' << format_float9(jl["robust_accuracy"].get<double>());
                    if (jl.value("best", false)) best = l;
                    if (jl.value("second", false)) second = l;
                    found = true;
                }
                if (!found) out << ',';
            }
            out << ',' << best << ',' << second << ',';
            if (jm.contains("diff_best_second"))
                out << format_float9(jm["diff_best_second"].get<double>());
            out << "\n";
        }
    }

    // Table-1 style ablation: configured loss order, accuracy plus the
    // improvement over the previous row.
    if (ctx.cfg.report.ablation) {
        std::ofstream out((ctx.out / "ablation.csv").string(), std::ios::binary);
        out << "model,loss,robust_accuracy,improvement\n";
        for (const auto& jm : summary["models"]) {
            std::optional<double> prev;
            for (const auto& jl : jm["losses"]) {
                const double acc = jl["robust_accuracy"].get<double>();
                out << jm["model"].get<std::string>() << ',' << jl["loss"].get<std::string>()
                    << ',' << format_float9(acc) << ',';
                if (prev) out << format_float9(*prev - acc);
                out << "\n";
                prev = acc;
            }
        }
    }

    // norm summary and binarized matrices when an analysis pass ran
    const std::string analysis_path = (ctx.out / "analysis.json").string();
    if (fs::exists(analysis_path)) {
        const json analysis = read_json_file(analysis_path);
        {
            std::ofstream out((ctx.out / "norm_summary.csv").string(), std::ios::binary);
            out << "model,loss,count,mean,q1,median,q3,whisker_lo,whisker_hi\n";
            for (const auto& [model, losses] : analysis["norm_stats"].items()) {
                for (const auto& [loss, st] : losses.items()) {
                    out << model << ',' << loss << ',' << st["count"].get<std::size_t>() << ','
                        << format_float9(st["mean"].get<double>()) << ','
                        << format_float9(st["q1"].get<double>()) << ','
                        << format_float9(st["median"].get<double>()) << ','
                        << format_float9(st["q3"].get<double>()) << ','
                        << format_float9(st["whisker_lo"].get<double>()) << ','
                        << format_float9(st["whisker_hi"].get<double>()) << "\n";
                }
            }
        }
        for (const auto& [model, losses] : analysis["confusion"].items()) {
            for (const auto& [loss, e] : losses.items()) {
                std::ofstream out(
                    (ctx.out / ("binarized_" + model + "__" + loss + ".csv")).string(),
                    std::ios::binary);
                for (const auto& row : e["binarized"]) {
                    for (std::size_t j = 0; j < row.size(); ++j)
                        out << (j ? "," : "") << row[j].get<long long>();
                    out << "\n";
                }
            }
        }
    }
    std::cout << "report tables written to " << ctx.out.string() << "\n";
}

} // namespace

void run_command(const std::string& command, const RunOptions& opts) {
    ExperimentConfig cfg = parse_config(opts.config_path);
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.precision) {
        if (*opts.precision != 32 && *opts.precision != 64)
            throw ConfigError("precision must be 32 or 64");
        cfg.precision = *opts.precision;
    }
    if (opts.threads) {
        if (*opts.threads < 1) throw ConfigError("threads must be >= 1");
        cfg.threads = *opts.threads;
    }

    Context ctx{cfg, fs::path(cfg.out_dir)};
    fs::create_directories(ctx.out);

    const bool wide = cfg.precision == 64;
    if (command == "train") {
        wide ? cmd_train<double>(ctx) : cmd_train<float>(ctx);
    } else if (command == "attack") {
        wide ? cmd_attack<double>(ctx) : cmd_attack<float>(ctx);
    } else if (command == "analyze") {
        wide ? cmd_analyze<double>(ctx) : cmd_analyze<float>(ctx);
    } else if (command == "report") {
        cmd_report(ctx);
    } else {
        throw ConfigError("unknown command '" + command +
                          "' (expected train, attack, analyze or report)");
    }
}

} // namespace advkit

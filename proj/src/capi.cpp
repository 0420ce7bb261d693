#include "advkit.h"

#include <cstring>
#include <string>

#include "advkit/attack.hpp"
#include "advkit/config.hpp"
#include "advkit/dataset.hpp"
#include "advkit/driver.hpp"
#include "advkit/model_io.hpp"

using namespace advkit;

struct advk_model {
    Classifier impl;
};

struct advk_dataset {
    Dataset impl;
};

namespace {

thread_local std::string g_last_error;

advk_status fail(advk_status code, const char* what) {
    g_last_error = what;
    return code;
}

// Maps the C++ error hierarchy onto status codes; catches everything so no
// exception crosses the C boundary.
template <typename Fn>
advk_status guarded(Fn&& fn) {
    try {
        fn();
        return ADVK_OK;
    } catch (const ShapeError& e) {
        return fail(ADVK_ERR_SHAPE, e.what());
    } catch (const NumericError& e) {
        return fail(ADVK_ERR_NUMERIC, e.what());
    } catch (const FormatError& e) {
        return fail(ADVK_ERR_FORMAT, e.what());
    } catch (const ConfigError& e) {
        return fail(ADVK_ERR_CONFIG, e.what());
    } catch (const IoError& e) {
        return fail(ADVK_ERR_IO, e.what());
    } catch (const std::exception& e) {
        return fail(ADVK_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(ADVK_ERR_INTERNAL, "unknown error");
    }
}

} // namespace

extern "C" {

const char* advk_version(void) { return "advkit 1.0.0"; }

const char* advk_last_error(void) { return g_last_error.c_str(); }

advk_status advk_run_command(const char* command, const char* config_path,
                             const advk_run_options* options) {
    if (!command || !config_path)
        return fail(ADVK_ERR_INVALID_ARGUMENT, "command and config_path must not be NULL");
    return guarded([&] {
        RunOptions opts;
        opts.config_path = config_path;
        if (options) {
            if (options->out_dir) opts.out_dir = options->out_dir;
            if (options->has_seed) opts.seed = options->seed;
            if (options->precision) opts.precision = options->precision;
            if (options->threads) opts.threads = options->threads;
        }
        run_command(command, opts);
    });
}

advk_status advk_model_load(const char* path, advk_model** out) {
    if (!path || !out) return fail(ADVK_ERR_INVALID_ARGUMENT, "path and out must not be NULL");
    *out = nullptr;
    return guarded([&] { *out = new advk_model{load_weights(path)}; });
}

advk_status advk_model_save(const advk_model* model, const char* path) {
    if (!model || !path) return fail(ADVK_ERR_INVALID_ARGUMENT, "model and path must not be NULL");
    return guarded([&] { save_weights(model->impl, path); });
}

void advk_model_free(advk_model* model) { delete model; }

size_t advk_model_input_dim(const advk_model* model) {
    return model ? model->impl.input_dim() : 0;
}

size_t advk_model_num_classes(const advk_model* model) {
    return model ? model->impl.num_classes() : 0;
}

float advk_model_logit_scale(const advk_model* model) {
    return model ? model->impl.logit_scale : 0.0f;
}

advk_status advk_model_logits(const advk_model* model, const float* x, size_t dim,
                              float* logits) {
    if (!model || !x || !logits)
        return fail(ADVK_ERR_INVALID_ARGUMENT, "model, x and logits must not be NULL");
    return guarded([&] {
        const std::vector<float> z =
            forward_values<float>(model->impl, std::span<const float>(x, dim));
        std::memcpy(logits, z.data(), z.size() * sizeof(float));
    });
}

advk_status advk_model_predict(const advk_model* model, const float* x, size_t dim, int* label,
                               float* confidence) {
    if (!model || !x) return fail(ADVK_ERR_INVALID_ARGUMENT, "model and x must not be NULL");
    return guarded([&] {
        const Prediction p = predict<float>(model->impl, std::span<const float>(x, dim));
        if (label) *label = p.label;
        if (confidence) *confidence = static_cast<float>(p.confidence);
    });
}

advk_status advk_dataset_synthetic(size_t classes, size_t dim, size_t samples_per_class,
                                   double spread, uint64_t seed, advk_dataset** out) {
    if (!out) return fail(ADVK_ERR_INVALID_ARGUMENT, "out must not be NULL");
    *out = nullptr;
    return guarded([&] {
        *out = new advk_dataset{generate_synthetic(classes, dim, samples_per_class, spread, seed)};
    });
}

advk_status advk_dataset_load_cifar10(const char* path, advk_dataset** out) {
    if (!path || !out) return fail(ADVK_ERR_INVALID_ARGUMENT, "path and out must not be NULL");
    *out = nullptr;
    return guarded([&] { *out = new advk_dataset{read_cifar10_binary(path)}; });
}

void advk_dataset_free(advk_dataset* dataset) { delete dataset; }

size_t advk_dataset_size(const advk_dataset* dataset) {
    return dataset ? dataset->impl.size() : 0;
}

size_t advk_dataset_dim(const advk_dataset* dataset) { return dataset ? dataset->impl.dim : 0; }

int advk_dataset_label(const advk_dataset* dataset, size_t index) {
    if (!dataset || index >= dataset->impl.size()) return -1;
    return dataset->impl.labels[index];
}

advk_status advk_dataset_input(const advk_dataset* dataset, size_t index, float* x) {
    if (!dataset || !x) return fail(ADVK_ERR_INVALID_ARGUMENT, "dataset and x must not be NULL");
    if (index >= dataset->impl.size())
        return fail(ADVK_ERR_INVALID_ARGUMENT, "sample index out of range");
    return guarded([&] {
        const std::span<const float> s = dataset->impl.sample(index);
        std::memcpy(x, s.data(), s.size() * sizeof(float));
    });
}

advk_status advk_attack_run(const advk_model* model, const float* x, size_t dim, int label,
                            const char* config_json, uint64_t sample_index,
                            advk_attack_result* result, float* x_adv) {
    if (!model || !x || !config_json || !result)
        return fail(ADVK_ERR_INVALID_ARGUMENT,
                    "model, x, config_json and result must not be NULL");
    return guarded([&] {
        const AttackConfig cfg = parse_attack_config_json(config_json);
        if (label < 0 || static_cast<size_t>(label) >= model->impl.num_classes())
            throw ConfigError("label out of range");
        const AttackOutcome<float> outcome = run_with_restarts<float>(
            model->impl, std::span<const float>(x, dim), label, cfg, sample_index);
        result->success = outcome.success ? 1 : 0;
        result->clean_pred = outcome.clean_pred;
        result->adv_pred = outcome.adv_pred;
        result->l2_norm = outcome.l2_norm;
        result->linf_norm = outcome.linf_norm;
        result->first_success_iteration =
            outcome.first_success_iteration ? *outcome.first_success_iteration : -1;
        if (x_adv) std::memcpy(x_adv, outcome.x_adv.data(), outcome.x_adv.size() * sizeof(float));
    });
}

} // extern "C"

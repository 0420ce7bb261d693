/* advkit C API: adversarial-attack toolkit behind a shared library.
 *
 * All functions return advk_status; ADVK_OK is 0. On failure,
 * advk_last_error() returns a thread-local description of the most recent
 * error in the calling thread. Handles are opaque and must be released with
 * their matching *_free function.
 */
#ifndef ADVKIT_H
#define ADVKIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ADVK_API __declspec(dllexport)
#else
#define ADVK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum advk_status {
    ADVK_OK = 0,
    ADVK_ERR_INVALID_ARGUMENT = 1,
    ADVK_ERR_IO = 2,
    ADVK_ERR_FORMAT = 3,
    ADVK_ERR_CONFIG = 4,
    ADVK_ERR_NUMERIC = 5,
    ADVK_ERR_SHAPE = 6,
    ADVK_ERR_INTERNAL = 7
} advk_status;

ADVK_API const char* advk_version(void);

/* Thread-local message for the last failing call in this thread. */
ADVK_API const char* advk_last_error(void);

/* ------------------------------------------------------------------ */
/* experiment driver (the CLI maps onto this)                          */
/* ------------------------------------------------------------------ */

typedef struct advk_run_options {
    const char* out_dir;   /* NULL: use the config's "out" */
    int has_seed;          /* nonzero: seed overrides the config */
    uint64_t seed;
    int precision;         /* 0 (config), 32 or 64 */
    int threads;           /* 0 (config) or >= 1 */
} advk_run_options;

/* command: "train", "attack", "analyze" or "report" */
ADVK_API advk_status advk_run_command(const char* command, const char* config_path,
                                      const advk_run_options* options);

/* ------------------------------------------------------------------ */
/* models                                                              */
/* ------------------------------------------------------------------ */

typedef struct advk_model advk_model;

ADVK_API advk_status advk_model_load(const char* path, advk_model** out);
ADVK_API advk_status advk_model_save(const advk_model* model, const char* path);
ADVK_API void advk_model_free(advk_model* model);

ADVK_API size_t advk_model_input_dim(const advk_model* model);
ADVK_API size_t advk_model_num_classes(const advk_model* model);
ADVK_API float advk_model_logit_scale(const advk_model* model);

/* logits must hold num_classes floats; x holds input_dim floats in [0,1]. */
ADVK_API advk_status advk_model_logits(const advk_model* model, const float* x, size_t dim,
                                       float* logits);
/* label receives the argmax (lowest index on ties); confidence the max
 * softmax probability. Either pointer may be NULL. */
ADVK_API advk_status advk_model_predict(const advk_model* model, const float* x, size_t dim,
                                        int* label, float* confidence);

/* ------------------------------------------------------------------ */
/* datasets                                                            */
/* ------------------------------------------------------------------ */

typedef struct advk_dataset advk_dataset;

ADVK_API advk_status advk_dataset_synthetic(size_t classes, size_t dim, size_t samples_per_class,
                                            double spread, uint64_t seed, advk_dataset** out);
ADVK_API advk_status advk_dataset_load_cifar10(const char* path, advk_dataset** out);
ADVK_API void advk_dataset_free(advk_dataset* dataset);

ADVK_API size_t advk_dataset_size(const advk_dataset* dataset);
ADVK_API size_t advk_dataset_dim(const advk_dataset* dataset);
ADVK_API int advk_dataset_label(const advk_dataset* dataset, size_t index);
/* Copies sample `index` (dim floats) into x. */
ADVK_API advk_status advk_dataset_input(const advk_dataset* dataset, size_t index, float* x);

/* ------------------------------------------------------------------ */
/* single-sample attacks                                               */
/* ------------------------------------------------------------------ */

typedef struct advk_attack_result {
    int success;              /* argmax(adv) != label */
    int clean_pred;
    int adv_pred;
    double l2_norm;
    double linf_norm;
    int64_t first_success_iteration; /* -1 when the attack never succeeded */
} advk_attack_result;

/* config_json mirrors the "attack" config section plus a "loss" object, e.g.
 *   {"engine":"PGD","epsilon":0.031,"iterations":100,"restarts":1,
 *    "seed":7,"loss":{"kind":"Jitter","sigma":0.1}}
 * x holds dim floats; x_adv (may be NULL) receives the adversarial input.
 */
ADVK_API advk_status advk_attack_run(const advk_model* model, const float* x, size_t dim,
                                     int label, const char* config_json, uint64_t sample_index,
                                     advk_attack_result* result, float* x_adv);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* ADVKIT_H */

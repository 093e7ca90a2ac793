#ifndef STDRIVE_H
#define STDRIVE_H

/* C interface to the sequence-transfer driving toolkit. All objects are
 * opaque handles created and destroyed here; every call returns a status
 * code and leaves a message for sd_last_error on failure. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sd_status {
    SD_OK = 0,
    SD_ERR_RUNTIME = 1, /* I/O, corrupt files, numeric failure */
    SD_ERR_USAGE = 2    /* invalid arguments or incompatible inputs */
} sd_status;

const char* sd_version(void);

/* message from the most recent failing call on this thread */
const char* sd_last_error(void);

typedef struct sd_dataset sd_dataset;
typedef struct sd_model sd_model;
typedef struct sd_bundle sd_bundle;

/* ---- datasets ---------------------------------------------------------- */

/* kind: "classification" (collision_ratio used), "steering", or
 * "approach" (approach_lo/hi = final-proximity band in (0,1]) */
sd_status sd_dataset_generate(const char* domain, const char* kind, int n,
                              double collision_ratio, double approach_lo, double approach_hi,
                              int height, int width, int seq_len, uint64_t seed,
                              sd_dataset** out);
sd_status sd_dataset_load(const char* path, sd_dataset** out);
sd_status sd_dataset_save(const sd_dataset* ds, const char* path);

typedef struct sd_dataset_stats {
    int n;
    int height, width, seq_len;
    int steering; /* 1 when the labels are steering angles */
    int with_maps; /* sequences carrying salient map planes */
} sd_dataset_stats;
sd_status sd_dataset_info(const sd_dataset* ds, sd_dataset_stats* out);
void sd_dataset_free(sd_dataset* ds);

/* ---- training ---------------------------------------------------------- */

typedef struct sd_train_options {
    int epochs;
    int batch_size;
    double lr;
    uint64_t seed;
    double salient_ratio;          /* expected map coverage, phase 2 only */
    int use_sgd;                   /* 0 = adam */
    double stop_at_train_accuracy; /* 0 = run every epoch */
    int log_every;                 /* progress line every k epochs, 0 = quiet */
} sd_train_options;
void sd_train_options_init(sd_train_options* opt);

/* head: "classification" or "regression"; geometry comes from the dataset.
 * history_tsv, when non-null, receives a malloc'd per-epoch table. */
sd_status sd_train_phase1(const sd_dataset* train_set, const sd_dataset* val_set,
                          const char* head, const sd_train_options* opt, sd_model** out,
                          char** history_tsv);

sd_status sd_model_load(const char* path, sd_model** out);
sd_status sd_model_save(const sd_model* m, const char* path);

typedef struct sd_model_stats {
    int input_channels;
    int height, width, seq_len;
    int regression; /* 1 for a steering head */
    uint64_t config_digest;
} sd_model_stats;
sd_status sd_model_info(const sd_model* m, sd_model_stats* out);
void sd_model_free(sd_model* m);

/* ---- salient maps ------------------------------------------------------ */

/* attaches saliency/gradient/edge planes to floor(ratio * n) sequences,
 * chosen by seed; attached, when non-null, receives the count */
sd_status sd_attach_salient_maps(const sd_model* m, sd_dataset* ds, double ratio,
                                 uint64_t seed, int* attached);

/* ---- transfer ---------------------------------------------------------- */

sd_status sd_harvest_bundle(const sd_model* m, const sd_dataset* source_set, sd_bundle** out);
sd_status sd_bundle_load(const char* path, sd_bundle** out);
sd_status sd_bundle_save(const sd_bundle* b, const char* path);
/* selects the ablation variant trained by sd_train_phase2 */
sd_status sd_bundle_set_flags(sd_bundle* b, int transfer_cnn, int transfer_lstm,
                              int transfer_hidden);
void sd_bundle_free(sd_bundle* b);

/* input_channels: 3, or 6 to train on images plus salient map planes.
 * warning, when non-null, receives a digest-drift note ("" when clean). */
sd_status sd_train_phase2(const sd_bundle* b, const sd_dataset* train_set,
                          const sd_dataset* val_set, int input_channels,
                          const sd_train_options* opt, sd_model** out, char** history_tsv,
                          char* warning, size_t warning_cap);

/* ---- evaluation -------------------------------------------------------- */

typedef struct sd_eval_result {
    double metric; /* accuracy in [0,1], or MAE in degrees */
    int total;
    int correct;
    int confusion[2][2]; /* [true label][predicted], classification only */
} sd_eval_result;
sd_status sd_evaluate(const sd_model* m, const sd_dataset* ds, sd_eval_result* out);

/* ---- similarity -------------------------------------------------------- */

typedef struct sd_similarity {
    double mean_cosine;
    double mean_ssim;
    double fid;
    int pairs, used, skipped;
} sd_similarity;
sd_status sd_dataset_similarity(const sd_model* encoder, const sd_dataset* a,
                                const sd_dataset* b, int n_pairs, uint64_t seed,
                                sd_similarity* out);

/* ---- experiments ------------------------------------------------------- */

/* name: transfer-ordering | convergence | similarity-table | steering | scenario.
 * Options are snake_case key/value strings matching the experiment's knobs
 * (run with an unknown key to get the full list in the error message).
 * tsv_out and table_out receive malloc'd report strings. */
sd_status sd_experiment_run(const char* name, const char* const* keys,
                            const char* const* values, size_t n_options, char** tsv_out,
                            char** table_out);

void sd_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* STDRIVE_H */

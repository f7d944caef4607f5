/* Copyright 2026 The IRN Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the reasoning-network library. Every function returns an
 * irn_status; on failure irn_last_error() holds a one-line diagnostic for the
 * calling thread. Objects are opaque handles released with their _free
 * function; strings returned through char** are released with
 * irn_string_free().
 */
#ifndef IRN_H_
#define IRN_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define IRN_API __declspec(dllexport)
#elif defined(__GNUC__)
#define IRN_API __attribute__((visibility("default")))
#else
#define IRN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum irn_status {
  IRN_OK = 0,
  IRN_ERR_INVALID_ARGUMENT = 1,
  IRN_ERR_CONTRACT = 2,
  IRN_ERR_SHAPE = 3,
  IRN_ERR_NUMERIC = 4,
  IRN_ERR_IO = 5,
  IRN_ERR_PARSE = 6,
  IRN_ERR_FORMAT = 7,
  IRN_ERR_SUPPLY = 8,
  IRN_ERR_INTERNAL = 9
} irn_status;

typedef enum irn_split { IRN_SPLIT_TRAIN = 0, IRN_SPLIT_VALID = 1, IRN_SPLIT_TEST = 2 } irn_split;

IRN_API const char* irn_version(void);
IRN_API const char* irn_status_name(irn_status status);
/* Message of the last failed call on this thread ("" if none). */
IRN_API const char* irn_last_error(void);
IRN_API void irn_string_free(char* s);

/* ---- Knowledge-base datasets ---------------------------------------------- */

typedef struct irn_dataset irn_dataset;

typedef struct irn_dataset_info {
  size_t num_entities;
  size_t num_relations; /* including reverse relations when augmented */
  size_t base_relations;
  size_t train_triples; /* after augmentation */
  size_t valid_triples;
  size_t test_triples;
  size_t train_queries;
  size_t valid_queries;
  size_t test_queries;
  size_t warnings;
} irn_dataset_info;

/* Loads train.txt, valid.txt and test.txt from a directory. */
IRN_API irn_status irn_dataset_load(const char* dir, int add_reverse, irn_dataset** out);
IRN_API void irn_dataset_free(irn_dataset* dataset);
IRN_API irn_status irn_dataset_get_info(const irn_dataset* dataset, irn_dataset_info* out);
/* Loader warnings, one per line. */
IRN_API irn_status irn_dataset_warnings(const irn_dataset* dataset, char** out);

/* ---- Configuration ---------------------------------------------------------- */

typedef struct irn_kbc_config {
  size_t entity_dim;
  size_t relation_dim;
  size_t memory_size;
  size_t memory_dim;
  size_t t_max;
  double lambda;
  double gamma;
  size_t negatives;
  int normalize_output_entities;
  double init_scale;
} irn_kbc_config;

typedef struct irn_train_config {
  double learning_rate;
  size_t batch_size;
  size_t epochs;
  size_t patience; /* 0 disables early stopping */
  uint64_t seed;
  double clip_norm; /* <= 0 disables clipping */
  size_t threads;
  size_t valid_limit; /* 0 = whole validation split */
} irn_train_config;

IRN_API void irn_kbc_config_default(irn_kbc_config* config);
IRN_API void irn_train_config_default(irn_train_config* config);

/* ---- Knowledge-base completion model -------------------------------------- */

typedef struct irn_kbc_model irn_kbc_model;

typedef struct irn_epoch_log {
  size_t epoch;
  double mean_loss;
  double valid_mean_rank;
  double valid_hits_at_10;
  int improved;
} irn_epoch_log;

typedef void (*irn_epoch_callback)(const irn_epoch_log* log, void* user);

typedef struct irn_train_summary {
  size_t epochs_run;
  size_t best_epoch;
  double best_valid_hits_at_10;
} irn_train_summary;

typedef struct irn_ranking {
  size_t count;
  double mean_rank;
  double hits_at_10;
} irn_ranking;

IRN_API irn_status irn_kbc_model_create(const irn_dataset* dataset, const irn_kbc_config* config,
                                        uint64_t seed, irn_kbc_model** out);
IRN_API irn_status irn_kbc_model_load(const char* path, irn_kbc_model** out);
IRN_API irn_status irn_kbc_model_save(const irn_kbc_model* model, const char* path);
IRN_API void irn_kbc_model_free(irn_kbc_model* model);
IRN_API irn_status irn_kbc_model_get_config(const irn_kbc_model* model, irn_kbc_config* out);
/* IRN_ERR_SHAPE naming the table when the model does not fit the dataset. */
IRN_API irn_status irn_kbc_model_check(const irn_kbc_model* model, const irn_dataset* dataset);

IRN_API irn_status irn_kbc_train(irn_kbc_model* model, const irn_dataset* dataset,
                                 const irn_train_config* config, irn_epoch_callback callback,
                                 void* user, irn_train_summary* out);
/* limit = 0 evaluates the whole split. */
IRN_API irn_status irn_kbc_evaluate(const irn_kbc_model* model, const irn_dataset* dataset,
                                    irn_split split, size_t threads, size_t limit,
                                    irn_ranking* out);
/* Scores of every entity for (subject, relation, ?) given by names. */
IRN_API irn_status irn_kbc_scores(const irn_kbc_model* model, const irn_dataset* dataset,
                                  const char* subject, const char* relation, double* scores,
                                  size_t length);
/* Per-step trace of (head, relation, tail) as a text table. */
IRN_API irn_status irn_kbc_trace(const irn_kbc_model* model, const irn_dataset* dataset,
                                 const char* head, const char* relation, const char* tail,
                                 char** out);
IRN_API irn_status irn_kbc_memory_report(const irn_kbc_model* model, const irn_dataset* dataset,
                                         size_t top_k, char** out);

/* Gradient check on the built-in toy problem. *out receives the per-parameter
 * table; *passed is nonzero when every error is within tolerance. */
IRN_API irn_status irn_gradcheck_toy(uint64_t seed, double tolerance, char** out,
                                     double* max_error, int* passed);

/* ---- Shortest-path worlds ----------------------------------------------------- */

typedef struct irn_path_world irn_path_world;

typedef struct irn_world_config {
  size_t nodes;
  size_t k;
  int random_edges;
  uint64_t seed;
  size_t train;
  size_t valid;
  size_t test;
} irn_world_config;

typedef struct irn_path_world_info {
  size_t nodes;
  size_t edges;
  size_t train;
  size_t valid;
  size_t test;
  size_t longest_train_hops;
} irn_path_world_info;

IRN_API void irn_world_config_default(irn_world_config* config);
/* IRN_ERR_SUPPLY reports the achieved count when the graph cannot supply the
 * requested instances. */
IRN_API irn_status irn_path_world_generate(const irn_world_config* config, irn_path_world** out);
IRN_API irn_status irn_path_world_load(const char* path, irn_path_world** out);
IRN_API irn_status irn_path_world_save(const irn_path_world* world, const char* path);
IRN_API void irn_path_world_free(irn_path_world* world);
IRN_API irn_status irn_path_world_get_info(const irn_path_world* world, irn_path_world_info* out);

typedef enum irn_path_objective {
  IRN_PATH_EXPECTED_REWARD = 0,
  IRN_PATH_LOG_LIKELIHOOD = 1
} irn_path_objective;

typedef struct irn_path_model_config {
  size_t embed_dim;
  size_t memory_size;
  size_t memory_dim;
  size_t t_max;
  double lambda;
  size_t max_decode; /* 0 = twice the longest training path */
  irn_path_objective objective;
  double init_scale;
} irn_path_model_config;

typedef struct irn_path_epoch_log {
  size_t epoch;
  double mean_loss;
  size_t valid_correct;
  size_t valid_valid;
  int improved;
} irn_path_epoch_log;

typedef void (*irn_path_epoch_callback)(const irn_path_epoch_log* log, void* user);

typedef struct irn_path_metrics {
  size_t count;
  size_t valid;
  size_t correct;
  double valid_rate;
  double correct_rate;
} irn_path_metrics;

typedef struct irn_path_model irn_path_model;

IRN_API void irn_path_model_config_default(irn_path_model_config* config);
IRN_API irn_status irn_path_model_create(const irn_path_world* world,
                                         const irn_path_model_config* config, uint64_t seed,
                                         irn_path_model** out);
IRN_API irn_status irn_path_model_load(const char* path, irn_path_model** out);
IRN_API irn_status irn_path_model_save(const irn_path_model* model, const char* path);
IRN_API void irn_path_model_free(irn_path_model* model);
IRN_API irn_status irn_path_train(irn_path_model* model, const irn_path_world* world,
                                  const irn_train_config* config,
                                  irn_path_epoch_callback callback, void* user,
                                  irn_train_summary* out);
IRN_API irn_status irn_path_evaluate(const irn_path_model* model, const irn_path_world* world,
                                     irn_split split, size_t threads, irn_path_metrics* out);
IRN_API irn_status irn_path_dp_baseline(const irn_path_world* world, irn_split split,
                                        irn_path_metrics* out);
/* One line per instance: start end | predicted path | valid correct. */
IRN_API irn_status irn_path_predictions(const irn_path_model* model, const irn_path_world* world,
                                        irn_split split, size_t threads, char** out);

/* ---- Metric reports ------------------------------------------------------------ */

typedef struct irn_report irn_report;

IRN_API irn_status irn_report_create(irn_report** out);
IRN_API void irn_report_free(irn_report* report);
IRN_API irn_status irn_report_add_config(irn_report* report, const char* key, const char* value);
IRN_API irn_status irn_report_add_metric(irn_report* report, const char* name, const char* split,
                                         double value);
IRN_API irn_status irn_report_text(const irn_report* report, char** out);
IRN_API irn_status irn_report_json(const irn_report* report, char** out);
IRN_API irn_status irn_report_write(const irn_report* report, const char* path);

#ifdef __cplusplus
}
#endif

#endif /* IRN_H_ */

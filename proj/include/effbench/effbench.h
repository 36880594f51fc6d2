/* Copyright 2026 The effbench Authors. All Rights Reserved.
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at
    http://www.apache.org/licenses/LICENSE-2.0
Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

/* C interface to the effbench inference benchmarking harness.
 *
 * Every fallible call returns an eb_status; on failure the thread-local
 * eb_last_error() / eb_last_error_kind() describe it. Strings returned
 * through `char**` are owned by the caller and freed with eb_string_free().
 * Handles are opaque and freed with their *_free function; NULL is accepted
 * by every *_free. */

#ifndef EFFBENCH_EFFBENCH_H_
#define EFFBENCH_EFFBENCH_H_

#include <stddef.h>
#include <stdint.h>

#if defined(EFFBENCH_BUILDING_LIBRARY)
#define EB_API __attribute__((visibility("default")))
#else
#define EB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values match the CLI exit codes. */
typedef enum eb_status {
  EB_OK = 0,
  EB_ERR_OTHER = 1,
  EB_ERR_CONFIG = 2,
  EB_ERR_PROTOCOL = 3,
  EB_ERR_MODEL_CRASH = 4,
  EB_ERR_METERING = 5
} eb_status;

EB_API const char* eb_version(void);
EB_API const char* eb_last_error(void);
/* Short error name such as "LengthMismatch"; "" after success. */
EB_API const char* eb_last_error_kind(void);
EB_API void eb_string_free(char* s);
/* "debug", "info", "warn", "error" or "off". */
EB_API eb_status eb_set_log_level(const char* level);

/* Datasets: JSONL with {"id", "input", "references"} per line. */
typedef struct eb_dataset eb_dataset;
EB_API eb_status eb_dataset_load(const char* path, eb_dataset** out);
EB_API eb_status eb_dataset_parse(const char* jsonl, eb_dataset** out);
EB_API size_t eb_dataset_size(const eb_dataset* ds);
EB_API double eb_dataset_mean_input_length(const eb_dataset* ds);
EB_API void eb_dataset_free(eb_dataset* ds);

/* Batch plans. `scenario_json` is a scenario object such as
 * {"kind":"poisson","poisson_mean":16,"seed":3}. */
typedef struct eb_plan eb_plan;
EB_API eb_status eb_plan_create(const eb_dataset* test, const char* scenario_json,
                                eb_plan** out);
/* Offline sample from `train`, skipping inputs that occur in `exclude`
 * (may be NULL). */
EB_API eb_status eb_plan_create_offline(const eb_dataset* train, double target_mean_length,
                                        const char* scenario_json, const eb_dataset* exclude,
                                        eb_plan** out);
EB_API size_t eb_plan_batch_count(const eb_plan* plan);
EB_API size_t eb_plan_batch_size(const eb_plan* plan, size_t batch);
EB_API uint64_t eb_plan_total_instances(const eb_plan* plan);
/* Offline plans only; 0 otherwise. */
EB_API double eb_plan_sample_mean_length(const eb_plan* plan);
EB_API eb_status eb_plan_to_json(const eb_plan* plan, char** out);
EB_API void eb_plan_free(eb_plan* plan);

/* Metrics. `hypotheses_json` is a JSON list of strings; `references_json` a
 * list of lists of strings, one per hypothesis. */
EB_API eb_status eb_corpus_bleu(const char* hypotheses_json, const char* references_json,
                                double* score);
EB_API eb_status eb_exact_match(const char* hypotheses_json, const char* references_json,
                                double* fraction);
EB_API size_t eb_count_words(const char* text);

/* Energy above `idle_watts` over [start_s, end_s] of a sampled trace, Wh. */
EB_API eb_status eb_integrate_energy(const double* t_s, const double* watts, size_t n,
                                     double idle_watts, double start_s, double end_s,
                                     double* energy_wh);
EB_API double eb_co2_from_energy(double energy_wh, double intensity_g_per_kwh);

/* Host slot. `lock_path` NULL or "" uses $EFFBENCH_LOCK_PATH or the default;
 * `queue_timeout_s` <= 0 waits forever; `transcript_path` may be NULL. */
typedef struct eb_slot eb_slot;
EB_API eb_status eb_slot_acquire(const char* job_id, const char* lock_path, double heartbeat_s,
                                 double queue_timeout_s, const char* transcript_path,
                                 eb_slot** out);
EB_API eb_status eb_slot_release(eb_slot* slot, int failed);
/* Releases first if still held. */
EB_API void eb_slot_free(eb_slot* slot);

/* Run configuration: a JSON file plus overrides set with eb_config_set
 * (value is JSON text; non-JSON is taken as a string). */
typedef struct eb_config eb_config;
EB_API eb_status eb_config_load(const char* path, eb_config** out);
/* Relative paths in `json_text` resolve against `base_dir` (NULL: cwd). */
EB_API eb_status eb_config_parse(const char* json_text, const char* base_dir, eb_config** out);
EB_API eb_status eb_config_set(eb_config* config, const char* key, const char* value);
/* The resolved configuration as JSON (for inspection). */
EB_API eb_status eb_config_resolve(const eb_config* config, char** out);
EB_API void eb_config_free(eb_config* config);

/* Commands. `*summary_json`, when non-NULL, receives a JSON result. */
EB_API eb_status eb_run(const eb_config* config, char** summary_json);
EB_API eb_status eb_baseline(const char* meter_spec, double duration_s, const char* state_file,
                             const char* lock_path, double* idle_watts);
EB_API eb_status eb_report(const char* const* report_paths, size_t n, char** radar_json,
                           char** table_text);
EB_API eb_status eb_validate_adapter(const char* manifest_path, size_t requests,
                                     const char* transcript_path, char** result_json);
/* Serves the protocol on stdin/stdout until EOF; returns the exit code. */
EB_API int eb_selftest_model(const char* mode, const char* options_json);

#ifdef __cplusplus
}
#endif

#endif /* EFFBENCH_EFFBENCH_H_ */

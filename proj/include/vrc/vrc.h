/*
 * Copyright 2026 The VRC Eval Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to the evaluation toolkit.
 *
 * Every call returns a vrc_status. On failure vrc_last_error() describes the
 * problem for the calling thread and vrc_last_error_line() gives the 1-based
 * input line for parse errors (0 otherwise). Strings returned through `char**`
 * out-parameters are owned by the caller and released with vrc_string_free().
 * Options are passed as JSON object strings; NULL means all defaults.
 */

#ifndef VRC_VRC_H_
#define VRC_VRC_H_

#include <stddef.h>

#if defined(_WIN32)
#define VRC_API __declspec(dllexport)
#else
#define VRC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vrc_status {
  VRC_OK = 0,
  VRC_INVALID_ARGUMENT = 1,
  VRC_PARSE_ERROR = 2,
  VRC_NOT_FOUND = 3,
  VRC_IO_ERROR = 4,
  VRC_UNAUTHORIZED = 5,
  VRC_PAYLOAD_TOO_LARGE = 6,
  VRC_RATE_LIMITED = 7,
  VRC_INTERNAL = 8
} vrc_status;

typedef struct vrc_truth vrc_truth;
typedef struct vrc_hierarchy vrc_hierarchy;
typedef struct vrc_server vrc_server;

VRC_API const char* vrc_version(void);
VRC_API const char* vrc_last_error(void);
VRC_API size_t vrc_last_error_line(void);
VRC_API const char* vrc_status_name(vrc_status status);
VRC_API void vrc_string_free(char* s);

/* Ground-truth directory (task, images.tsv, categories.txt, labels.tsv,
 * boxes.tsv, blacklist.tsv). */
VRC_API vrc_status vrc_truth_load(const char* dir, vrc_truth** out);
VRC_API void vrc_truth_free(vrc_truth* truth);

/* Edge list `parent<TAB>child`; `leaves_path` may be NULL. */
VRC_API vrc_status vrc_hierarchy_load(const char* edges_path, const char* leaves_path,
                                      vrc_hierarchy** out);
VRC_API void vrc_hierarchy_free(vrc_hierarchy* hierarchy);

/* Options: {"team": str, "excludeBlacklisted": bool}. `hierarchy` may be
 * NULL, in which case no hierarchical error is reported. */
VRC_API vrc_status vrc_eval_classification(const vrc_truth* truth, const vrc_hierarchy* hierarchy,
                                           const char* submission_path, const char* options_json,
                                           char** report_json);

/* Options: {"team": str, "iouThreshold": number}. */
VRC_API vrc_status vrc_eval_localization(const vrc_truth* truth, const char* submission_path,
                                         const char* options_json, char** report_json);

/* Options: {"team": str, "policy": "adaptive"|"fixed", "curves": bool,
 * "cache": bool (default true), "threads": int}. */
VRC_API vrc_status vrc_eval_detection(const vrc_truth* truth, const char* submission_path,
                                      const char* options_json, char** report_json);

/* `reports_json` is a JSON array of detection reports. */
VRC_API vrc_status vrc_rank(const char* reports_json, char** ranking_json);

/* Returns the report with a "bootstrap" block added. Options:
 * {"rounds", "alpha", "seed", "convergenceTol", "maxRounds", "threads"}. */
VRC_API vrc_status vrc_bootstrap(const char* report_json, const char* options_json,
                                 char** report_out);

/* Options: {"neighborGap": number, "windows": path, "properties": path,
 * "scoreReports": [path...], "tol": number, "minClasses": int,
 * "bootstrap": {...}}. The per-class table goes to `classes_csv` and the
 * property bin table to `bins_csv`; either may be NULL. */
VRC_API vrc_status vrc_stats(const vrc_truth* truth, const char* options_json, char** stats_json,
                             char** classes_csv, char** bins_csv);

/* Options: {"images", "sparsity", "answerNoise", "seed", "perImage",
 * "boxImages", "maxInstances", "drawError", "qualityFlip", "coverageFlip",
 * "consensusImages", "threshold", "voteCap"}. */
VRC_API vrc_status vrc_annotate_sim(const char* tree_path, const char* options_json,
                                    char** report_json);

/* Options: {"crossThreshold": number}. `csv_out` may be NULL. */
VRC_API vrc_status vrc_audit(const vrc_truth* truth, const char* options_json, char** audit_json,
                             char** csv_out);

/* Submission server from a JSON config file. */
VRC_API vrc_status vrc_server_create(const char* config_path, vrc_server** out);
/* port 0 binds a free port; the bound port is written to `bound_port`.
 * host NULL uses the configured host and port < 0 the configured port. */
VRC_API vrc_status vrc_server_start(vrc_server* server, const char* host, int port,
                                    int* bound_port);
VRC_API vrc_status vrc_server_stop(vrc_server* server);
VRC_API void vrc_server_free(vrc_server* server);

#ifdef __cplusplus
}
#endif

#endif /* VRC_VRC_H_ */

// Copyright 2026 The embserve Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EMBSERVE_EMBSERVE_H_
#define EMBSERVE_EMBSERVE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EMBSERVE_API __declspec(dllexport)
#else
#define EMBSERVE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum embserve_status {
  EMBSERVE_OK = 0,
  EMBSERVE_ERR_CONFIG = 1,
  EMBSERVE_ERR_VALIDATION = 2,
  EMBSERVE_ERR_ROUTING = 3,
  EMBSERVE_ERR_CAPACITY = 4,
  EMBSERVE_ERR_PARSE = 5,
  EMBSERVE_ERR_INVARIANT = 6,
  EMBSERVE_ERR_IO = 7,
  EMBSERVE_ERR_ARGUMENT = 8,
  EMBSERVE_ERR_INTERNAL = 9
} embserve_status;

typedef struct embserve_config embserve_config;
typedef struct embserve_trace embserve_trace;
typedef struct embserve_report embserve_report;

/* Message of the last failed call on this thread; "" if none. */
EMBSERVE_API const char* embserve_last_error(void);
EMBSERVE_API const char* embserve_status_name(embserve_status status);
EMBSERVE_API const char* embserve_version(void);

/* Configs. */
EMBSERVE_API embserve_status embserve_config_default(embserve_config** out);
EMBSERVE_API embserve_status embserve_config_load(const char* path, embserve_config** out);
EMBSERVE_API embserve_status embserve_config_parse(const char* text, embserve_config** out);
EMBSERVE_API embserve_status embserve_config_set_seed(embserve_config* config, uint64_t seed);
/* "virtual" or "threaded". */
EMBSERVE_API embserve_status embserve_config_set_backend(embserve_config* config,
                                                         const char* backend);
EMBSERVE_API embserve_status embserve_config_set_experiment(embserve_config* config,
                                                            const char* name);
EMBSERVE_API embserve_status embserve_config_set_output(embserve_config* config,
                                                        const char* prefix);
EMBSERVE_API embserve_status embserve_config_set_trace(embserve_config* config,
                                                       const char* path);
EMBSERVE_API embserve_status embserve_config_output(const embserve_config* config,
                                                    char** out);
/* Resolved YAML; release with embserve_string_free. */
EMBSERVE_API embserve_status embserve_config_to_text(const embserve_config* config, char** out);
EMBSERVE_API embserve_status embserve_config_validate(const embserve_config* config);
EMBSERVE_API void embserve_config_free(embserve_config* config);

/* Traces. */
EMBSERVE_API embserve_status embserve_trace_generate(const embserve_config* config,
                                                     embserve_trace** out);
EMBSERVE_API embserve_status embserve_trace_load(const char* path, embserve_trace** out);
EMBSERVE_API embserve_status embserve_trace_save(const embserve_trace* trace, const char* path);
EMBSERVE_API uint64_t embserve_trace_fingerprint(const embserve_trace* trace);
EMBSERVE_API uint64_t embserve_trace_generator(const embserve_trace* trace);
EMBSERVE_API size_t embserve_trace_batch_count(const embserve_trace* trace);
EMBSERVE_API void embserve_trace_free(embserve_trace* trace);

/* Runs. */
EMBSERVE_API embserve_status embserve_run(const embserve_config* config, embserve_report** out);
/* Machine summary (JSON) and human report; owned by the report. */
EMBSERVE_API const char* embserve_report_summary(const embserve_report* report);
EMBSERVE_API const char* embserve_report_text(const embserve_report* report);
/* Writes <prefix>.txt and <prefix>.json. */
EMBSERVE_API embserve_status embserve_report_write(const embserve_report* report,
                                                   const char* prefix);
EMBSERVE_API void embserve_report_free(embserve_report* report);

/* Named experiments. */
EMBSERVE_API size_t embserve_experiment_count(void);
EMBSERVE_API const char* embserve_experiment_name(size_t index);
EMBSERVE_API const char* embserve_experiment_description(size_t index);

/* Comparison table of summary files; release with embserve_string_free. */
EMBSERVE_API embserve_status embserve_compare_summaries(const char* const* paths, size_t count,
                                                        char** out);

EMBSERVE_API void embserve_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif  /* EMBSERVE_EMBSERVE_H_ */
